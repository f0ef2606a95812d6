#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dagmix/data.hpp"
#include "dagmix/model.hpp"
#include "dagmix/table.hpp"

namespace dagmix {

// Reconstructed frequencies M_{j,h} for one covariate stratum. Only observed
// cells with positive frequency are stored; the rows for empty cells are
// identically zero.
struct CompletedStratum {
  std::vector<double> covariates;
  std::vector<std::vector<int>> cells;   // observed coordinates, observed-node order
  std::vector<double> frequencies;       // N_j
  std::vector<double> completed;         // cells x latent configurations, row-major
  std::vector<LexTable> families;        // per node: margin over (sorted parents, node)
};

struct CompletedTable {
  std::vector<int> observed_nodes;
  std::vector<int> latent_nodes;
  std::vector<int> latent_levels;
  std::vector<CompletedStratum> strata;

  std::size_t latent_configs() const;
  // Full table over every node (model order) for one stratum.
  LexTable dense(const ModelSpec& model, std::size_t stratum) const;
  // Completed counts over (sorted parents of node, node) for one stratum.
  const LexTable& family(int node, std::size_t stratum) const {
    return strata[stratum].families[node];
  }
};

struct MStepOptions {
  int max_iter = 100;       // 1 gives a generalized-EM single scoring step
  double tol = 1e-9;
  int max_halvings = 20;
  double lambda_bound = 30.0;
};

struct MStepDiagnostics {
  std::vector<std::string> notes;  // stalled line searches, large coefficients
};

struct FitOptions {
  int max_iter = 5000;
  double tol_loglik = 1e-8;
  double tol_param = 1e-6;
  int n_restarts = 10;
  std::uint64_t seed = 0;
  int threads = 0;                // 0: hardware concurrency
  double perturbation = 0.05;     // δ in the initial posteriors
  double init_bound = 3.0;        // |β| clamp after the initial M-step
  bool canonicalize = false;      // reorder latent labels by first-child effect
  MStepOptions m_step;
  std::optional<ParamVector> start;  // replaces random initialization when set
};

struct RestartRecord {
  std::uint64_t seed = 0;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct FitResult {
  ParamVector beta;
  ParamVector se;  // empty until filled by attach_standard_errors
  double loglik = 0.0;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  std::vector<RestartRecord> restarts;
  std::size_t best_restart = 0;
  std::size_t n_params = 0;
  double n_obs = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::vector<std::string> diagnostics;
};

// E-step at beta: completed table plus the observed-data log-likelihood.
// NumericalError if an observed cell with positive frequency has zero
// probability.
std::pair<CompletedTable, double> e_step(const ModelSpec& model, const ParamVector& beta,
                                         const Dataset& data);

// Node-wise weighted multinomial ML on the completed table by Fisher scoring
// with step-halving. `start` must be valid for the links; the default start is
// the uniform-distribution intercepts with zero slopes.
ParamVector m_step(const ModelSpec& model, const CompletedTable& completed,
                   const MStepOptions& options = {}, MStepDiagnostics* diagnostics = nullptr);
ParamVector m_step(const ModelSpec& model, const CompletedTable& completed, const ParamVector& start,
                   const MStepOptions& options = {}, MStepDiagnostics* diagnostics = nullptr);

// Intercepts reproducing uniform conditionals, zero slopes.
ParamVector null_parameters(const ModelSpec& model);

// One E-step with perturbed uniform posteriors, one M-step, clamp.
ParamVector initialize(const ModelSpec& model, const Dataset& data, std::uint64_t seed,
                       const FitOptions& options = {});

double loglik(const ModelSpec& model, const ParamVector& beta, const Dataset& data);

FitResult fit(const ModelSpec& model, const Dataset& data, const FitOptions& options = {});

// Relabels the categories of a latent node: new category k is old category
// perm[k]. Returns the coefficient vector giving the same joint distribution
// under the new labels. Root latents admit any permutation; latents with
// parents admit the reversal under adjacent or global links. Children must use
// the additive design. Throws ArgumentError when not representable.
ParamVector permute_latent_labels(const ModelSpec& model, const ParamVector& beta, int latent,
                                  const std::vector<int>& perm);

// Orders each latent node's categories by ascending effect on its first child
// where representable; returns the relabelled vector and appends a note for
// each latent left unchanged.
ParamVector canonicalize_labels(const ModelSpec& model, const ParamVector& beta,
                                std::vector<std::string>* notes = nullptr);

}  // namespace dagmix
