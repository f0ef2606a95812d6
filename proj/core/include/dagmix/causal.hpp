#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dagmix/data.hpp"
#include "dagmix/model.hpp"
#include "dagmix/table.hpp"

namespace dagmix {

// do(Z_i = z_i) for each entry.
struct Intervention {
  std::map<int, int> assignments;
};

struct EffectQuery {
  std::string label;
  int outcome = 0;
  std::map<int, int> reference;   // x0
  std::map<int, int> treatment;   // x1
  std::vector<int> mediators;     // empty for total effects
  std::vector<int> thresholds;    // k in P(Y >= k)
  std::vector<double> covariates;
};

// Conditional table of a node over (sorted parents, node); every parent row
// sums to one.
LexTable node_cpt(const ModelSpec& model, const ParamVector& beta, int node,
                  std::span<const double> covariates = {});

LexTable joint_distribution(const ModelSpec& model, const ParamVector& beta,
                            std::span<const double> covariates = {});

// Truncated factorization over the non-intervened nodes.
LexTable intervene(const ModelSpec& model, const ParamVector& beta, const Intervention& iv,
                   std::span<const double> covariates = {});

// P(Y >= k | do(x1)) / P(Y >= k | do(x0)) for each threshold.
std::vector<double> causal_effect(const ModelSpec& model, const ParamVector& beta, const EffectQuery& q);

// Mediator configurations weighted by P(m | do(x0)); ratio of the averaged
// survival probabilities under do(x1, m) and do(x0, m).
std::vector<double> natural_direct_effect(const ModelSpec& model, const ParamVector& beta,
                                          const EffectQuery& q);

// Dispatches on whether the query has mediators.
std::vector<double> evaluate_effect(const ModelSpec& model, const ParamVector& beta, const EffectQuery& q);

struct Sample {
  Dataset data;
  std::vector<std::vector<int>> latent;  // per record, latent-node order; filled on request
};

// Ancestral sampling in causal order. `covariate_rows` holds either one row
// per draw or a single row used for all draws; it may be empty only when the
// model has no covariates.
Sample sample_data(const ModelSpec& model, const ParamVector& beta, std::size_t n, std::uint64_t seed,
                   const std::vector<std::vector<double>>& covariate_rows = {}, bool keep_latent = false);

// Parses a query document: one query object or {"queries": [...]}. Nodes are
// referenced by name.
std::vector<EffectQuery> parse_effect_queries(const ModelSpec& model, std::string_view json_text);

}  // namespace dagmix
