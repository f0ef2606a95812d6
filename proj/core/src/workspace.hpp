#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dagmix/data.hpp"
#include "dagmix/em.hpp"
#include "dagmix/model.hpp"

namespace dagmix::detail {

// Indices of one node's conditional table, built once per fit.
struct FamilyLayout {
  std::vector<int> vars;                      // sorted parents, then the node
  std::vector<int> levels;
  std::vector<int> list_position;             // family parent k -> index in node.parents
  std::vector<std::size_t> latent_offset;     // per latent configuration
  std::vector<std::size_t> observed_stride;   // per observed-node position, 0 if absent
  bool touches_latent = false;
  bool has_covariates = false;
};

struct Stratum {
  std::vector<double> covariates;
  std::vector<std::vector<int>> cells;
  std::vector<double> frequencies;
  std::vector<std::vector<std::size_t>> family_offset;  // [node][cell]
};

// Log conditional tables for every node and stratum. Nodes without covariates
// share one table across strata.
class LogCpts {
 public:
  const std::vector<double>& get(int node, std::size_t stratum) const {
    return per_stratum_[node].empty() ? shared_[node] : per_stratum_[node][stratum];
  }

 private:
  friend class Workspace;
  std::vector<std::vector<double>> shared_;
  std::vector<std::vector<std::vector<double>>> per_stratum_;
};

class Workspace {
 public:
  Workspace(const ModelSpec& model, const Dataset& data);

  const ModelSpec& model() const { return *model_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t latent_configs() const { return n_latent_configs_; }
  const std::vector<Stratum>& strata() const { return strata_; }
  const std::vector<FamilyLayout>& families() const { return families_; }
  // record -> (stratum, cell)
  const std::vector<std::pair<std::size_t, std::size_t>>& record_cells() const { return record_cells_; }

  // Conditional table of a node for a covariate vector, in family layout.
  std::vector<double> conditional_table(const ParamVector& beta, int node,
                                        const std::vector<double>& covariates) const;
  LogCpts log_cpts(const ParamVector& beta) const;

  // log P(j) for every stored cell, [stratum][cell]. Empty cells included.
  std::vector<std::vector<double>> cell_log_probs(const ParamVector& beta) const;

  // Observed-data log-likelihood; fills `out` when given.
  double e_step(const ParamVector& beta, CompletedTable* out) const;

  // Completed table from posteriors drawn as uniform plus u*delta,
  // u ~ U[-1, 1], one draw per (cell, latent configuration).
  CompletedTable perturbed_uniform(std::uint64_t seed, double delta) const;

 private:
  CompletedTable skeleton() const;
  void accumulate_families(CompletedTable& table) const;

  const ModelSpec* model_;
  ParamLayout layout_;
  std::vector<int> observed_, latent_, latent_levels_;
  std::size_t n_latent_configs_ = 1;
  std::vector<FamilyLayout> families_;
  std::vector<Stratum> strata_;
  std::vector<std::pair<std::size_t, std::size_t>> record_cells_;
};

}  // namespace dagmix::detail
