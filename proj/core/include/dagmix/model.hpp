#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dagmix/error.hpp"

namespace dagmix {

// Stacked coefficients of every node's logit regression, laid out by
// ParamLayout.
using ParamVector = Eigen::VectorXd;

enum class LinkKind { adjacent, global, continuation };

std::string_view to_string(LinkKind link);
// Accepts "adjacent"/"global"/"continuation" and the one-letter forms a/g/c.
std::optional<LinkKind> parse_link(std::string_view text);

// Per-node design override. Rows enumerate (parent configuration, logit) with
// parent configurations in lexicographic order over the node's parent list and
// the logit index running fastest; columns are the node's free coefficients.
struct DesignMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // row-major, rows * cols

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  bool operator==(const DesignMatrix&) const = default;
};

struct NodeSpec {
  std::string name;
  int n_categories = 2;
  bool is_latent = false;
  LinkKind link = LinkKind::global;
  std::vector<int> parents;              // 0-based node positions, as listed
  std::vector<std::string> covariates;   // names from ModelSpec::covariate_names
  bool per_logit_covariates = false;     // one slope per covariate per logit
  std::optional<DesignMatrix> design;

  bool operator==(const NodeSpec&) const = default;
};

// A recursive system of categorical structural equations. The position of a
// node in `nodes` is its causal order; parents always precede their children.
struct ModelSpec {
  std::vector<NodeSpec> nodes;
  std::vector<std::string> covariate_names;

  std::size_t size() const { return nodes.size(); }
  const NodeSpec& operator[](std::size_t i) const { return nodes[i]; }
  std::vector<int> observed_nodes() const;
  std::vector<int> latent_nodes() const;
  std::optional<int> find(std::string_view name) const;
  std::vector<int> levels() const;

  bool operator==(const ModelSpec&) const = default;
};

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::size_t> node_param_counts;
  std::size_t total_params = 0;
  std::uint64_t observed_cells = 0;
  std::uint64_t observed_df = 0;

  bool valid() const { return violations.empty(); }
};

// Violations are returned, never thrown.
ValidationReport validate(const ModelSpec& model);

// Throws ModelError (syntax or semantic) on anything validate() would reject.
ModelSpec parse_model(std::string_view json_text);
std::string emit_model(const ModelSpec& model);

// What a coefficient multiplies.
enum class RegressorKind { intercept, parent, covariate, design };

struct ParamSlot {
  int node = 0;
  RegressorKind kind = RegressorKind::intercept;
  int source = 0;  // parent node position, covariate position or design column
  int level = 0;   // 1-based logit/level index; 0 when not applicable
};

class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(const ModelSpec& model);

  std::size_t size() const { return slots_.size(); }
  std::size_t offset(int node) const { return offsets_[node]; }
  std::size_t block_size(int node) const { return offsets_[node + 1] - offsets_[node]; }
  const ParamSlot& slot(std::size_t flat) const { return slots_[flat]; }
  const std::vector<ParamSlot>& slots() const { return slots_; }

  // Flat index of a parent slope; level is 1-based. Throws ArgumentError.
  std::size_t parent_slope(int node, int parent, int level) const;
  std::size_t intercept(int node, int level) const;

  // Names like β_{411} or β_{14.81}: node, regressor source, level (1-based).
  std::string label(std::size_t flat) const;

 private:
  std::vector<std::size_t> offsets_;
  std::vector<ParamSlot> slots_;
  std::vector<std::string> covariate_names_;
  std::vector<std::vector<int>> parents_;
  std::vector<bool> per_logit_;
};

ParamLayout param_layout(const ModelSpec& model);

// Variables of a node's conditional table: its parents in ascending causal
// order, then the node itself.
std::vector<int> family_of(const ModelSpec& model, int node);

// Draws a coefficient vector with entries uniform on [-bound, bound], forcing
// the intercept increments of global-link nodes beyond the first to be
// negative so cumulative logits decrease. Deterministic in the seed.
ParamVector sample_parameters(const ModelSpec& model, std::uint64_t seed, double bound = 2.0);

}  // namespace dagmix
