#include "dagmix/model.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "dagmix/links.hpp"

namespace dagmix {

using nlohmann::json;

std::string_view to_string(LinkKind link) {
  switch (link) {
    case LinkKind::adjacent: return "adjacent";
    case LinkKind::global: return "global";
    case LinkKind::continuation: return "continuation";
  }
  return "global";
}

std::optional<LinkKind> parse_link(std::string_view text) {
  if (text == "adjacent" || text == "a") return LinkKind::adjacent;
  if (text == "global" || text == "g") return LinkKind::global;
  if (text == "continuation" || text == "c") return LinkKind::continuation;
  return std::nullopt;
}

std::vector<int> ModelSpec::observed_nodes() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (!nodes[i].is_latent) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> ModelSpec::latent_nodes() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].is_latent) out.push_back(static_cast<int>(i));
  return out;
}

std::optional<int> ModelSpec::find(std::string_view name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].name == name) return static_cast<int>(i);
  return std::nullopt;
}

std::vector<int> ModelSpec::levels() const {
  std::vector<int> out;
  out.reserve(nodes.size());
  for (const auto& n : nodes) out.push_back(n.n_categories);
  return out;
}

namespace {

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a)
    return std::numeric_limits<std::uint64_t>::max();
  return a * b;
}

std::size_t parent_config_count(const ModelSpec& model, const NodeSpec& node) {
  std::size_t count = 1;
  for (int p : node.parents)
    if (p >= 0 && static_cast<std::size_t>(p) < model.size()) count *= model.nodes[p].n_categories;
  return count;
}

std::size_t node_param_count(const ModelSpec& model, const NodeSpec& node) {
  const std::size_t logits = node.n_categories > 1 ? node.n_categories - 1 : 0;
  std::size_t count = 0;
  if (node.design) {
    count = node.design->cols;
  } else {
    count = logits;
    for (int p : node.parents)
      if (p >= 0 && static_cast<std::size_t>(p) < model.size())
        count += model.nodes[p].n_categories - 1;
  }
  count += node.covariates.size() * (node.per_logit_covariates ? logits : 1);
  return count;
}

}  // namespace

ValidationReport validate(const ModelSpec& model) {
  ValidationReport report;
  auto violation = [&](const NodeSpec& node, const std::string& reason) {
    report.violations.push_back("node '" + node.name + "': " + reason);
  };

  if (model.nodes.empty()) report.violations.emplace_back("model has no nodes");

  std::set<std::string> names;
  std::set<std::string> covariate_names;
  for (const auto& c : model.covariate_names)
    if (!covariate_names.insert(c).second)
      report.violations.push_back("duplicate covariate name '" + c + "'");

  for (std::size_t i = 0; i < model.size(); ++i) {
    const NodeSpec& node = model.nodes[i];
    if (node.name.empty()) report.violations.push_back("node " + std::to_string(i + 1) + ": empty name");
    if (!names.insert(node.name).second) violation(node, "duplicate node name");
    if (node.n_categories < 2) violation(node, "n_categories must be at least 2");

    std::set<int> seen;
    for (int p : node.parents) {
      if (p < 0 || static_cast<std::size_t>(p) >= model.size()) {
        violation(node, "unknown parent index " + std::to_string(p + 1));
        continue;
      }
      if (static_cast<std::size_t>(p) >= i)
        violation(node, "non-recursive parent reference '" + model.nodes[p].name + "'");
      if (!seen.insert(p).second) violation(node, "duplicate parent '" + model.nodes[p].name + "'");
    }

    std::set<std::string> seen_cov;
    for (const auto& c : node.covariates) {
      if (!covariate_names.count(c)) violation(node, "unknown covariate '" + c + "'");
      if (!seen_cov.insert(c).second) violation(node, "duplicate covariate '" + c + "'");
    }

    if (node.design) {
      const auto& d = *node.design;
      const std::size_t rows = parent_config_count(model, node) *
                               static_cast<std::size_t>(std::max(node.n_categories - 1, 0));
      if (d.cols < 1) violation(node, "design matrix has no columns");
      if (static_cast<std::size_t>(d.rows) != rows)
        violation(node, "design matrix has " + std::to_string(d.rows) + " rows, expected " +
                            std::to_string(rows));
      if (d.values.size() != static_cast<std::size_t>(d.rows) * static_cast<std::size_t>(std::max(d.cols, 0)))
        violation(node, "design matrix values do not match its shape");
    }

    const std::size_t count = node_param_count(model, node);
    report.node_param_counts.push_back(count);
    report.total_params += count;
  }

  if (!model.nodes.empty() && model.observed_nodes().empty())
    report.violations.emplace_back("model has no observed node");

  std::uint64_t cells = 1;
  for (const auto& node : model.nodes)
    if (!node.is_latent) cells = saturating_mul(cells, static_cast<std::uint64_t>(std::max(node.n_categories, 0)));
  report.observed_cells = model.observed_nodes().empty() ? 0 : cells;
  report.observed_df = report.observed_cells > 0 ? report.observed_cells - 1 : 0;
  return report;
}

namespace {

[[noreturn]] void syntax_error(const std::string& what) {
  throw ModelError(ModelError::Category::syntax, what);
}

[[noreturn]] void semantic_error(const std::string& what) {
  throw ModelError(ModelError::Category::semantic, what);
}

std::vector<std::string> string_list(const json& node, const char* key, const std::string& where) {
  std::vector<std::string> out;
  if (!node.contains(key)) return out;
  const json& arr = node.at(key);
  if (!arr.is_array()) syntax_error(where + ": '" + key + "' must be an array of names");
  for (const auto& v : arr) {
    if (!v.is_string()) syntax_error(where + ": '" + key + "' must contain strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

ModelSpec parse_model(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    syntax_error(std::string("malformed model document: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc.at("nodes").is_array())
    syntax_error("model document must be an object with a 'nodes' array");

  ModelSpec model;
  std::vector<std::vector<std::string>> parent_names;
  const bool explicit_covariates = doc.contains("covariates");
  if (explicit_covariates) model.covariate_names = string_list(doc, "covariates", "model");

  int position = 0;
  for (const json& entry : doc.at("nodes")) {
    ++position;
    const std::string where = "node " + std::to_string(position);
    if (!entry.is_object()) syntax_error(where + ": expected an object");
    NodeSpec node;
    if (!entry.contains("name") || !entry.at("name").is_string()) syntax_error(where + ": missing 'name'");
    node.name = entry.at("name").get<std::string>();
    const std::string named = "node '" + node.name + "'";
    if (!entry.contains("categories") || !entry.at("categories").is_number_integer())
      syntax_error(named + ": 'categories' must be an integer");
    node.n_categories = entry.at("categories").get<int>();
    if (entry.contains("latent")) {
      if (!entry.at("latent").is_boolean()) syntax_error(named + ": 'latent' must be a boolean");
      node.is_latent = entry.at("latent").get<bool>();
    }
    if (entry.contains("link")) {
      if (!entry.at("link").is_string()) syntax_error(named + ": 'link' must be a string");
      const auto link_text = entry.at("link").get<std::string>();
      const auto link = parse_link(link_text);
      if (!link) semantic_error(named + ": unknown link keyword '" + link_text + "'");
      node.link = *link;
    }
    parent_names.push_back(string_list(entry, "parents", named));
    node.covariates = string_list(entry, "covariates", named);
    if (entry.contains("covariate_slopes")) {
      const json& mode = entry.at("covariate_slopes");
      if (!mode.is_string()) syntax_error(named + ": 'covariate_slopes' must be a string");
      if (mode == "per_logit") node.per_logit_covariates = true;
      else if (mode != "shared") semantic_error(named + ": unknown covariate_slopes '" + mode.get<std::string>() + "'");
    }
    if (entry.contains("design")) {
      const json& rows = entry.at("design");
      if (!rows.is_array() || rows.empty()) syntax_error(named + ": 'design' must be a non-empty matrix");
      DesignMatrix d;
      d.rows = static_cast<int>(rows.size());
      for (const json& row : rows) {
        if (!row.is_array()) syntax_error(named + ": 'design' rows must be arrays");
        if (d.cols == 0) d.cols = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != d.cols) syntax_error(named + ": ragged 'design' matrix");
        for (const json& v : row) {
          if (!v.is_number()) syntax_error(named + ": 'design' entries must be numbers");
          d.values.push_back(v.get<double>());
        }
      }
      node.design = std::move(d);
    }
    if (!explicit_covariates)
      for (const auto& c : node.covariates)
        if (std::find(model.covariate_names.begin(), model.covariate_names.end(), c) ==
            model.covariate_names.end())
          model.covariate_names.push_back(c);
    model.nodes.push_back(std::move(node));
  }

  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < model.size(); ++i) index.emplace(model.nodes[i].name, static_cast<int>(i));
  for (std::size_t i = 0; i < model.size(); ++i) {
    for (const auto& pname : parent_names[i]) {
      auto it = index.find(pname);
      if (it == index.end()) semantic_error("node '" + model.nodes[i].name + "': unknown parent '" + pname + "'");
      if (static_cast<std::size_t>(it->second) >= i)
        semantic_error("node '" + model.nodes[i].name + "': non-recursive parent reference '" + pname + "'");
      model.nodes[i].parents.push_back(it->second);
    }
  }

  const auto report = validate(model);
  if (!report.valid()) {
    std::string joined;
    for (const auto& v : report.violations) joined += (joined.empty() ? "" : "; ") + v;
    semantic_error(joined);
  }
  return model;
}

std::string emit_model(const ModelSpec& model) {
  json doc;
  doc["covariates"] = model.covariate_names;
  json nodes = json::array();
  for (const auto& node : model.nodes) {
    json n;
    n["name"] = node.name;
    n["categories"] = node.n_categories;
    n["latent"] = node.is_latent;
    n["link"] = std::string(to_string(node.link));
    json parents = json::array();
    for (int p : node.parents) parents.push_back(model.nodes[p].name);
    n["parents"] = parents;
    n["covariates"] = node.covariates;
    if (node.per_logit_covariates) n["covariate_slopes"] = "per_logit";
    if (node.design) {
      json rows = json::array();
      for (int r = 0; r < node.design->rows; ++r) {
        json row = json::array();
        for (int c = 0; c < node.design->cols; ++c) row.push_back(node.design->at(r, c));
        rows.push_back(row);
      }
      n["design"] = rows;
    }
    nodes.push_back(n);
  }
  doc["nodes"] = nodes;
  return doc.dump(2) + "\n";
}

ParamLayout::ParamLayout(const ModelSpec& model) : covariate_names_(model.covariate_names) {
  offsets_.push_back(0);
  for (std::size_t i = 0; i < model.size(); ++i) {
    const NodeSpec& node = model.nodes[i];
    const int n = static_cast<int>(i);
    const int logits = node.n_categories - 1;
    if (node.design) {
      for (int c = 0; c < node.design->cols; ++c) slots_.push_back({n, RegressorKind::design, c, 0});
    } else {
      for (int l = 1; l <= logits; ++l) slots_.push_back({n, RegressorKind::intercept, 0, l});
      for (int p : node.parents)
        for (int l = 1; l < model.nodes[p].n_categories; ++l)
          slots_.push_back({n, RegressorKind::parent, p, l});
    }
    for (const auto& cname : node.covariates) {
      const int cpos = static_cast<int>(
          std::find(model.covariate_names.begin(), model.covariate_names.end(), cname) -
          model.covariate_names.begin());
      if (node.per_logit_covariates) {
        for (int l = 1; l <= logits; ++l) slots_.push_back({n, RegressorKind::covariate, cpos, l});
      } else {
        slots_.push_back({n, RegressorKind::covariate, cpos, 0});
      }
    }
    offsets_.push_back(slots_.size());
    parents_.push_back(node.parents);
    per_logit_.push_back(node.per_logit_covariates);
  }
}

std::size_t ParamLayout::parent_slope(int node, int parent, int level) const {
  for (std::size_t k = offsets_[node]; k < offsets_[node + 1]; ++k) {
    const auto& s = slots_[k];
    if (s.kind == RegressorKind::parent && s.source == parent && s.level == level) return k;
  }
  throw ArgumentError("no slope for parent " + std::to_string(parent + 1) + " level " +
                      std::to_string(level) + " at node " + std::to_string(node + 1));
}

std::size_t ParamLayout::intercept(int node, int level) const {
  for (std::size_t k = offsets_[node]; k < offsets_[node + 1]; ++k) {
    const auto& s = slots_[k];
    if (s.kind == RegressorKind::intercept && s.level == level) return k;
  }
  throw ArgumentError("no intercept " + std::to_string(level) + " at node " + std::to_string(node + 1));
}

std::string ParamLayout::label(std::size_t flat) const {
  const ParamSlot& s = slots_.at(flat);
  const std::string i = std::to_string(s.node + 1);
  switch (s.kind) {
    case RegressorKind::intercept:
    case RegressorKind::parent: {
      const int j = s.kind == RegressorKind::intercept ? 0 : s.source + 1;
      std::string out = "β_{" + i;
      if (s.node + 1 >= 10) out += ".";
      out += std::to_string(j);
      if (j >= 10 || s.level >= 10) out += ".";
      return out + std::to_string(s.level) + "}";
    }
    case RegressorKind::covariate: {
      std::string out = "β_{" + i + ":" + covariate_names_[s.source];
      if (s.level > 0) out += ":" + std::to_string(s.level);
      return out + "}";
    }
    case RegressorKind::design:
      return "β_{" + i + ":d" + std::to_string(s.source + 1) + "}";
  }
  return {};
}

ParamLayout param_layout(const ModelSpec& model) { return ParamLayout(model); }

std::vector<int> family_of(const ModelSpec& model, int node) {
  std::vector<int> vars = model.nodes.at(node).parents;
  std::sort(vars.begin(), vars.end());
  vars.push_back(node);
  return vars;
}

ParamVector sample_parameters(const ModelSpec& model, std::uint64_t seed, double bound) {
  const ParamLayout layout(model);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-bound, bound);
  ParamVector beta(static_cast<Eigen::Index>(layout.size()));
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (std::size_t k = 0; k < layout.size(); ++k) {
      const auto& s = layout.slot(k);
      double v = unif(rng);
      if (s.kind == RegressorKind::intercept && s.level >= 2 &&
          model.nodes[s.node].link == LinkKind::global)
        v = -std::max(std::abs(v), 0.05 * bound);
      beta[static_cast<Eigen::Index>(k)] = v;
    }
    if (parameters_valid(model, beta)) return beta;
  }
  throw ArgumentError("could not draw valid parameters for this design");
}

}  // namespace dagmix
