#include "dagmix/causal.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <json.hpp>

#include "dagmix/links.hpp"

namespace dagmix {

namespace {

void check_beta(const ModelSpec& model, const ParamVector& beta) {
  if (static_cast<std::size_t>(beta.size()) != ParamLayout(model).size())
    throw ArgumentError("coefficient vector has wrong length for this model");
  if (!beta.allFinite()) throw ArgumentError("coefficients must be finite");
}

void check_covariates(const ModelSpec& model, std::span<const double> covariates) {
  if (!covariates.empty() && covariates.size() != model.covariate_names.size())
    throw ArgumentError("covariate vector has wrong length");
}

LexTable build_distribution(const ModelSpec& model, const ParamVector& beta, const std::map<int, int>& fixed,
                            std::span<const double> covariates) {
  const std::vector<std::pair<int, int>> pinned(fixed.begin(), fixed.end());
  LexTable acc({}, {}, {1.0});
  for (std::size_t i = 0; i < model.size(); ++i) {
    const int node = static_cast<int>(i);
    if (fixed.count(node)) continue;
    const LexTable factor = slice(node_cpt(model, beta, node, covariates), pinned);
    std::vector<int> vars = acc.vars(), levels = acc.levels();
    vars.push_back(node);
    levels.push_back(model.nodes[i].n_categories);
    acc = expand(acc, vars, levels);
    multiply_into(acc, factor);
  }
  return acc;
}

std::vector<double> survival(const LexTable& distribution, int outcome, const std::vector<int>& thresholds) {
  const LexTable margin = marginalize(distribution, std::vector<int>{outcome});
  std::vector<double> out;
  for (int k : thresholds) {
    double s = 0.0;
    for (std::size_t y = static_cast<std::size_t>(k); y < margin.size(); ++y) s += margin[y];
    out.push_back(s);
  }
  return out;
}

void check_query(const ModelSpec& model, const EffectQuery& q) {
  const auto n = static_cast<int>(model.size());
  if (q.outcome < 0 || q.outcome >= n) throw ArgumentError("unknown outcome node");
  if (q.treatment.empty()) throw ArgumentError("query has no treatment nodes");
  auto keys = [](const std::map<int, int>& m) {
    std::set<int> k;
    for (const auto& [node, level] : m) k.insert(node);
    return k;
  };
  if (keys(q.treatment) != keys(q.reference)) throw ArgumentError("x1 and x0 must assign the same nodes");
  for (const auto* assignment : {&q.treatment, &q.reference})
    for (const auto& [node, level] : *assignment) {
      if (node < 0 || node >= n) throw ArgumentError("unknown treatment node");
      if (level < 0 || level >= model.nodes[node].n_categories)
        throw ArgumentError("level " + std::to_string(level) + " out of range for '" + model.nodes[node].name + "'");
    }
  if (q.treatment.count(q.outcome)) throw ArgumentError("outcome cannot be a treatment node");
  std::set<int> seen;
  for (int m : q.mediators) {
    if (m < 0 || m >= n) throw ArgumentError("unknown mediator node");
    if (m == q.outcome || q.treatment.count(m)) throw ArgumentError("mediators must be disjoint from treatment and outcome");
    if (!seen.insert(m).second) throw ArgumentError("mediator listed twice");
  }
  if (q.thresholds.empty()) throw ArgumentError("query has no thresholds");
  for (int k : q.thresholds)
    if (k < 1 || k >= model.nodes[q.outcome].n_categories) throw ArgumentError("threshold out of range for the outcome");
  check_covariates(model, q.covariates);
}

std::vector<double> ratios(const std::vector<double>& num, const std::vector<double>& den) {
  std::vector<double> out(num.size());
  for (std::size_t k = 0; k < num.size(); ++k) {
    if (den[k] < 1e-300) throw NumericalError("reference survival probability is zero");
    out[k] = num[k] / den[k];
  }
  return out;
}

}  // namespace

LexTable node_cpt(const ModelSpec& model, const ParamVector& beta, int node, std::span<const double> covariates) {
  check_beta(model, beta);
  check_covariates(model, covariates);
  const NodeSpec& spec = model.nodes.at(node);
  const ParamLayout layout(model);
  const auto vars = family_of(model, node);
  std::vector<int> levels;
  for (int v : vars) levels.push_back(model.nodes[v].n_categories);
  const std::vector<int> parent_levels(levels.begin(), levels.end() - 1);
  std::vector<int> list_position;
  for (std::size_t k = 0; k + 1 < vars.size(); ++k)
    list_position.push_back(static_cast<int>(std::find(spec.parents.begin(), spec.parents.end(), vars[k]) -
                                             spec.parents.begin()));
  const auto block = beta.segment(static_cast<Eigen::Index>(layout.offset(node)),
                                  static_cast<Eigen::Index>(layout.block_size(node)));
  const int c = spec.n_categories;
  const std::size_t rows = cell_count(parent_levels);
  std::vector<double> values(rows * static_cast<std::size_t>(c));
  std::vector<int> config(parent_levels.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto sorted = lex_decode(parent_levels, r);
    for (std::size_t k = 0; k < sorted.size(); ++k) config[list_position[k]] = sorted[k];
    const Eigen::VectorXd p = logits_to_probs(spec.link, linear_predictor(model, node, config, covariates, block));
    for (int z = 0; z < c; ++z) values[r * c + z] = p[z];
  }
  return LexTable(vars, levels, std::move(values));
}

LexTable joint_distribution(const ModelSpec& model, const ParamVector& beta, std::span<const double> covariates) {
  return build_distribution(model, beta, {}, covariates);
}

LexTable intervene(const ModelSpec& model, const ParamVector& beta, const Intervention& iv,
                   std::span<const double> covariates) {
  for (const auto& [node, level] : iv.assignments) {
    if (node < 0 || static_cast<std::size_t>(node) >= model.size()) throw ArgumentError("intervention on unknown node");
    if (level < 0 || level >= model.nodes[node].n_categories)
      throw ArgumentError("intervention level out of range for '" + model.nodes[node].name + "'");
  }
  return build_distribution(model, beta, iv.assignments, covariates);
}

std::vector<double> causal_effect(const ModelSpec& model, const ParamVector& beta, const EffectQuery& q) {
  check_query(model, q);
  const auto treated = survival(intervene(model, beta, {q.treatment}, q.covariates), q.outcome, q.thresholds);
  const auto reference = survival(intervene(model, beta, {q.reference}, q.covariates), q.outcome, q.thresholds);
  return ratios(treated, reference);
}

std::vector<double> natural_direct_effect(const ModelSpec& model, const ParamVector& beta, const EffectQuery& q) {
  check_query(model, q);
  if (q.mediators.empty()) throw ArgumentError("natural direct effect needs at least one mediator");
  std::vector<int> mediators = q.mediators;
  std::sort(mediators.begin(), mediators.end());

  const LexTable weights = marginalize(intervene(model, beta, {q.reference}, q.covariates), mediators);
  std::vector<double> num(q.thresholds.size(), 0.0), den(q.thresholds.size(), 0.0);
  for (std::size_t m = 0; m < weights.size(); ++m) {
    const auto config = lex_decode(weights.levels(), m);
    Intervention treated{q.treatment}, reference{q.reference};
    for (std::size_t k = 0; k < mediators.size(); ++k) {
      treated.assignments[mediators[k]] = config[k];
      reference.assignments[mediators[k]] = config[k];
    }
    const auto s1 = survival(intervene(model, beta, treated, q.covariates), q.outcome, q.thresholds);
    const auto s0 = survival(intervene(model, beta, reference, q.covariates), q.outcome, q.thresholds);
    for (std::size_t k = 0; k < q.thresholds.size(); ++k) {
      num[k] += weights[m] * s1[k];
      den[k] += weights[m] * s0[k];
    }
  }
  return ratios(num, den);
}

std::vector<double> evaluate_effect(const ModelSpec& model, const ParamVector& beta, const EffectQuery& q) {
  return q.mediators.empty() ? causal_effect(model, beta, q) : natural_direct_effect(model, beta, q);
}

Sample sample_data(const ModelSpec& model, const ParamVector& beta, std::size_t n, std::uint64_t seed,
                   const std::vector<std::vector<double>>& covariate_rows, bool keep_latent) {
  check_beta(model, beta);
  if (n == 0) throw ArgumentError("sample size must be at least 1");
  const bool has_covariates = !model.covariate_names.empty();
  if (has_covariates && covariate_rows.empty()) throw ArgumentError("model has covariates; supply covariate rows");
  if (covariate_rows.size() > 1 && covariate_rows.size() != n)
    throw ArgumentError("covariate rows must number one or n");
  for (const auto& row : covariate_rows)
    if (row.size() != model.covariate_names.size()) throw ArgumentError("covariate row has wrong length");

  const std::vector<double> no_covariates;
  const auto& first_row = covariate_rows.empty() ? no_covariates : covariate_rows.front();
  const bool varying = covariate_rows.size() > 1;

  // Tables for nodes whose conditionals do not change across draws.
  std::vector<LexTable> fixed_cpts(model.size());
  std::vector<std::vector<std::size_t>> strides(model.size());
  std::vector<std::vector<int>> families(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) {
    const int node = static_cast<int>(i);
    if (!varying || model.nodes[i].covariates.empty()) fixed_cpts[i] = node_cpt(model, beta, node, first_row);
    families[i] = family_of(model, node);
    std::vector<int> levels;
    for (int v : families[i]) levels.push_back(model.nodes[v].n_categories);
    strides[i] = lex_strides(levels);
  }
  const ParamLayout layout(model);

  Sample out;
  out.data = make_dataset(model);
  out.data.records.reserve(n);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<int> z(model.size());
  std::vector<double> probs;
  for (std::size_t u = 0; u < n; ++u) {
    const auto& cov = varying ? covariate_rows[u] : first_row;
    for (std::size_t i = 0; i < model.size(); ++i) {
      const NodeSpec& spec = model.nodes[i];
      const int c = spec.n_categories;
      probs.assign(c, 0.0);
      if (fixed_cpts[i].size() > 0) {
        const auto& vars = families[i];
        std::size_t base = 0;
        for (std::size_t k = 0; k + 1 < vars.size(); ++k) base += strides[i][k] * z[vars[k]];
        for (int h = 0; h < c; ++h) probs[h] = fixed_cpts[i][base + h];
      } else {
        std::vector<int> config;
        for (int p : spec.parents) config.push_back(z[p]);
        const auto block = beta.segment(static_cast<Eigen::Index>(layout.offset(static_cast<int>(i))),
                                        static_cast<Eigen::Index>(layout.block_size(static_cast<int>(i))));
        const Eigen::VectorXd p = logits_to_probs(spec.link, linear_predictor(model, static_cast<int>(i), config, cov, block));
        for (int h = 0; h < c; ++h) probs[h] = p[h];
      }
      const double draw = unif(rng);
      double cum = 0.0;
      int pick = c - 1;
      for (int h = 0; h < c - 1; ++h) {
        cum += probs[h];
        if (draw < cum) {
          pick = h;
          break;
        }
      }
      z[i] = pick;
    }
    Record r;
    for (int o : out.data.observed_nodes) r.categories.push_back(z[o]);
    r.covariates = has_covariates ? cov : std::vector<double>{};
    out.data.records.push_back(std::move(r));
    if (keep_latent) {
      std::vector<int> latent;
      for (int l : model.latent_nodes()) latent.push_back(z[l]);
      out.latent.push_back(std::move(latent));
    }
  }
  return out;
}

namespace {

std::vector<EffectQuery> parse_queries(const ModelSpec& model, std::string_view json_text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("malformed query document: ") + e.what());
  }
  std::vector<json> items;
  if (doc.is_object() && doc.contains("queries")) {
    if (!doc.at("queries").is_array()) throw ArgumentError("'queries' must be an array");
    for (const auto& q : doc.at("queries")) items.push_back(q);
  } else {
    items.push_back(doc);
  }

  auto node_of = [&](const std::string& name) {
    const auto idx = model.find(name);
    if (!idx) throw ArgumentError("query references unknown node '" + name + "'");
    return *idx;
  };
  auto assignment = [&](const json& obj, const char* what) {
    if (!obj.is_object()) throw ArgumentError(std::string("treatment '") + what + "' must map node names to levels");
    std::map<int, int> out;
    for (const auto& [name, level] : obj.items()) {
      if (!level.is_number_integer()) throw ArgumentError("treatment level for '" + name + "' must be an integer");
      out[node_of(name)] = level.get<int>();
    }
    return out;
  };

  std::vector<EffectQuery> queries;
  for (const json& item : items) {
    if (!item.is_object() || !item.contains("outcome") || !item.contains("treatment"))
      throw ArgumentError("each query needs 'outcome' and 'treatment'");
    EffectQuery q;
    q.outcome = node_of(item.at("outcome").get<std::string>());
    const json& t = item.at("treatment");
    if (!t.is_object() || !t.contains("x0") || !t.contains("x1"))
      throw ArgumentError("'treatment' needs 'x0' and 'x1' assignments");
    q.reference = assignment(t.at("x0"), "x0");
    q.treatment = assignment(t.at("x1"), "x1");
    if (item.contains("mediators"))
      for (const auto& m : item.at("mediators")) q.mediators.push_back(node_of(m.get<std::string>()));
    if (item.contains("thresholds")) {
      for (const auto& k : item.at("thresholds")) q.thresholds.push_back(k.get<int>());
    } else {
      for (int k = 1; k < model.nodes[q.outcome].n_categories; ++k) q.thresholds.push_back(k);
    }
    if (!model.covariate_names.empty()) {
      q.covariates.assign(model.covariate_names.size(), 0.0);
      if (!item.contains("covariates")) throw ArgumentError("model has covariates; the query must give their values");
      for (std::size_t c = 0; c < model.covariate_names.size(); ++c) {
        const auto& name = model.covariate_names[c];
        if (!item.at("covariates").contains(name)) throw ArgumentError("query lacks covariate '" + name + "'");
        q.covariates[c] = item.at("covariates").at(name).get<double>();
      }
    }
    if (item.contains("label")) {
      q.label = item.at("label").get<std::string>();
    } else {
      for (const auto& [node, level] : q.treatment) {
        if (!q.label.empty()) q.label += ", ";
        q.label += model.nodes[node].name + " " + std::to_string(q.reference.at(node)) + "->" + std::to_string(level);
      }
    }
    check_query(model, q);
    queries.push_back(std::move(q));
  }
  return queries;
}

}  // namespace

std::vector<EffectQuery> parse_effect_queries(const ModelSpec& model, std::string_view json_text) {
  try {
    return parse_queries(model, json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("malformed query document: ") + e.what());
  }
}

}  // namespace dagmix
