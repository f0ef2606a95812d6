#include "dagmix/serialize.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "dagmix/error.hpp"

namespace dagmix {

using nlohmann::json;

namespace {

std::string fixed(double x, int digits) {
  if (!std::isfinite(x)) return std::isnan(x) ? "nan" : (x > 0 ? "inf" : "-inf");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

// Shortest text that parses back to the same double.
std::string number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string pad(std::string s, std::size_t width, bool left = true) {
  if (s.size() >= width) return s;
  return left ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

// Display width of UTF-8 text (code points, not bytes).
std::size_t width_of(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++n;
  return n;
}

std::string pad_utf8(const std::string& s, std::size_t width) {
  const std::size_t w = width_of(s);
  return w >= width ? s : s + std::string(width - w, ' ');
}

json nullable(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string parents_list(const ModelSpec& model, const NodeSpec& node) {
  std::string out;
  for (int p : node.parents) {
    if (!out.empty()) out += ", ";
    out += model.nodes[p].name;
  }
  return out;
}

}  // namespace

std::string fit_result_to_json(const ModelSpec& model, const FitResult& result) {
  const ParamLayout layout(model);
  json estimates = json::array();
  for (std::size_t k = 0; k < layout.size(); ++k) {
    json e{{"label", layout.label(k)},
           {"node", model.nodes[layout.slot(k).node].name},
           {"estimate", result.beta[static_cast<Eigen::Index>(k)]}};
    e["se"] = result.se.size() == result.beta.size() ? nullable(result.se[static_cast<Eigen::Index>(k)]) : json(nullptr);
    estimates.push_back(std::move(e));
  }
  json restarts = json::array();
  for (const auto& r : result.restarts)
    restarts.push_back({{"seed", r.seed},
                        {"loglik", nullable(r.loglik)},
                        {"iterations", r.iterations},
                        {"converged", r.converged}});
  json doc{{"estimates", std::move(estimates)},
           {"beta", std::vector<double>(result.beta.data(), result.beta.data() + result.beta.size())},
           {"loglik", result.loglik},
           {"trace", result.trace},
           {"iterations", result.iterations},
           {"converged", result.converged},
           {"n_params", result.n_params},
           {"n_obs", result.n_obs},
           {"aic", result.aic},
           {"bic", result.bic},
           {"best_restart", result.best_restart},
           {"restarts", std::move(restarts)},
           {"diagnostics", result.diagnostics}};
  return doc.dump(2) + "\n";
}

std::string fit_result_to_csv(const ModelSpec& model, const FitResult& result) {
  const ParamLayout layout(model);
  std::ostringstream out;
  out << "label,node,estimate,se\n";
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out << layout.label(k) << ',' << model.nodes[layout.slot(k).node].name << ',' << number(result.beta[i]) << ',';
    if (result.se.size() == result.beta.size()) out << number(result.se[i]);
    out << '\n';
  }
  return out.str();
}

std::string fit_result_to_text(const ModelSpec& model, const FitResult& result) {
  const ParamLayout layout(model);
  std::size_t label_width = 9;
  for (std::size_t k = 0; k < layout.size(); ++k) label_width = std::max(label_width, width_of(layout.label(k)) + 2);
  std::ostringstream out;
  out << pad_utf8("parameter", label_width) << pad("estimate", 12, false) << pad("s.e.", 12, false) << '\n';
  for (std::size_t k = 0; k < layout.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    out << pad_utf8(layout.label(k), label_width) << pad(fixed(result.beta[i], 4), 12, false);
    out << pad(result.se.size() == result.beta.size() ? fixed(result.se[i], 4) : "-", 12, false) << '\n';
  }
  out << '\n';
  out << "log-likelihood  " << fixed(result.loglik, 4) << '\n';
  out << "parameters      " << result.n_params << '\n';
  out << "observations    " << fixed(result.n_obs, 0) << '\n';
  out << "AIC             " << fixed(result.aic, 4) << '\n';
  out << "BIC             " << fixed(result.bic, 4) << '\n';
  out << "iterations      " << result.iterations << (result.converged ? "" : " (not converged)") << '\n';
  if (!result.restarts.empty()) {
    out << "\nrestart  loglik          iterations  converged\n";
    for (std::size_t r = 0; r < result.restarts.size(); ++r) {
      const auto& rec = result.restarts[r];
      out << pad(std::to_string(r) + (r == result.best_restart ? "*" : ""), 9) << pad(fixed(rec.loglik, 4), 16)
          << pad(std::to_string(rec.iterations), 12) << (rec.converged ? "yes" : "no") << '\n';
    }
  }
  for (const auto& d : result.diagnostics) out << "note: " << d << '\n';
  return out.str();
}

ParamVector parameters_from_json(const ModelSpec& model, std::string_view json_text) {
  const ParamLayout layout(model);
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ArgumentError(std::string("malformed parameter document: ") + e.what());
  }
  ParamVector beta(static_cast<Eigen::Index>(layout.size()));
  try {
    if (doc.is_object() && doc.contains("beta")) {
      const auto values = doc.at("beta").get<std::vector<double>>();
      if (values.size() != layout.size())
        throw ArgumentError("parameter document has " + std::to_string(values.size()) + " values, model needs " +
                            std::to_string(layout.size()));
      for (std::size_t k = 0; k < values.size(); ++k) beta[static_cast<Eigen::Index>(k)] = values[k];
      return beta;
    }
    if (doc.is_object() && doc.contains("estimates")) {
      const auto& est = doc.at("estimates");
      if (!est.is_array() || est.size() != layout.size())
        throw ArgumentError("parameter document has the wrong number of estimates");
      for (std::size_t k = 0; k < layout.size(); ++k) {
        const auto& e = est.at(k);
        if (e.contains("label") && e.at("label").get<std::string>() != layout.label(k))
          throw ArgumentError("estimate " + std::to_string(k) + " is labelled '" + e.at("label").get<std::string>() +
                              "', expected '" + layout.label(k) + "'");
        beta[static_cast<Eigen::Index>(k)] = e.at("estimate").get<double>();
      }
      return beta;
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("malformed parameter document: ") + e.what());
  }
  throw ArgumentError("parameter document needs 'beta' or 'estimates'");
}

std::string parameters_to_json(const ModelSpec& model, const ParamVector& beta) {
  const ParamLayout layout(model);
  json labels = json::array();
  for (std::size_t k = 0; k < layout.size(); ++k) labels.push_back(layout.label(k));
  json doc{{"labels", labels}, {"beta", std::vector<double>(beta.data(), beta.data() + beta.size())}};
  return doc.dump(2) + "\n";
}

std::string identifiability_to_json(const IdentifiabilityReport& report) {
  json points = json::array();
  for (const auto& p : report.points)
    points.push_back({{"sigma_min", p.sigma_min}, {"sigma_max", p.sigma_max}, {"rank", p.rank}, {"pass", p.pass}});
  json doc{{"identified", report.identified},
           {"n_points", report.n_points},
           {"seed", report.seed},
           {"n_params", report.n_params},
           {"observed_df", report.observed_df},
           {"tolerance", report.tolerance},
           {"points", std::move(points)}};
  return doc.dump(2) + "\n";
}

std::string identifiability_to_text(const IdentifiabilityReport& report) {
  std::ostringstream out;
  out << (report.identified ? "locally identified" : "NOT locally identified") << " at " << report.n_points
      << " random points\n";
  out << "parameters " << report.n_params << ", observed degrees of freedom " << report.observed_df << '\n';
  out << "point  rank  sigma_min      sigma_max      pass\n";
  for (std::size_t t = 0; t < report.points.size(); ++t) {
    const auto& p = report.points[t];
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-6zu %-5d %-14.6e %-14.6e %s\n", t, p.rank, p.sigma_min, p.sigma_max,
                  p.pass ? "yes" : "no");
    out << buf;
  }
  return out.str();
}

std::string effects_to_json(const ModelSpec& model, const std::vector<EffectQuery>& queries,
                            const std::vector<EffectRow>& rows) {
  json items = json::array();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    json item{{"label", rows[r].label}};
    if (r < queries.size()) {
      const auto& q = queries[r];
      item["outcome"] = model.nodes[q.outcome].name;
      json x0 = json::object(), x1 = json::object();
      for (const auto& [node, level] : q.reference) x0[model.nodes[node].name] = level;
      for (const auto& [node, level] : q.treatment) x1[model.nodes[node].name] = level;
      item["treatment"] = {{"x0", x0}, {"x1", x1}};
      json mediators = json::array();
      for (int m : q.mediators) mediators.push_back(model.nodes[m].name);
      item["mediators"] = mediators;
      item["kind"] = q.mediators.empty() ? "total" : "natural_direct";
    }
    json ratios = json::array();
    for (std::size_t t = 0; t < rows[r].thresholds.size(); ++t)
      ratios.push_back({{"threshold", rows[r].thresholds[t]}, {"ratio", nullable(rows[r].ratios[t])}});
    item["ratios"] = ratios;
    items.push_back(std::move(item));
  }
  return json{{"effects", items}}.dump(2) + "\n";
}

std::string effects_to_text(const ModelSpec& model, const std::vector<EffectQuery>& queries,
                            const std::vector<EffectRow>& rows) {
  std::vector<int> thresholds;
  for (const auto& row : rows)
    for (int k : row.thresholds)
      if (std::find(thresholds.begin(), thresholds.end(), k) == thresholds.end()) thresholds.push_back(k);
  std::sort(thresholds.begin(), thresholds.end());

  std::string outcome;
  if (!queries.empty()) outcome = model.nodes[queries.front().outcome].name;
  std::size_t label_width = 10;
  for (const auto& row : rows) label_width = std::max(label_width, width_of(row.label) + 2);

  std::ostringstream out;
  out << pad_utf8("transition", label_width);
  for (int k : thresholds) out << pad(outcome + ">" + std::to_string(k - 1), 10, false);
  out << '\n';
  for (const auto& row : rows) {
    out << pad_utf8(row.label, label_width);
    for (int k : thresholds) {
      const auto it = std::find(row.thresholds.begin(), row.thresholds.end(), k);
      out << pad(it == row.thresholds.end() ? "" : fixed(row.ratios[it - row.thresholds.begin()], 4), 10, false);
    }
    out << '\n';
  }
  return out.str();
}

std::string effects_to_csv(const std::vector<EffectRow>& rows) {
  std::ostringstream out;
  out << "label,threshold,ratio\n";
  for (const auto& row : rows) {
    std::string label = row.label;
    if (label.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : label) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      label = quoted + "\"";
    }
    for (std::size_t t = 0; t < row.thresholds.size(); ++t)
      out << label << ',' << row.thresholds[t] << ',' << number(row.ratios[t]) << '\n';
  }
  return out.str();
}

std::string describe_text(const ModelSpec& model) {
  std::size_t name_width = 6;
  for (const auto& n : model.nodes) name_width = std::max(name_width, width_of(n.name) + 2);
  std::ostringstream out;
  out << pad("i", 4) << pad_utf8("Z_i", name_width) << pad("n.cat.", 8) << pad("logit", 7) << "pa_i\n";
  for (std::size_t i = 0; i < model.nodes.size(); ++i) {
    const auto& n = model.nodes[i];
    std::string parents = parents_list(model, n);
    if (!n.covariates.empty()) {
      for (const auto& c : n.covariates) parents += (parents.empty() ? "" : ", ") + c;
    }
    out << pad(std::to_string(i + 1), 4) << pad_utf8(n.name, name_width) << pad(std::to_string(n.n_categories), 8)
        << pad(std::string(1, to_string(n.link).front()), 7) << (parents.empty() ? "-" : parents) << '\n';
  }
  const auto latent = model.latent_nodes();
  out << '\n';
  if (latent.empty()) {
    out << "latent: none\n";
  } else {
    out << "latent:";
    for (int l : latent) out << ' ' << model.nodes[l].name;
    out << '\n';
  }
  const auto report = validate(model);
  out << "parameters: " << report.total_params << ", observed cells: " << report.observed_cells << '\n';
  return out.str();
}

std::string describe_json(const ModelSpec& model) {
  const auto report = validate(model);
  json nodes = json::array();
  for (std::size_t i = 0; i < model.nodes.size(); ++i) {
    const auto& n = model.nodes[i];
    json parents = json::array();
    for (int p : n.parents) parents.push_back(model.nodes[p].name);
    json node{{"index", i + 1},
              {"name", n.name},
              {"categories", n.n_categories},
              {"latent", n.is_latent},
              {"link", std::string(to_string(n.link))},
              {"parents", parents},
              {"covariates", n.covariates}};
    if (i < report.node_param_counts.size()) node["n_params"] = report.node_param_counts[i];
    nodes.push_back(std::move(node));
  }
  json doc{{"nodes", nodes},
           {"n_params", report.total_params},
           {"observed_cells", report.observed_cells},
           {"observed_df", report.observed_df},
           {"violations", report.violations}};
  return doc.dump(2) + "\n";
}

}  // namespace dagmix
