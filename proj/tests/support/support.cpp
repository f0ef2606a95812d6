#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <stdexcept>

namespace testing {

dagmix::NodeSpec node(const std::string& name, int categories, LinkKind link, std::vector<int> parents, bool latent) {
  dagmix::NodeSpec n;
  n.name = name;
  n.n_categories = categories;
  n.link = link;
  n.parents = std::move(parents);
  n.is_latent = latent;
  return n;
}

ModelSpec lca_model(int indicators, int latent_levels) {
  ModelSpec m;
  m.nodes.push_back(node("U", latent_levels, LinkKind::adjacent, {}, true));
  for (int k = 1; k <= indicators; ++k) m.nodes.push_back(node("A" + std::to_string(k), 2, LinkKind::global, {0}));
  return m;
}

ParamVector lca_params(const ModelSpec& model, double latent_intercept, double intercept, double slope) {
  ParamVector b(1 + 2 * (static_cast<int>(model.size()) - 1));
  b[0] = latent_intercept;
  for (int k = 1; k < static_cast<int>(model.size()); ++k) {
    b[2 * k - 1] = intercept;
    b[2 * k] = slope;
  }
  return b;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

ModelSpec chain_model() {
  ModelSpec m;
  m.nodes = {node("X", 2, LinkKind::global), node("M", 2, LinkKind::global, {0}),
             node("Y", 2, LinkKind::global, {1})};
  return m;
}

ParamVector chain_params() {
  ParamVector b(5);
  b << 0.0, logit(0.2), logit(0.8) - logit(0.2), logit(0.3), logit(0.9) - logit(0.3);
  return b;
}

ModelSpec mediation_model() {
  ModelSpec m;
  m.nodes = {node("X", 2, LinkKind::global), node("M", 2, LinkKind::global, {0}),
             node("Y", 2, LinkKind::global, {0, 1})};
  return m;
}

ParamVector mediation_params() {
  ParamVector b(6);
  b << 0.0, logit(0.3), logit(0.6) - logit(0.3), logit(0.2), logit(0.6) - logit(0.2), logit(0.4) - logit(0.2);
  return b;
}

ModelSpec random_model(std::mt19937_64& rng, const RandomModelOptions& o) {
  std::uniform_int_distribution<int> n_nodes(o.min_nodes, o.max_nodes);
  std::uniform_int_distribution<int> cats(2, o.max_categories);
  std::uniform_int_distribution<std::size_t> link(0, o.links.size() - 1);
  std::bernoulli_distribution edge(o.edge_probability);
  ModelSpec m;
  const int n = n_nodes(rng);
  int latent_budget = std::min(o.max_latent, n - 1);
  for (int i = 0; i < n; ++i) {
    dagmix::NodeSpec s = node("Z" + std::to_string(i + 1), cats(rng), o.links[link(rng)]);
    for (int j = 0; j < i; ++j)
      if (edge(rng)) s.parents.push_back(j);
    if (latent_budget > 0 && i + 1 < n && std::bernoulli_distribution(0.5)(rng)) {
      s.is_latent = true;
      --latent_budget;
    }
    m.nodes.push_back(std::move(s));
  }
  // Latents get at least one observed child so the model is not trivially flat.
  for (int i = 0; i < n; ++i) {
    if (!m.nodes[i].is_latent) continue;
    bool has_child = false;
    for (int k = i + 1; k < n; ++k)
      if (std::find(m.nodes[k].parents.begin(), m.nodes[k].parents.end(), i) != m.nodes[k].parents.end())
        has_child = true;
    if (!has_child) {
      auto& last = m.nodes[n - 1];
      last.parents.push_back(i);
      std::sort(last.parents.begin(), last.parents.end());
    }
  }
  return m;
}

std::vector<double> oracle_logits(const ModelSpec& model, const ParamVector& beta, int i,
                                  const std::vector<int>& config) {
  // Block offset from the documented layout: (c_i - 1) intercepts, then
  // (c_j - 1) slopes per listed parent.
  std::size_t offset = 0;
  for (int k = 0; k < i; ++k) {
    offset += model.nodes[k].n_categories - 1;
    for (int p : model.nodes[k].parents) offset += model.nodes[p].n_categories - 1;
  }
  const auto& n = model.nodes[i];
  double shift = 0.0;
  std::size_t at = offset + n.n_categories - 1;
  for (int p : n.parents) {
    for (int l = 1; l < model.nodes[p].n_categories; ++l, ++at)
      if (config[p] >= l) shift += beta[static_cast<Eigen::Index>(at)];
  }
  std::vector<double> lam(n.n_categories - 1);
  double running = 0.0;
  for (int h = 0; h + 1 < n.n_categories; ++h) {
    running += beta[static_cast<Eigen::Index>(offset + h)];
    lam[h] = running + shift;
  }
  return lam;
}

std::vector<double> oracle_probs(LinkKind link, const std::vector<double>& lam) {
  const std::size_t c = lam.size() + 1;
  std::vector<double> p(c);
  switch (link) {
    case LinkKind::adjacent: {
      std::vector<double> e(c, 1.0);
      double s = 0.0;
      for (std::size_t h = 1; h < c; ++h) {
        s += lam[h - 1];
        e[h] = std::exp(s);
      }
      const double z = std::accumulate(e.begin(), e.end(), 0.0);
      for (std::size_t h = 0; h < c; ++h) p[h] = e[h] / z;
      break;
    }
    case LinkKind::global: {
      auto surv = [&](std::size_t h) { return h == 0 ? 1.0 : h >= c ? 0.0 : 1.0 / (1.0 + std::exp(-lam[h - 1])); };
      for (std::size_t h = 0; h < c; ++h) p[h] = surv(h) - surv(h + 1);
      break;
    }
    case LinkKind::continuation: {
      double reach = 1.0;
      for (std::size_t h = 0; h + 1 < c; ++h) {
        const double go_on = 1.0 / (1.0 + std::exp(-lam[h]));
        p[h] = reach * (1.0 - go_on);
        reach *= go_on;
      }
      p[c - 1] = reach;
      break;
    }
  }
  return p;
}

double oracle_conditional(const ModelSpec& model, const ParamVector& beta, int i, const std::vector<int>& config) {
  return oracle_probs(model.nodes[i].link, oracle_logits(model, beta, i, config))[config[i]];
}

std::vector<std::vector<int>> all_configs(const std::vector<int>& levels) {
  std::vector<std::vector<int>> out;
  std::vector<int> cell(levels.size(), 0);
  while (true) {
    out.push_back(cell);
    int k = static_cast<int>(levels.size()) - 1;
    while (k >= 0 && ++cell[k] == levels[k]) cell[k--] = 0;
    if (k < 0) break;
  }
  return out;
}

std::vector<double> oracle_joint(const ModelSpec& model, const ParamVector& beta) {
  std::vector<double> out;
  for (const auto& cfg : all_configs(model.levels())) {
    double p = 1.0;
    for (int i = 0; i < static_cast<int>(model.size()); ++i) p *= oracle_conditional(model, beta, i, cfg);
    out.push_back(p);
  }
  return out;
}

std::vector<double> oracle_intervene(const ModelSpec& model, const ParamVector& beta,
                                     const std::map<int, int>& assignments) {
  std::vector<int> free_levels;
  for (int i = 0; i < static_cast<int>(model.size()); ++i)
    if (!assignments.count(i)) free_levels.push_back(model.nodes[i].n_categories);
  std::vector<double> out;
  for (const auto& free : all_configs(free_levels)) {
    std::vector<int> cfg(model.size());
    std::size_t f = 0;
    for (int i = 0; i < static_cast<int>(model.size()); ++i) cfg[i] = assignments.count(i) ? assignments.at(i) : free[f++];
    double p = 1.0;
    for (int i = 0; i < static_cast<int>(model.size()); ++i)
      if (!assignments.count(i)) p *= oracle_conditional(model, beta, i, cfg);
    out.push_back(p);
  }
  return out;
}

double oracle_survival(const ModelSpec& model, const ParamVector& beta, const std::map<int, int>& assignments,
                       int outcome, int k) {
  std::vector<int> free_nodes;
  std::vector<int> free_levels;
  for (int i = 0; i < static_cast<int>(model.size()); ++i)
    if (!assignments.count(i)) {
      free_nodes.push_back(i);
      free_levels.push_back(model.nodes[i].n_categories);
    }
  const auto dist = oracle_intervene(model, beta, assignments);
  const auto configs = all_configs(free_levels);
  double s = 0.0;
  for (std::size_t r = 0; r < configs.size(); ++r) {
    std::vector<int> cfg(model.size());
    for (std::size_t f = 0; f < free_nodes.size(); ++f) cfg[free_nodes[f]] = configs[r][f];
    for (const auto& [n, v] : assignments) cfg[n] = v;
    if (cfg[outcome] >= k) s += dist[r];
  }
  return s;
}

namespace {

// d log P(Z = y) / d λ for one observation, closed forms per link.
std::vector<double> dlogp_dlam(LinkKind link, const std::vector<double>& lam, int y) {
  const int c = static_cast<int>(lam.size()) + 1;
  std::vector<double> g(c - 1, 0.0);
  auto ex = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  switch (link) {
    case LinkKind::adjacent: {
      const auto p = oracle_probs(link, lam);
      for (int k = 1; k < c; ++k) {
        double surv = 0.0;
        for (int h = k; h < c; ++h) surv += p[h];
        g[k - 1] = (y >= k ? 1.0 : 0.0) - surv;
      }
      break;
    }
    case LinkKind::global: {
      const double su = y == 0 ? 1.0 : ex(lam[y - 1]);
      const double sl = y + 1 >= c ? 0.0 : ex(lam[y]);
      const double py = su - sl;
      if (y >= 1) g[y - 1] = su * (1.0 - su) / py;
      if (y + 1 < c) g[y] = -sl * (1.0 - sl) / py;
      break;
    }
    case LinkKind::continuation: {
      for (int h = 1; h < c; ++h) {
        const double q = ex(lam[h - 1]);
        if (h <= y) g[h - 1] = 1.0 - q;
        if (h == y + 1) g[h - 1] = -q;
      }
      break;
    }
  }
  return g;
}

// Regressor matrix of a node at a configuration: row h-1 gives λ_h.
Eigen::MatrixXd oracle_design(const ModelSpec& model, int i, const std::vector<int>& cfg) {
  const auto& n = model.nodes[i];
  int width = n.n_categories - 1;
  for (int p : n.parents) width += model.nodes[p].n_categories - 1;
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n.n_categories - 1, width);
  for (int h = 0; h + 1 < n.n_categories; ++h) {
    for (int l = 0; l <= h; ++l) d(h, l) = 1.0;
    int at = n.n_categories - 1;
    for (int p : n.parents)
      for (int l = 1; l < model.nodes[p].n_categories; ++l, ++at) d(h, at) = cfg[p] >= l ? 1.0 : 0.0;
  }
  return d;
}

}  // namespace

Eigen::VectorXd oracle_node_ml(const ModelSpec& model, int i,
                               const std::vector<std::pair<std::vector<int>, double>>& rows) {
  const auto& n = model.nodes[i];
  const auto link = n.link;
  const Eigen::Index width = oracle_design(model, i, rows.front().first).cols();
  auto lam_of = [&](const Eigen::MatrixXd& d, const Eigen::VectorXd& b) {
    const Eigen::VectorXd v = d * b;
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  auto valid = [&](const std::vector<double>& lam) {
    if (link != LinkKind::global) return true;
    for (std::size_t h = 1; h < lam.size(); ++h)
      if (!(lam[h] < lam[h - 1])) return false;
    return true;
  };
  auto objective = [&](const Eigen::VectorXd& b, Eigen::VectorXd* grad) {
    double ll = 0.0;
    if (grad) grad->setZero(width);
    for (const auto& [cfg, w] : rows) {
      const Eigen::MatrixXd d = oracle_design(model, i, cfg);
      const auto lam = lam_of(d, b);
      if (!valid(lam)) return -std::numeric_limits<double>::infinity();
      ll += w * std::log(oracle_probs(link, lam)[cfg[i]]);
      if (grad) {
        const auto g = dlogp_dlam(link, lam, cfg[i]);
        *grad += w * d.transpose() * Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
      }
    }
    return ll;
  };

  // Start: uniform conditional probabilities, zero slopes.
  Eigen::VectorXd b = Eigen::VectorXd::Zero(width);
  if (link == LinkKind::global) {
    for (int h = 1; h < n.n_categories; ++h) {
      const double surv = 1.0 - static_cast<double>(h) / n.n_categories;
      const double prev = h == 1 ? 0.0 : logit(1.0 - static_cast<double>(h - 1) / n.n_categories);
      b[h - 1] = logit(surv) - prev;
    }
  } else if (link == LinkKind::continuation) {
    double prev = 0.0;
    for (int h = 1; h < n.n_categories; ++h) {
      const double lam = std::log(static_cast<double>(n.n_categories - h));
      b[h - 1] = lam - prev;
      prev = lam;
    }
  }

  Eigen::VectorXd grad(width), g2(width);
  double ll = objective(b, &grad);
  for (int iter = 0; iter < 200 && grad.lpNorm<Eigen::Infinity>() > 1e-11; ++iter) {
    // Hessian by central differences of the exact gradient.
    Eigen::MatrixXd hess(width, width);
    for (Eigen::Index k = 0; k < width; ++k) {
      const double h = 1e-5;
      Eigen::VectorXd up = b, dn = b;
      up[k] += h;
      dn[k] -= h;
      objective(up, &g2);
      Eigen::VectorXd gu = g2;
      objective(dn, &g2);
      hess.col(k) = (gu - g2) / (2.0 * h);
    }
    hess = 0.5 * (hess + hess.transpose());
    Eigen::VectorXd step = (-hess).ldlt().solve(grad);
    double t = 1.0;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      const Eigen::VectorXd trial = b + t * step;
      Eigen::VectorXd gt(width);
      const double llt = objective(trial, &gt);
      if (llt >= ll - 1e-12 * std::abs(ll)) {
        b = trial;
        ll = llt;
        grad = gt;
        break;
      }
    }
  }
  return b;
}

std::vector<double> oracle_observed(const ModelSpec& model, const ParamVector& beta) {
  const auto observed = model.observed_nodes();
  std::vector<int> obs_levels;
  for (int o : observed) obs_levels.push_back(model.nodes[o].n_categories);
  std::vector<std::size_t> strides(observed.size(), 1);
  for (int k = static_cast<int>(observed.size()) - 2; k >= 0; --k) strides[k] = strides[k + 1] * obs_levels[k + 1];
  std::size_t cells = 1;
  for (int l : obs_levels) cells *= l;
  std::vector<double> out(cells, 0.0);
  const auto joint = oracle_joint(model, beta);
  const auto configs = all_configs(model.levels());
  for (std::size_t r = 0; r < configs.size(); ++r) {
    std::size_t idx = 0;
    for (std::size_t k = 0; k < observed.size(); ++k) idx += strides[k] * configs[r][observed[k]];
    out[idx] += joint[r];
  }
  return out;
}

dagmix::Dataset oracle_sample(const ModelSpec& model, const ParamVector& beta, int n, std::uint64_t seed) {
  const auto p = oracle_observed(model, beta);
  std::vector<int> obs_levels;
  for (int o : model.observed_nodes()) obs_levels.push_back(model.nodes[o].n_categories);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> draw(p.begin(), p.end());
  std::vector<double> counts(p.size(), 0.0);
  for (int u = 0; u < n; ++u) counts[draw(rng)] += 1.0;
  dagmix::Dataset d = dagmix::make_dataset(model);
  const auto configs = all_configs(obs_levels);
  for (std::size_t j = 0; j < counts.size(); ++j)
    if (counts[j] > 0) d.records.push_back({configs[j], {}, counts[j]});
  return d;
}

}  // namespace testing
