#include "dagmix/links.hpp"

#include <algorithm>
#include <cmath>

#include "dagmix/table.hpp"

namespace dagmix {

double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

// Lexicographic index of a parent configuration over the node's parent list.
std::size_t parent_row(const ModelSpec& model, const NodeSpec& node, std::span<const int> parent_config) {
  std::size_t row = 0;
  for (std::size_t k = 0; k < node.parents.size(); ++k) {
    const int levels = model.nodes[node.parents[k]].n_categories;
    if (parent_config[k] < 0 || parent_config[k] >= levels)
      throw ArgumentError("node '" + node.name + "': parent configuration out of range");
    row = row * static_cast<std::size_t>(levels) + static_cast<std::size_t>(parent_config[k]);
  }
  return row;
}

void check_inputs(const ModelSpec& model, const NodeSpec& node, std::span<const int> parent_config,
                  std::span<const double> covariates) {
  if (parent_config.size() != node.parents.size())
    throw ArgumentError("node '" + node.name + "': expected " + std::to_string(node.parents.size()) +
                        " parent values, got " + std::to_string(parent_config.size()));
  if (!covariates.empty() && covariates.size() != model.covariate_names.size())
    throw ArgumentError("node '" + node.name + "': covariate vector has wrong length");
}

double covariate_value(std::span<const double> covariates, int position) {
  return covariates.empty() ? 0.0 : covariates[position];
}

}  // namespace

Eigen::MatrixXd design_block(const ModelSpec& model, int node_index, std::span<const int> parent_config,
                             std::span<const double> covariates) {
  const NodeSpec& node = model.nodes.at(node_index);
  check_inputs(model, node, parent_config, covariates);
  const int logits = node.n_categories - 1;
  const std::size_t row = parent_row(model, node, parent_config);

  Eigen::Index width = 0;
  if (node.design) {
    width = node.design->cols;
  } else {
    width = logits;
    for (int p : node.parents) width += model.nodes[p].n_categories - 1;
  }
  const Eigen::Index n_cov = static_cast<Eigen::Index>(node.covariates.size());
  width += node.per_logit_covariates ? n_cov * logits : n_cov;

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(logits, width);
  Eigen::Index col = 0;
  if (node.design) {
    for (int h = 0; h < logits; ++h)
      for (int c = 0; c < node.design->cols; ++c)
        x(h, c) = node.design->at(static_cast<int>(row) * logits + h, c);
    col = node.design->cols;
  } else {
    for (int l = 1; l <= logits; ++l, ++col)
      for (int h = l; h <= logits; ++h) x(h - 1, col) = 1.0;
    for (std::size_t k = 0; k < node.parents.size(); ++k) {
      const int levels = model.nodes[node.parents[k]].n_categories;
      for (int l = 1; l < levels; ++l, ++col)
        if (parent_config[k] >= l) x.col(col).setOnes();
    }
  }
  for (const auto& cname : node.covariates) {
    const int cpos = static_cast<int>(std::find(model.covariate_names.begin(), model.covariate_names.end(), cname) -
                                      model.covariate_names.begin());
    const double v = covariate_value(covariates, cpos);
    if (node.per_logit_covariates) {
      for (int h = 0; h < logits; ++h, ++col) x(h, col) = v;
    } else {
      x.col(col).setConstant(v);
      ++col;
    }
  }
  return x;
}

Eigen::VectorXd linear_predictor(const ModelSpec& model, int node_index, std::span<const int> parent_config,
                                 std::span<const double> covariates,
                                 const Eigen::Ref<const Eigen::VectorXd>& beta) {
  const NodeSpec& node = model.nodes.at(node_index);
  check_inputs(model, node, parent_config, covariates);
  if (node.design || node.per_logit_covariates) {
    const Eigen::MatrixXd x = design_block(model, node_index, parent_config, covariates);
    if (x.cols() != beta.size())
      throw ArgumentError("node '" + node.name + "': coefficient block has wrong length");
    return x * beta;
  }

  const int logits = node.n_categories - 1;
  Eigen::Index expected = logits + static_cast<Eigen::Index>(node.covariates.size());
  for (int p : node.parents) expected += model.nodes[p].n_categories - 1;
  if (beta.size() != expected) throw ArgumentError("node '" + node.name + "': coefficient block has wrong length");

  Eigen::Index col = logits;
  double shared = 0.0;
  for (std::size_t k = 0; k < node.parents.size(); ++k) {
    const int levels = model.nodes[node.parents[k]].n_categories;
    if (parent_config[k] < 0 || parent_config[k] >= levels)
      throw ArgumentError("node '" + node.name + "': parent configuration out of range");
    for (int l = 1; l < levels; ++l, ++col)
      if (parent_config[k] >= l) shared += beta[col];
  }
  for (const auto& cname : node.covariates) {
    const int cpos = static_cast<int>(std::find(model.covariate_names.begin(), model.covariate_names.end(), cname) -
                                      model.covariate_names.begin());
    shared += beta[col++] * covariate_value(covariates, cpos);
  }
  Eigen::VectorXd lam(logits);
  double intercept = 0.0;
  for (int h = 0; h < logits; ++h) {
    intercept += beta[h];
    lam[h] = intercept + shared;
  }
  return lam;
}

Eigen::VectorXd logits_to_probs(LinkKind link, const Eigen::Ref<const Eigen::VectorXd>& lam) {
  const Eigen::Index m = lam.size();  // c - 1
  Eigen::VectorXd p(m + 1);
  switch (link) {
    case LinkKind::adjacent: {
      Eigen::VectorXd s(m + 1);
      s[0] = 0.0;
      for (Eigen::Index h = 1; h <= m; ++h) s[h] = s[h - 1] + lam[h - 1];
      const double top = s.maxCoeff();
      for (Eigen::Index h = 0; h <= m; ++h) p[h] = std::exp(s[h] - top);
      p /= p.sum();
      break;
    }
    case LinkKind::global: {
      for (Eigen::Index h = 1; h < m; ++h)
        if (!(lam[h] < lam[h - 1])) throw NumericalError("invalid cumulative logits");
      p[0] = expit(-lam[0]);
      for (Eigen::Index h = 1; h < m; ++h)
        p[h] = expit(lam[h - 1]) * expit(-lam[h]) * -std::expm1(lam[h] - lam[h - 1]);
      p[m] = expit(lam[m - 1]);
      break;
    }
    case LinkKind::continuation: {
      double reach = 1.0;  // P(Z >= h)
      for (Eigen::Index h = 0; h < m; ++h) {
        p[h] = reach * expit(-lam[h]);
        reach *= expit(lam[h]);
      }
      p[m] = reach;
      break;
    }
  }
  return p;
}

Eigen::VectorXd probs_to_logits(LinkKind link, const Eigen::Ref<const Eigen::VectorXd>& p) {
  const Eigen::Index c = p.size();
  if (c < 2) throw ArgumentError("probability vector needs at least two categories");
  for (Eigen::Index h = 0; h < c; ++h)
    if (!(p[h] > 0.0) || !std::isfinite(p[h])) throw ArgumentError("probabilities must be strictly positive");
  Eigen::VectorXd lam(c - 1);
  // upper[h] = P(Z >= h), lower[h] = P(Z < h), each summed directly.
  Eigen::VectorXd upper(c + 1), lower(c + 1);
  upper[c] = 0.0;
  for (Eigen::Index h = c; h-- > 0;) upper[h] = upper[h + 1] + p[h];
  lower[0] = 0.0;
  for (Eigen::Index h = 1; h <= c; ++h) lower[h] = lower[h - 1] + p[h - 1];
  for (Eigen::Index h = 1; h < c; ++h) {
    switch (link) {
      case LinkKind::adjacent: lam[h - 1] = std::log(p[h]) - std::log(p[h - 1]); break;
      case LinkKind::global: lam[h - 1] = std::log(upper[h]) - std::log(lower[h]); break;
      case LinkKind::continuation: lam[h - 1] = std::log(upper[h]) - std::log(p[h - 1]); break;
    }
  }
  return lam;
}

Eigen::MatrixXd dprobs_dlogits(LinkKind link, const Eigen::Ref<const Eigen::VectorXd>& lam) {
  const Eigen::Index m = lam.size();
  const Eigen::VectorXd p = logits_to_probs(link, lam);
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m + 1, m);
  switch (link) {
    case LinkKind::adjacent: {
      Eigen::VectorXd survival(m + 2);
      survival[m + 1] = 0.0;
      for (Eigen::Index h = m + 1; h-- > 0;) survival[h] = survival[h + 1] + p[h];
      for (Eigen::Index k = 1; k <= m; ++k)
        for (Eigen::Index h = 0; h <= m; ++h) d(h, k - 1) = p[h] * ((h >= k ? 1.0 : 0.0) - survival[k]);
      break;
    }
    case LinkKind::global: {
      for (Eigen::Index k = 1; k <= m; ++k) {
        const double slope = expit(lam[k - 1]) * expit(-lam[k - 1]);
        d(k, k - 1) += slope;
        d(k - 1, k - 1) -= slope;
      }
      break;
    }
    case LinkKind::continuation: {
      // reach[h] = P(Z >= h) = Π_{l<=h} expit(λ_l).
      Eigen::VectorXd reach(m + 2);
      reach[0] = 1.0;
      for (Eigen::Index h = 1; h <= m; ++h) reach[h] = reach[h - 1] * expit(lam[h - 1]);
      reach[m + 1] = 0.0;
      for (Eigen::Index k = 1; k <= m; ++k) {
        const double fail = expit(-lam[k - 1]);
        for (Eigen::Index h = 0; h <= m; ++h) {
          double v = 0.0;
          if (k <= h) v += reach[h] * fail;
          if (k <= h + 1 && h + 1 <= m) v -= reach[h + 1] * fail;
          d(h, k - 1) = v;
        }
      }
      break;
    }
  }
  return d;
}

bool parameters_valid(const ModelSpec& model, const ParamVector& beta) {
  if (!beta.allFinite()) return false;
  const ParamLayout layout(model);
  if (static_cast<std::size_t>(beta.size()) != layout.size()) return false;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const NodeSpec& node = model.nodes[i];
    if (node.link != LinkKind::global || node.n_categories < 3) continue;
    std::vector<int> levels;
    for (int p : node.parents) levels.push_back(model.nodes[p].n_categories);
    const auto block = beta.segment(static_cast<Eigen::Index>(layout.offset(static_cast<int>(i))),
                                    static_cast<Eigen::Index>(layout.block_size(static_cast<int>(i))));
    const std::size_t rows = cell_count(levels);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto config = lex_decode(levels, r);
      const Eigen::VectorXd lam = linear_predictor(model, static_cast<int>(i), config, {}, block);
      for (Eigen::Index h = 1; h < lam.size(); ++h)
        if (!(lam[h] < lam[h - 1])) return false;
    }
  }
  return true;
}

}  // namespace dagmix
