#include <algorithm>
#include <numeric>

#include "dagmix/em.hpp"
#include "dagmix/links.hpp"

namespace dagmix {

namespace {

bool is_reversal(const std::vector<int>& perm) {
  const int c = static_cast<int>(perm.size());
  for (int k = 0; k < c; ++k)
    if (perm[k] != c - 1 - k) return false;
  return true;
}

// Cumulative parent effects e_0 = 0, e_m = Σ_{l<=m} b_l of `parent` on `child`.
std::vector<double> parent_effects(const ModelSpec& model, const ParamLayout& layout, const ParamVector& beta,
                                   int child, int parent) {
  const int c = model.nodes[parent].n_categories;
  std::vector<double> e(c, 0.0);
  for (int l = 1; l < c; ++l)
    e[l] = e[l - 1] + beta[static_cast<Eigen::Index>(layout.parent_slope(child, parent, l))];
  return e;
}

}  // namespace

ParamVector permute_latent_labels(const ModelSpec& model, const ParamVector& beta, int latent,
                                  const std::vector<int>& perm) {
  const NodeSpec& node = model.nodes.at(latent);
  if (!node.is_latent) throw ArgumentError("node '" + node.name + "' is not latent");
  const int c = node.n_categories;
  {
    std::vector<int> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> iota(c);
    std::iota(iota.begin(), iota.end(), 0);
    if (sorted != iota) throw ArgumentError("label permutation is not a permutation of the categories");
  }
  std::vector<int> identity(c);
  std::iota(identity.begin(), identity.end(), 0);
  if (perm == identity) return beta;

  const ParamLayout layout(model);
  ParamVector out = beta;
  const auto off = static_cast<Eigen::Index>(layout.offset(latent));
  const auto len = static_cast<Eigen::Index>(layout.block_size(latent));

  if (node.design || node.per_logit_covariates)
    throw ArgumentError("latent '" + node.name + "' uses a non-additive design; labels cannot be permuted");
  const bool root = node.parents.empty() && node.covariates.empty();
  if (root) {
    const Eigen::VectorXd lam = linear_predictor(model, latent, {}, {}, beta.segment(off, len));
    const Eigen::VectorXd p = logits_to_probs(node.link, lam);
    Eigen::VectorXd q(c);
    for (int k = 0; k < c; ++k) q[k] = p[perm[k]];
    const Eigen::VectorXd lam_new = probs_to_logits(node.link, q);
    for (int h = 0; h < c - 1; ++h) out[off + h] = h == 0 ? lam_new[0] : lam_new[h] - lam_new[h - 1];
  } else {
    if (!is_reversal(perm) || node.link == LinkKind::continuation)
      throw ArgumentError("latent '" + node.name +
                          "' has regressors; only reversing adjacent or global categories is representable");
    // λ'_h = -λ_{c-h}: cumulative intercepts a'_h = -a_{c-h}, slopes negate.
    std::vector<double> a(c, 0.0);
    for (int h = 1; h < c; ++h) a[h] = a[h - 1] + beta[off + h - 1];
    std::vector<double> a_new(c, 0.0);
    for (int h = 1; h < c; ++h) a_new[h] = -a[c - h];
    for (int h = 1; h < c; ++h) out[off + h - 1] = a_new[h] - a_new[h - 1];
    for (Eigen::Index k = c - 1; k < len; ++k) out[off + k] = -beta[off + k];
  }

  for (std::size_t i = latent + 1; i < model.size(); ++i) {
    const NodeSpec& child = model.nodes[i];
    if (std::find(child.parents.begin(), child.parents.end(), latent) == child.parents.end()) continue;
    if (child.design)
      throw ArgumentError("child '" + child.name + "' uses a design override; labels cannot be permuted");
    const int ci = static_cast<int>(i);
    const auto e = parent_effects(model, layout, beta, ci, latent);
    for (int l = 1; l < c; ++l) {
      const double now = e[perm[l]] - e[perm[0]];
      const double before = e[perm[l - 1]] - e[perm[0]];
      out[static_cast<Eigen::Index>(layout.parent_slope(ci, latent, l))] = now - before;
    }
    out[static_cast<Eigen::Index>(layout.intercept(ci, 1))] += e[perm[0]];
  }
  return out;
}

ParamVector canonicalize_labels(const ModelSpec& model, const ParamVector& beta, std::vector<std::string>* notes) {
  const ParamLayout layout(model);
  ParamVector out = beta;
  for (int latent : model.latent_nodes()) {
    int child = -1;
    for (std::size_t i = latent + 1; i < model.size() && child < 0; ++i) {
      const auto& ps = model.nodes[i].parents;
      if (std::find(ps.begin(), ps.end(), latent) != ps.end() && !model.nodes[i].design) child = static_cast<int>(i);
    }
    if (child < 0) continue;
    const auto e = parent_effects(model, layout, out, child, latent);
    std::vector<int> perm(e.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return e[a] < e[b]; });
    try {
      out = permute_latent_labels(model, out, latent, perm);
    } catch (const ArgumentError& err) {
      if (notes) notes->push_back("labels of '" + model.nodes[latent].name + "' left as estimated: " + err.what());
    }
  }
  return out;
}

}  // namespace dagmix
