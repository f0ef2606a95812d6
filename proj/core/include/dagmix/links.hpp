#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dagmix/model.hpp"

namespace dagmix {

// Regressors of one node for one (parent configuration, covariate vector):
// a (c_i - 1) x block_size matrix whose row h-1 builds the h-th logit.
// `parent_config` follows the node's parent list; `covariates` follows
// ModelSpec::covariate_names (may be empty when the model has none).
Eigen::MatrixXd design_block(const ModelSpec& model, int node, std::span<const int> parent_config,
                             std::span<const double> covariates);

// λ_h = Σ_{l≤h} β_{0l} + Σ_j Σ_l β_{jl} I(z_j ≥ l) + covariate terms, or the
// design override's rows times β. `beta` is the node's block.
Eigen::VectorXd linear_predictor(const ModelSpec& model, int node, std::span<const int> parent_config,
                                 std::span<const double> covariates,
                                 const Eigen::Ref<const Eigen::VectorXd>& beta);

// Probability vector of length c from c-1 logits. Global logits use the
// survival orientation λ_h = logit P(Z ≥ h) and must strictly decrease,
// otherwise NumericalError("invalid cumulative logits").
Eigen::VectorXd logits_to_probs(LinkKind link, const Eigen::Ref<const Eigen::VectorXd>& lam);

// Inverse of logits_to_probs; p must be strictly positive.
Eigen::VectorXd probs_to_logits(LinkKind link, const Eigen::Ref<const Eigen::VectorXd>& p);

// c x (c-1) matrix of ∂P(Z=h)/∂λ_k.
Eigen::MatrixXd dprobs_dlogits(LinkKind link, const Eigen::Ref<const Eigen::VectorXd>& lam);

// True when every parent configuration of every global-link node yields
// strictly decreasing logits at zero covariates.
bool parameters_valid(const ModelSpec& model, const ParamVector& beta);

// Numerically stable logistic function.
double expit(double x);

}  // namespace dagmix
