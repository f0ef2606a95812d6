#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dagmix/data.hpp"
#include "dagmix/em.hpp"
#include "dagmix/model.hpp"

namespace dagmix {

// Row u: gradient of one unit's observed-data log-likelihood for record u.
// `weights` carries each record's multiplicity.
struct ScoreMatrix {
  Eigen::MatrixXd scores;
  Eigen::VectorXd weights;

  Eigen::VectorXd total() const { return scores.transpose() * weights; }
};

struct ScoreOptions {
  double relative_step = 1e-5;
  int threads = 1;
};

ScoreMatrix unit_scores(const ModelSpec& model, const ParamVector& beta, const Dataset& data,
                        const ScoreOptions& options = {});

// Outer-product total Σ_u w_u s_u s_uᵀ.
Eigen::MatrixXd expected_information(const ScoreMatrix& scores);

// Model-based alternative for grouped categorical data: n Σ_j P(j) s_j s_jᵀ
// summed over covariate strata.
Eigen::MatrixXd model_expected_information(const ModelSpec& model, const ParamVector& beta,
                                           const Dataset& data, const ScoreOptions& options = {});

// sqrt(diag(F⁻¹)). NumericalError when F is singular or its condition number
// exceeds 1e12.
Eigen::VectorXd standard_errors(const Eigen::MatrixXd& information);

// Fills result.se from OPG information at result.beta; on singular
// information leaves se empty and records a diagnostic.
void attach_standard_errors(FitResult& result, const ModelSpec& model, const Dataset& data,
                            const ScoreOptions& options = {});

// Jacobian of the observed-table cell probabilities (latents summed out) with
// respect to β, stacked over covariate rows.
Eigen::MatrixXd observed_jacobian(const ModelSpec& model, const ParamVector& beta,
                                  const std::vector<std::vector<double>>& covariate_rows,
                                  double relative_step = 1e-5);

struct IdentifiabilityPoint {
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  int rank = 0;
  bool pass = false;
};

struct IdentifiabilityReport {
  std::vector<IdentifiabilityPoint> points;
  bool identified = false;
  int n_points = 0;
  std::uint64_t seed = 0;
  std::size_t n_params = 0;
  std::uint64_t observed_df = 0;
  double tolerance = 1e-7;
};

IdentifiabilityPoint check_point(const ModelSpec& model, const ParamVector& beta,
                                 const std::vector<std::vector<double>>& covariate_rows,
                                 double tolerance = 1e-7);

// Samples β uniformly on [-2, 2] (see sample_parameters) at n_points points and
// checks that the Jacobian has full column rank at relative tolerance.
// Covariate models are checked over n_covariates + 2 standard-normal rows.
IdentifiabilityReport identifiability_check(const ModelSpec& model, int n_points, std::uint64_t seed,
                                            double tolerance = 1e-7);

}  // namespace dagmix
