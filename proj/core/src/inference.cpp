#include "dagmix/inference.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "dagmix/causal.hpp"
#include "dagmix/links.hpp"
#include "workspace.hpp"

namespace dagmix {

namespace {

double step_for(double value, double relative) { return relative * std::max(1.0, std::abs(value)); }

// Runs body(k) for k in [0, n) on up to `threads` workers; each k is
// independent so results do not depend on the thread count.
template <class Body>
void parallel_for(int n, int threads, Body body) {
  const int workers = std::clamp(threads, 1, std::max(n, 1));
  if (workers == 1) {
    for (int k = 0; k < n; ++k) body(k);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int k = next++; k < n; k = next++) body(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Eigen::VectorXd observed_probabilities(const ModelSpec& model, const ParamVector& beta,
                                       const std::vector<double>& covariates) {
  const LexTable joint = joint_distribution(model, beta, covariates);
  const LexTable observed = marginalize(joint, model.observed_nodes());
  return Eigen::Map<const Eigen::VectorXd>(observed.values().data(), static_cast<Eigen::Index>(observed.size()));
}

std::vector<std::vector<double>> covariate_rows_for(const ModelSpec& model, std::uint64_t seed) {
  if (model.covariate_names.empty()) return {{}};
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> rows(model.covariate_names.size() + 2,
                                        std::vector<double>(model.covariate_names.size()));
  for (auto& row : rows)
    for (double& x : row) x = normal(rng);
  return rows;
}

}  // namespace

ScoreMatrix unit_scores(const ModelSpec& model, const ParamVector& beta, const Dataset& data,
                        const ScoreOptions& options) {
  const detail::Workspace ws(model, data);
  const auto k_params = static_cast<int>(ws.layout().size());
  if (beta.size() != k_params) throw ArgumentError("coefficient vector has wrong length");
  const auto& cells = ws.record_cells();
  ScoreMatrix out;
  out.scores.resize(static_cast<Eigen::Index>(cells.size()), k_params);
  out.weights.resize(static_cast<Eigen::Index>(cells.size()));
  for (std::size_t u = 0; u < cells.size(); ++u) out.weights[static_cast<Eigen::Index>(u)] = data.records[u].weight;

  parallel_for(k_params, options.threads, [&](int k) {
    const double h = step_for(beta[k], options.relative_step);
    ParamVector up = beta, down = beta;
    up[k] += h;
    down[k] -= h;
    const auto lp_up = ws.cell_log_probs(up);
    const auto lp_down = ws.cell_log_probs(down);
    for (std::size_t u = 0; u < cells.size(); ++u) {
      const auto [s, j] = cells[u];
      const double d = (lp_up[s][j] - lp_down[s][j]) / (2.0 * h);
      if (!std::isfinite(d))
        throw NumericalError("non-finite log-likelihood at a perturbed point for " + ws.layout().label(k));
      out.scores(static_cast<Eigen::Index>(u), k) = d;
    }
  });
  return out;
}

Eigen::MatrixXd expected_information(const ScoreMatrix& scores) {
  const Eigen::MatrixXd weighted = scores.weights.asDiagonal() * scores.scores;
  Eigen::MatrixXd f = scores.scores.transpose() * weighted;
  return 0.5 * (f + f.transpose());
}

Eigen::MatrixXd model_expected_information(const ModelSpec& model, const ParamVector& beta, const Dataset& data,
                                           const ScoreOptions& options) {
  const detail::Workspace ws(model, data);
  const auto k_params = static_cast<Eigen::Index>(ws.layout().size());
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(k_params, k_params);
  for (const auto& stratum : ws.strata()) {
    double n = 0.0;
    for (double w : stratum.frequencies) n += w;
    const Eigen::VectorXd p = observed_probabilities(model, beta, stratum.covariates);
    Eigen::MatrixXd dlogp(p.size(), k_params);
    parallel_for(static_cast<int>(k_params), options.threads, [&](int k) {
      const double h = step_for(beta[k], options.relative_step);
      ParamVector up = beta, down = beta;
      up[k] += h;
      down[k] -= h;
      const Eigen::VectorXd pu = observed_probabilities(model, up, stratum.covariates);
      const Eigen::VectorXd pd = observed_probabilities(model, down, stratum.covariates);
      dlogp.col(k) = (pu.array().log() - pd.array().log()).matrix() / (2.0 * h);
    });
    f += n * dlogp.transpose() * p.asDiagonal() * dlogp;
  }
  return 0.5 * (f + f.transpose());
}

Eigen::VectorXd standard_errors(const Eigen::MatrixXd& information) {
  if (information.rows() != information.cols() || information.rows() == 0)
    throw ArgumentError("information matrix must be square and non-empty");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(information);
  if (eig.info() != Eigen::Success) throw NumericalError("eigen-decomposition of the information matrix failed");
  const Eigen::VectorXd values = eig.eigenvalues();
  const double top = values.maxCoeff();
  const double bottom = values.minCoeff();
  if (!(bottom > 0.0) || top / bottom > 1e12)
    throw NumericalError("information matrix singular — model may be unidentified (eigenvalues " +
                         std::to_string(bottom) + " .. " + std::to_string(top) + ")");
  const Eigen::MatrixXd inverse = eig.eigenvectors() * values.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  return inverse.diagonal().cwiseSqrt();
}

void attach_standard_errors(FitResult& result, const ModelSpec& model, const Dataset& data,
                            const ScoreOptions& options) {
  try {
    result.se = standard_errors(expected_information(unit_scores(model, result.beta, data, options)));
  } catch (const NumericalError& e) {
    result.se.resize(0);
    result.diagnostics.push_back(std::string("standard errors unavailable: ") + e.what());
  }
}

Eigen::MatrixXd observed_jacobian(const ModelSpec& model, const ParamVector& beta,
                                  const std::vector<std::vector<double>>& covariate_rows, double relative_step) {
  const auto k_params = static_cast<Eigen::Index>(beta.size());
  const std::vector<std::vector<double>> rows = covariate_rows.empty() ? std::vector<std::vector<double>>{{}} : covariate_rows;
  std::vector<Eigen::MatrixXd> blocks;
  Eigen::Index total = 0;
  for (const auto& cov : rows) {
    Eigen::MatrixXd block;
    for (Eigen::Index k = 0; k < k_params; ++k) {
      const double h = step_for(beta[k], relative_step);
      ParamVector up = beta, down = beta;
      up[k] += h;
      down[k] -= h;
      const Eigen::VectorXd d = (observed_probabilities(model, up, cov) - observed_probabilities(model, down, cov)) / (2.0 * h);
      if (k == 0) block.resize(d.size(), k_params);
      block.col(k) = d;
    }
    total += block.rows();
    blocks.push_back(std::move(block));
  }
  Eigen::MatrixXd j(total, k_params);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    j.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return j;
}

IdentifiabilityPoint check_point(const ModelSpec& model, const ParamVector& beta,
                                 const std::vector<std::vector<double>>& covariate_rows, double tolerance) {
  const Eigen::MatrixXd j = observed_jacobian(model, beta, covariate_rows);
  const Eigen::Index k = j.cols();
  Eigen::VectorXd sv;
  if (j.rows() >= k) {
    // Singular values of R from a thin QR equal those of the tall Jacobian.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(j);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    sv = Eigen::JacobiSVD<Eigen::MatrixXd>(r).singularValues();
  } else {
    sv = Eigen::VectorXd::Zero(k);
    const Eigen::VectorXd some = Eigen::JacobiSVD<Eigen::MatrixXd>(j).singularValues();
    sv.head(some.size()) = some;
  }
  IdentifiabilityPoint point;
  point.sigma_max = sv.size() ? sv.maxCoeff() : 0.0;
  point.sigma_min = sv.size() ? sv.minCoeff() : 0.0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tolerance * point.sigma_max) ++point.rank;
  const auto report = validate(model);
  const std::uint64_t df = report.observed_df * std::max<std::size_t>(covariate_rows.size(), 1);
  point.pass = point.rank == k && static_cast<std::uint64_t>(k) <= df;
  return point;
}

IdentifiabilityReport identifiability_check(const ModelSpec& model, int n_points, std::uint64_t seed, double tolerance) {
  if (n_points < 1) throw ArgumentError("identifiability check needs at least one point");
  const auto report = validate(model);
  if (!report.valid()) throw ModelError(ModelError::Category::semantic, report.violations.front());
  const auto rows = covariate_rows_for(model, seed);

  IdentifiabilityReport out;
  out.n_points = n_points;
  out.seed = seed;
  out.tolerance = tolerance;
  out.n_params = report.total_params;
  out.observed_df = report.observed_df * rows.size();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::vector<std::uint32_t> point_seeds(static_cast<std::size_t>(n_points) * 2);
  seq.generate(point_seeds.begin(), point_seeds.end());
  out.identified = true;
  for (int t = 0; t < n_points; ++t) {
    const std::uint64_t s = (static_cast<std::uint64_t>(point_seeds[2 * t]) << 32) | point_seeds[2 * t + 1];
    const ParamVector beta = sample_parameters(model, s, 2.0);
    out.points.push_back(check_point(model, beta, rows, tolerance));
    out.identified = out.identified && out.points.back().pass;
  }
  return out;
}

}  // namespace dagmix
