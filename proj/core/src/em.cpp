#include "dagmix/em.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "dagmix/links.hpp"
#include "workspace.hpp"

namespace dagmix {

std::size_t CompletedTable::latent_configs() const { return cell_count(latent_levels); }

LexTable CompletedTable::dense(const ModelSpec& model, std::size_t stratum) const {
  const CompletedStratum& cs = strata.at(stratum);
  std::vector<int> vars(model.size());
  for (std::size_t i = 0; i < vars.size(); ++i) vars[i] = static_cast<int>(i);
  const auto levels = model.levels();
  LexTable table = LexTable::filled(vars, levels, 0.0);
  const std::size_t H = latent_configs();
  std::vector<int> cell(model.size());
  for (std::size_t j = 0; j < cs.cells.size(); ++j) {
    for (std::size_t o = 0; o < observed_nodes.size(); ++o) cell[observed_nodes[o]] = cs.cells[j][o];
    for (std::size_t h = 0; h < H; ++h) {
      const auto latent = lex_decode(latent_levels, h);
      for (std::size_t l = 0; l < latent_nodes.size(); ++l) cell[latent_nodes[l]] = latent[l];
      table[lex_index(levels, cell)] += cs.completed[j * H + h];
    }
  }
  return table;
}

namespace {

// Rebuilds family margins for completed tables assembled outside e_step.
const CompletedTable& with_families(const ModelSpec& model, const CompletedTable& in, CompletedTable& scratch) {
  bool complete = true;
  for (const auto& cs : in.strata) complete = complete && cs.families.size() == model.size();
  if (complete) return in;
  scratch = in;
  for (std::size_t s = 0; s < scratch.strata.size(); ++s) {
    const LexTable dense = scratch.dense(model, s);
    auto& fams = scratch.strata[s].families;
    fams.clear();
    for (std::size_t i = 0; i < model.size(); ++i) fams.push_back(marginalize(dense, family_of(model, static_cast<int>(i))));
  }
  return scratch;
}

struct ScoringRow {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  double n = 0.0;
};

std::vector<ScoringRow> scoring_rows(const ModelSpec& model, int node, const CompletedTable& completed) {
  const NodeSpec& spec = model.nodes[node];
  const auto vars = family_of(model, node);
  std::vector<int> parent_levels;
  std::vector<int> list_position;
  for (std::size_t k = 0; k + 1 < vars.size(); ++k) {
    parent_levels.push_back(model.nodes[vars[k]].n_categories);
    list_position.push_back(static_cast<int>(std::find(spec.parents.begin(), spec.parents.end(), vars[k]) -
                                             spec.parents.begin()));
  }
  const int c = spec.n_categories;
  const std::size_t configs = cell_count(parent_levels);
  std::vector<ScoringRow> rows;
  std::vector<int> config(parent_levels.size());
  for (std::size_t s = 0; s < completed.strata.size(); ++s) {
    const LexTable& fam = completed.family(node, s);
    const auto& cov = completed.strata[s].covariates;
    for (std::size_t r = 0; r < configs; ++r) {
      ScoringRow row;
      row.y.resize(c);
      for (int z = 0; z < c; ++z) row.y[z] = fam[r * c + z];
      row.n = row.y.sum();
      if (!(row.n > 0.0)) continue;
      const auto sorted = lex_decode(parent_levels, r);
      for (std::size_t k = 0; k < sorted.size(); ++k) config[list_position[k]] = sorted[k];
      row.x = design_block(model, node, config, cov);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

struct Evaluation {
  bool ok = false;
  double ll = -std::numeric_limits<double>::infinity();
  double max_abs_lambda = 0.0;
};

Evaluation evaluate(const std::vector<ScoringRow>& rows, LinkKind link, const Eigen::VectorXd& beta,
                    Eigen::VectorXd* grad, Eigen::MatrixXd* info) {
  Evaluation e;
  double ll = 0.0;
  if (grad) grad->setZero(beta.size());
  if (info) info->setZero(beta.size(), beta.size());
  for (const ScoringRow& row : rows) {
    const Eigen::VectorXd lam = row.x * beta;
    if (!lam.allFinite()) return e;
    if (link == LinkKind::global)
      for (Eigen::Index h = 1; h < lam.size(); ++h)
        if (!(lam[h] < lam[h - 1])) return e;
    e.max_abs_lambda = std::max(e.max_abs_lambda, lam.cwiseAbs().maxCoeff());
    const Eigen::VectorXd p = logits_to_probs(link, lam);
    for (Eigen::Index h = 0; h < p.size(); ++h) {
      if (row.y[h] <= 0.0) continue;
      if (!(p[h] > 0.0)) return e;
      ll += row.y[h] * std::log(p[h]);
    }
    if (grad) {
      const Eigen::MatrixXd d = dprobs_dlogits(link, lam);
      const Eigen::VectorXd safe = p.cwiseMax(1e-300);
      const Eigen::VectorXd u = d.transpose() * row.y.cwiseQuotient(safe);
      const Eigen::MatrixXd w = row.n * d.transpose() * safe.cwiseInverse().asDiagonal() * d;
      *grad += row.x.transpose() * u;
      *info += row.x.transpose() * w * row.x;
    }
  }
  e.ok = std::isfinite(ll);
  e.ll = ll;
  return e;
}

Eigen::VectorXd scoring_direction(const Eigen::MatrixXd& info, const Eigen::VectorXd& grad) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    const Eigen::VectorXd d = ldlt.vectorD();
    if (d.minCoeff() > 1e-12 * std::max(d.maxCoeff(), 1e-300)) return ldlt.solve(grad);
  }
  return info.completeOrthogonalDecomposition().solve(grad);
}

Eigen::VectorXd fit_node(const ModelSpec& model, int node, const std::vector<ScoringRow>& rows,
                         Eigen::VectorXd beta, const MStepOptions& options, MStepDiagnostics* diagnostics) {
  if (rows.empty()) return beta;
  const NodeSpec& spec = model.nodes[node];
  Eigen::VectorXd grad;
  Eigen::MatrixXd info;
  Evaluation current = evaluate(rows, spec.link, beta, &grad, &info);
  if (!current.ok)
    throw NumericalError("M-step for node '" + spec.name + "' diverged: starting coefficients give an invalid likelihood");
  const double bound = std::max(options.lambda_bound, current.max_abs_lambda);

  for (int it = 0; it < options.max_iter; ++it) {
    const Eigen::VectorXd step = scoring_direction(info, grad);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd candidate;
    for (int k = 0; k <= options.max_halvings; ++k, t *= 0.5) {
      candidate = beta + t * step;
      const Evaluation e = evaluate(rows, spec.link, candidate, nullptr, nullptr);
      if (e.ok && e.max_abs_lambda <= bound && e.ll >= current.ll) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (diagnostics && step.cwiseAbs().maxCoeff() > 1e-4)
        diagnostics->notes.push_back("node '" + spec.name + "': line search stalled after " +
                                     std::to_string(options.max_halvings) + " halvings");
      break;
    }
    const double change = (t * step).cwiseAbs().maxCoeff();
    beta = candidate;
    current = evaluate(rows, spec.link, beta, &grad, &info);
    if (change < options.tol) break;
  }
  if (diagnostics && current.max_abs_lambda >= 0.999 * bound)
    diagnostics->notes.push_back("node '" + spec.name + "': linear predictor at the bound, data may be separated");
  return beta;
}

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(restart)};
  std::array<std::uint32_t, 2> words{};
  seq.generate(words.begin(), words.end());
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

ParamVector initialize_with(const detail::Workspace& ws, std::uint64_t seed, const FitOptions& options) {
  const ModelSpec& model = ws.model();
  const CompletedTable completed = ws.perturbed_uniform(seed, options.perturbation);
  const ParamVector beta = m_step(model, completed, null_parameters(model), options.m_step);
  const ParamVector clamped = beta.cwiseMax(-options.init_bound).cwiseMin(options.init_bound);
  return parameters_valid(model, clamped) ? clamped : beta;
}

struct RunOutcome {
  ParamVector beta;
  std::vector<double> trace;
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  std::vector<std::string> notes;
};

RunOutcome run_em(const detail::Workspace& ws, ParamVector beta, const FitOptions& options) {
  const ModelSpec& model = ws.model();
  RunOutcome out;
  MStepDiagnostics diag;
  CompletedTable completed;
  double ll = ws.e_step(beta, &completed);
  out.trace.push_back(ll);
  for (int it = 1; it <= options.max_iter; ++it) {
    ParamVector next = m_step(model, completed, beta, options.m_step, &diag);
    const double ll_next = ws.e_step(next, &completed);
    out.trace.push_back(ll_next);
    const double dll = std::abs(ll_next - ll);
    const double dbeta = (next - beta).cwiseAbs().maxCoeff();
    beta = std::move(next);
    ll = ll_next;
    out.iterations = it;
    if (dll < options.tol_loglik && dbeta < options.tol_param) {
      out.converged = true;
      break;
    }
  }
  out.beta = std::move(beta);
  std::sort(diag.notes.begin(), diag.notes.end());
  diag.notes.erase(std::unique(diag.notes.begin(), diag.notes.end()), diag.notes.end());
  out.notes = std::move(diag.notes);
  return out;
}

}  // namespace

ParamVector null_parameters(const ModelSpec& model) {
  const ParamLayout layout(model);
  ParamVector beta = ParamVector::Zero(static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < model.size(); ++i) {
    const NodeSpec& node = model.nodes[i];
    const int c = node.n_categories;
    const Eigen::VectorXd lam = probs_to_logits(node.link, Eigen::VectorXd::Constant(c, 1.0 / c));
    const auto off = static_cast<Eigen::Index>(layout.offset(static_cast<int>(i)));
    if (!node.design) {
      for (int h = 0; h < c - 1; ++h) beta[off + h] = h == 0 ? lam[0] : lam[h] - lam[h - 1];
      continue;
    }
    // Least-squares fit of the uniform logits through the design override.
    const auto& d = *node.design;
    Eigen::MatrixXd x(d.rows, d.cols);
    Eigen::VectorXd target(d.rows);
    for (int r = 0; r < d.rows; ++r) {
      for (int k = 0; k < d.cols; ++k) x(r, k) = d.at(r, k);
      target[r] = lam[r % (c - 1)];
    }
    beta.segment(off, d.cols) = x.completeOrthogonalDecomposition().solve(target);
  }
  if (!parameters_valid(model, beta))
    throw ArgumentError("design override cannot represent uniform conditionals; supply starting values");
  return beta;
}

ParamVector m_step(const ModelSpec& model, const CompletedTable& completed, const MStepOptions& options,
                   MStepDiagnostics* diagnostics) {
  return m_step(model, completed, null_parameters(model), options, diagnostics);
}

ParamVector m_step(const ModelSpec& model, const CompletedTable& completed, const ParamVector& start,
                   const MStepOptions& options, MStepDiagnostics* diagnostics) {
  const ParamLayout layout(model);
  if (static_cast<std::size_t>(start.size()) != layout.size())
    throw ArgumentError("starting coefficient vector has wrong length");
  CompletedTable scratch;
  const CompletedTable& table = with_families(model, completed, scratch);
  for (const auto& cs : table.strata)
    for (double m : cs.completed)
      if (!(m >= 0.0)) throw ArgumentError("completed frequencies must be non-negative");
  ParamVector beta = start;
  for (std::size_t i = 0; i < model.size(); ++i) {
    const int node = static_cast<int>(i);
    const auto off = static_cast<Eigen::Index>(layout.offset(node));
    const auto len = static_cast<Eigen::Index>(layout.block_size(node));
    const auto rows = scoring_rows(model, node, table);
    beta.segment(off, len) = fit_node(model, node, rows, start.segment(off, len), options, diagnostics);
  }
  return beta;
}

std::pair<CompletedTable, double> e_step(const ModelSpec& model, const ParamVector& beta, const Dataset& data) {
  const detail::Workspace ws(model, data);
  CompletedTable table;
  const double ll = ws.e_step(beta, &table);
  return {std::move(table), ll};
}

double loglik(const ModelSpec& model, const ParamVector& beta, const Dataset& data) {
  const detail::Workspace ws(model, data);
  return ws.e_step(beta, nullptr);
}

ParamVector initialize(const ModelSpec& model, const Dataset& data, std::uint64_t seed, const FitOptions& options) {
  const detail::Workspace ws(model, data);
  return initialize_with(ws, seed, options);
}

FitResult fit(const ModelSpec& model, const Dataset& data, const FitOptions& options) {
  const detail::Workspace ws(model, data);
  const int n_runs = options.start ? 1 : std::max(1, options.n_restarts);
  if (options.start && static_cast<std::size_t>(options.start->size()) != ws.layout().size())
    throw ArgumentError("starting coefficient vector has wrong length");

  std::vector<RunOutcome> outcomes(n_runs);
  std::vector<std::uint64_t> seeds(n_runs);
  std::vector<std::exception_ptr> errors(n_runs);
  for (int r = 0; r < n_runs; ++r) seeds[r] = restart_seed(options.seed, r);

  auto work = [&](int r) {
    try {
      const ParamVector start = options.start ? *options.start : initialize_with(ws, seeds[r], options);
      outcomes[r] = run_em(ws, start, options);
    } catch (const Error&) {
      errors[r] = std::current_exception();
      outcomes[r].failed = true;
    }
  };

  unsigned threads = options.threads > 0 ? static_cast<unsigned>(options.threads) : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(n_runs));
  if (threads == 1) {
    for (int r = 0; r < n_runs; ++r) work(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (int r = next++; r < n_runs; r = next++) work(r);
      });
    for (auto& th : pool) th.join();
  }

  FitResult result;
  result.n_params = ws.layout().size();
  result.n_obs = data.total_weight();
  std::optional<std::size_t> best;
  for (int r = 0; r < n_runs; ++r) {
    RestartRecord rec;
    rec.seed = options.start ? options.seed : seeds[r];
    if (outcomes[r].failed) {
      rec.loglik = -std::numeric_limits<double>::infinity();
      try {
        std::rethrow_exception(errors[r]);
      } catch (const Error& e) {
        result.diagnostics.push_back("restart " + std::to_string(r) + " failed: " + e.what());
      }
    } else {
      rec.loglik = outcomes[r].trace.back();
      rec.iterations = outcomes[r].iterations;
      rec.converged = outcomes[r].converged;
      if (!best || rec.loglik > result.restarts[*best].loglik) best = static_cast<std::size_t>(r);
    }
    result.restarts.push_back(rec);
  }
  if (!best) std::rethrow_exception(errors.front());

  RunOutcome& winner = outcomes[*best];
  result.best_restart = *best;
  result.beta = std::move(winner.beta);
  result.trace = std::move(winner.trace);
  result.iterations = winner.iterations;
  result.converged = winner.converged;
  result.loglik = result.trace.back();
  for (auto& note : winner.notes) result.diagnostics.push_back(std::move(note));
  const bool any_converged = std::any_of(result.restarts.begin(), result.restarts.end(),
                                         [](const RestartRecord& r) { return r.converged; });
  if (!any_converged) result.diagnostics.push_back("no restart reached the convergence tolerances");
  else if (!result.converged) result.diagnostics.push_back("best restart stopped at max_iter before converging");
  if (options.canonicalize) result.beta = canonicalize_labels(model, result.beta, &result.diagnostics);

  const double k = static_cast<double>(result.n_params);
  result.aic = -2.0 * result.loglik + 2.0 * k;
  result.bic = -2.0 * result.loglik + k * std::log(std::max(result.n_obs, 1.0));
  return result;
}

}  // namespace dagmix
