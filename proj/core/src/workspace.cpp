#include "workspace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "dagmix/links.hpp"
#include "dagmix/table.hpp"

namespace dagmix::detail {

namespace {

struct Neumaier {
  double sum = 0.0, comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) comp += (sum - t) + v;
    else comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace

Workspace::Workspace(const ModelSpec& model, const Dataset& data) : model_(&model), layout_(model) {
  const auto report = validate(model);
  if (!report.valid()) throw ModelError(ModelError::Category::semantic, report.violations.front());
  check_compatible(model, data);

  observed_ = model.observed_nodes();
  latent_ = model.latent_nodes();
  for (int l : latent_) latent_levels_.push_back(model.nodes[l].n_categories);
  n_latent_configs_ = cell_count(latent_levels_);

  for (std::size_t i = 0; i < model.size(); ++i) {
    const NodeSpec& node = model.nodes[i];
    FamilyLayout f;
    f.vars = family_of(model, static_cast<int>(i));
    for (int v : f.vars) f.levels.push_back(model.nodes[v].n_categories);
    for (std::size_t k = 0; k + 1 < f.vars.size(); ++k)
      f.list_position.push_back(static_cast<int>(
          std::find(node.parents.begin(), node.parents.end(), f.vars[k]) - node.parents.begin()));
    const auto strides = lex_strides(f.levels);
    f.latent_offset.assign(n_latent_configs_, 0);
    for (std::size_t h = 0; h < n_latent_configs_; ++h) {
      const auto config = lex_decode(latent_levels_, h);
      for (std::size_t l = 0; l < latent_.size(); ++l) {
        auto it = std::find(f.vars.begin(), f.vars.end(), latent_[l]);
        if (it != f.vars.end()) f.latent_offset[h] += strides[it - f.vars.begin()] * config[l];
      }
    }
    f.observed_stride.assign(observed_.size(), 0);
    for (std::size_t o = 0; o < observed_.size(); ++o) {
      auto it = std::find(f.vars.begin(), f.vars.end(), observed_[o]);
      if (it != f.vars.end()) f.observed_stride[o] = strides[it - f.vars.begin()];
    }
    f.touches_latent = std::any_of(f.vars.begin(), f.vars.end(),
                                   [&](int v) { return model.nodes[v].is_latent; });
    f.has_covariates = !node.covariates.empty();
    families_.push_back(std::move(f));
  }

  std::map<std::vector<double>, std::size_t> stratum_of;
  std::vector<std::map<std::vector<int>, std::size_t>> cell_of;
  for (const Record& r : data.records) {
    auto [sit, fresh] = stratum_of.emplace(r.covariates, strata_.size());
    if (fresh) {
      strata_.push_back(Stratum{r.covariates, {}, {}, {}});
      cell_of.emplace_back();
    }
    const std::size_t s = sit->second;
    auto [cit, new_cell] = cell_of[s].emplace(r.categories, strata_[s].cells.size());
    if (new_cell) {
      strata_[s].cells.push_back(r.categories);
      strata_[s].frequencies.push_back(0.0);
    }
    strata_[s].frequencies[cit->second] += r.weight;
    record_cells_.emplace_back(s, cit->second);
  }
  for (Stratum& st : strata_) {
    st.family_offset.assign(model.size(), std::vector<std::size_t>(st.cells.size(), 0));
    for (std::size_t i = 0; i < model.size(); ++i)
      for (std::size_t j = 0; j < st.cells.size(); ++j)
        for (std::size_t o = 0; o < observed_.size(); ++o)
          st.family_offset[i][j] += families_[i].observed_stride[o] * st.cells[j][o];
  }
}

std::vector<double> Workspace::conditional_table(const ParamVector& beta, int node,
                                                  const std::vector<double>& covariates) const {
  const FamilyLayout& f = families_[node];
  const int c = f.levels.back();
  const std::vector<int> parent_levels(f.levels.begin(), f.levels.end() - 1);
  const std::size_t rows = cell_count(parent_levels);
  const auto block = beta.segment(static_cast<Eigen::Index>(layout_.offset(node)),
                                  static_cast<Eigen::Index>(layout_.block_size(node)));
  std::vector<double> table(rows * static_cast<std::size_t>(c));
  std::vector<int> config(parent_levels.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const auto sorted = lex_decode(parent_levels, r);
    for (std::size_t k = 0; k < sorted.size(); ++k) config[f.list_position[k]] = sorted[k];
    const Eigen::VectorXd lam = linear_predictor(*model_, node, config, covariates, block);
    const Eigen::VectorXd p = logits_to_probs(model_->nodes[node].link, lam);
    for (int z = 0; z < c; ++z) table[r * c + z] = p[z];
  }
  return table;
}

LogCpts Workspace::log_cpts(const ParamVector& beta) const {
  LogCpts out;
  out.shared_.resize(model_->size());
  out.per_stratum_.resize(model_->size());
  const std::vector<double> zeros(model_->covariate_names.size(), 0.0);
  auto to_log = [](std::vector<double> t) {
    for (double& v : t) v = std::log(v);
    return t;
  };
  for (std::size_t i = 0; i < model_->size(); ++i) {
    const int node = static_cast<int>(i);
    if (!families_[i].has_covariates) {
      out.shared_[i] = to_log(conditional_table(beta, node, zeros));
    } else {
      for (const Stratum& st : strata_) out.per_stratum_[i].push_back(to_log(conditional_table(beta, node, st.covariates)));
    }
  }
  return out;
}

std::vector<std::vector<double>> Workspace::cell_log_probs(const ParamVector& beta) const {
  const LogCpts cpts = log_cpts(beta);
  const std::size_t n_nodes = model_->size();
  std::vector<std::vector<double>> out(strata_.size());
  std::vector<double> lp(n_latent_configs_);
  for (std::size_t s = 0; s < strata_.size(); ++s) {
    const Stratum& st = strata_[s];
    out[s].resize(st.cells.size());
    for (std::size_t j = 0; j < st.cells.size(); ++j) {
      double base = 0.0;
      std::fill(lp.begin(), lp.end(), 0.0);
      for (std::size_t i = 0; i < n_nodes; ++i) {
        const auto& t = cpts.get(static_cast<int>(i), s);
        const std::size_t off = st.family_offset[i][j];
        if (!families_[i].touches_latent) {
          base += t[off];
        } else {
          const auto& lo = families_[i].latent_offset;
          for (std::size_t h = 0; h < n_latent_configs_; ++h) lp[h] += t[off + lo[h]];
        }
      }
      const double top = *std::max_element(lp.begin(), lp.end());
      if (!std::isfinite(top) || !std::isfinite(base)) {
        out[s][j] = -std::numeric_limits<double>::infinity();
        continue;
      }
      double sum = 0.0;
      for (double v : lp) sum += std::exp(v - top);
      out[s][j] = base + top + std::log(sum);
    }
  }
  return out;
}

CompletedTable Workspace::skeleton() const {
  CompletedTable table;
  table.observed_nodes = observed_;
  table.latent_nodes = latent_;
  table.latent_levels = latent_levels_;
  for (const Stratum& st : strata_) {
    CompletedStratum cs;
    cs.covariates = st.covariates;
    cs.cells = st.cells;
    cs.frequencies = st.frequencies;
    cs.completed.assign(st.cells.size() * n_latent_configs_, 0.0);
    for (const FamilyLayout& f : families_) cs.families.push_back(LexTable::filled(f.vars, f.levels, 0.0));
    table.strata.push_back(std::move(cs));
  }
  return table;
}

void Workspace::accumulate_families(CompletedTable& table) const {
  for (std::size_t s = 0; s < strata_.size(); ++s) {
    CompletedStratum& cs = table.strata[s];
    for (std::size_t i = 0; i < families_.size(); ++i) {
      auto values = cs.families[i].values();
      std::fill(values.begin(), values.end(), 0.0);
      const auto& lo = families_[i].latent_offset;
      for (std::size_t j = 0; j < cs.cells.size(); ++j) {
        const std::size_t off = strata_[s].family_offset[i][j];
        const double* row = cs.completed.data() + j * n_latent_configs_;
        for (std::size_t h = 0; h < n_latent_configs_; ++h) values[off + lo[h]] += row[h];
      }
    }
  }
}

double Workspace::e_step(const ParamVector& beta, CompletedTable* out) const {
  const LogCpts cpts = log_cpts(beta);
  const std::size_t n_nodes = model_->size();
  const std::size_t H = n_latent_configs_;
  if (out) *out = skeleton();

  Neumaier total;
  std::vector<double> lp(H);
  for (std::size_t s = 0; s < strata_.size(); ++s) {
    const Stratum& st = strata_[s];
    for (std::size_t j = 0; j < st.cells.size(); ++j) {
      const double n = st.frequencies[j];
      if (n <= 0.0) continue;
      double base = 0.0;
      std::fill(lp.begin(), lp.end(), 0.0);
      for (std::size_t i = 0; i < n_nodes; ++i) {
        const auto& t = cpts.get(static_cast<int>(i), s);
        const std::size_t off = st.family_offset[i][j];
        if (!families_[i].touches_latent) {
          base += t[off];
        } else {
          const auto& lo = families_[i].latent_offset;
          for (std::size_t h = 0; h < H; ++h) lp[h] += t[off + lo[h]];
        }
      }
      const double top = *std::max_element(lp.begin(), lp.end());
      if (!std::isfinite(top) || !std::isfinite(base)) {
        std::string where;
        for (std::size_t o = 0; o < observed_.size(); ++o)
          where += (o ? ", " : "") + model_->nodes[observed_[o]].name + "=" + std::to_string(st.cells[j][o]);
        throw NumericalError("observed cell (" + where + ") has zero model probability");
      }
      double sum = 0.0;
      for (std::size_t h = 0; h < H; ++h) sum += std::exp(lp[h] - top);
      const double lse = top + std::log(sum);
      total.add(n * (base + lse));
      if (out) {
        double* row = out->strata[s].completed.data() + j * H;
        for (std::size_t h = 0; h < H; ++h) row[h] = n * std::exp(lp[h] - lse);
      }
    }
  }
  if (out) accumulate_families(*out);
  return total.value();
}

CompletedTable Workspace::perturbed_uniform(std::uint64_t seed, double delta) const {
  CompletedTable table = skeleton();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const std::size_t H = n_latent_configs_;
  const double uniform = 1.0 / static_cast<double>(H);
  std::vector<double> post(H);
  for (CompletedStratum& cs : table.strata) {
    for (std::size_t j = 0; j < cs.cells.size(); ++j) {
      double sum = 0.0;
      for (std::size_t h = 0; h < H; ++h) {
        post[h] = std::max(uniform + delta * unif(rng), 1e-6 * uniform);
        sum += post[h];
      }
      for (std::size_t h = 0; h < H; ++h) cs.completed[j * H + h] = cs.frequencies[j] * post[h] / sum;
    }
  }
  accumulate_families(table);
  return table;
}

}  // namespace dagmix::detail
