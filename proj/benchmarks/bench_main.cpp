#include <benchmark/benchmark.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include "dagmix/causal.hpp"
#include "dagmix/em.hpp"
#include "dagmix/inference.hpp"
#include "dagmix/serialize.hpp"
#include "dagmix/table.hpp"

using namespace dagmix;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Education {
  ModelSpec model;
  ParamVector beta;
  Dataset data;

  static const Education& get() {
    static const Education e = [] {
      const std::string dir = std::string(DAGMIX_SOURCE_DIR) + "/fixtures/education/";
      Education out;
      out.model = parse_model(slurp(dir + "model.json"));
      out.beta = parameters_from_json(out.model, slurp(dir + "params.json"));
      out.data = sample_data(out.model, out.beta, 3000, 42).data.grouped();
      return out;
    }();
    return e;
  }
};

void BM_EStep(benchmark::State& state) {
  const auto& e = Education::get();
  for (auto _ : state) benchmark::DoNotOptimize(e_step(e.model, e.beta, e.data).second);
}
BENCHMARK(BM_EStep)->Unit(benchmark::kMillisecond);

void BM_MStep(benchmark::State& state) {
  const auto& e = Education::get();
  const auto completed = e_step(e.model, e.beta, e.data).first;
  for (auto _ : state) benchmark::DoNotOptimize(m_step(e.model, completed, e.beta));
}
BENCHMARK(BM_MStep)->Unit(benchmark::kMillisecond);

void BM_JointDistribution(benchmark::State& state) {
  const auto& e = Education::get();
  for (auto _ : state) benchmark::DoNotOptimize(joint_distribution(e.model, e.beta).total());
}
BENCHMARK(BM_JointDistribution)->Unit(benchmark::kMillisecond);

void BM_Marginalize(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::vector<int> vars(n), levels(n, 3);
  std::iota(vars.begin(), vars.end(), 0);
  std::vector<double> values(cell_count(levels), 1.0);
  const LexTable t(vars, levels, values);
  const std::vector<int> keep{1, n - 2};
  for (auto _ : state) benchmark::DoNotOptimize(marginalize(t, keep).total());
  state.SetItemsProcessed(state.iterations() * static_cast<long>(t.size()));
}
BENCHMARK(BM_Marginalize)->Arg(8)->Arg(12);

void BM_UnitScores(benchmark::State& state) {
  const auto& e = Education::get();
  for (auto _ : state) benchmark::DoNotOptimize(unit_scores(e.model, e.beta, e.data).scores.sum());
}
BENCHMARK(BM_UnitScores)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
