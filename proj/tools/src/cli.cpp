#include "dagmix/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "dagmix/causal.hpp"
#include "dagmix/data.hpp"
#include "dagmix/em.hpp"
#include "dagmix/inference.hpp"
#include "dagmix/model.hpp"
#include "dagmix/serialize.hpp"
#include "manifest.hpp"

#ifndef DAGMIX_VERSION
#define DAGMIX_VERSION "unknown"
#endif

namespace dagmix::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunConfig {
  std::string command;
  std::string model_path;
  std::string data_path;
  std::string params_path;
  std::string query_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int restarts = 10;
  int max_iter = 5000;
  double tol_loglik = 1e-8;
  double tol_param = 1e-6;
  int threads = 0;
  std::string format;
  int points = 20;
  long long n = -1;
  bool with_latent = false;
  bool canonicalize = false;
  bool no_se = false;
};

class Session {
 public:
  Session(const RunConfig& cfg, const std::vector<std::string>& argv, std::ostream& out)
      : cfg_(cfg), argv_(argv), out_(out) {
    seed_ = cfg.seed ? *cfg.seed : fresh_seed();
  }

  int execute() {
    fs::create_directories(cfg_.out_dir);
    model_ = parse_model(input("model", cfg_.model_path));
    if (cfg_.command == "describe") return describe();
    if (cfg_.command == "fit") return fit_command();
    if (cfg_.command == "simulate") return simulate();
    if (cfg_.command == "identify") return identify();
    return effects();
  }

 private:
  static std::uint64_t fresh_seed() {
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) | rd();
  }

  std::string input(const std::string& role, const std::string& path) {
    if (path.empty()) throw ArgumentError("--" + role + " is required for '" + cfg_.command + "'");
    if (!fs::is_regular_file(path)) throw ArgumentError("input file '" + path + "' does not exist");
    std::string text = read_file(path);
    inputs_[role] = {{"path", path}, {"sha256", sha256_hex(text)}};
    return text;
  }

  std::string format_or(const std::string& fallback) const { return cfg_.format.empty() ? fallback : cfg_.format; }

  void emit(const std::string& name, const std::string& contents, bool echo) {
    const fs::path path = fs::path(cfg_.out_dir) / name;
    write_atomically(path, contents);
    outputs_[name] = sha256_hex(contents);
    if (echo) out_ << contents;
  }

  int finish() {
    json options{{"restarts", cfg_.restarts},     {"max_iter", cfg_.max_iter}, {"tol_loglik", cfg_.tol_loglik},
                 {"tol_param", cfg_.tol_param},   {"threads", cfg_.threads},   {"format", cfg_.format},
                 {"points", cfg_.points},         {"n", cfg_.n},               {"with_latent", cfg_.with_latent},
                 {"canonicalize", cfg_.canonicalize}, {"no_se", cfg_.no_se}};
    json manifest{{"command", cfg_.command},
                  {"argv", argv_},
                  {"seed", seed_},
                  {"versions",
                   {{"dagmix", DAGMIX_VERSION},
                    {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"compiler", __VERSION__}}},
                  {"options", options},
                  {"inputs", inputs_},
                  {"outputs", outputs_}};
    write_atomically(fs::path(cfg_.out_dir) / "manifest.json", manifest.dump(2) + "\n");
    return ExitCode::ok;
  }

  Dataset load_data() { return read_csv(model_, input("data", cfg_.data_path)); }

  FitOptions fit_options() const {
    FitOptions o;
    o.max_iter = cfg_.max_iter;
    o.tol_loglik = cfg_.tol_loglik;
    o.tol_param = cfg_.tol_param;
    o.n_restarts = cfg_.restarts;
    o.seed = seed_;
    o.threads = cfg_.threads;
    o.canonicalize = cfg_.canonicalize;
    return o;
  }

  int describe() {
    const std::string fmt = format_or("text");
    if (fmt == "json") {
      emit("describe.json", describe_json(model_), false);
    } else if (fmt == "text") {
      emit("describe.txt", describe_text(model_), true);
    } else {
      throw ArgumentError("describe supports --format text or json");
    }
    return finish();
  }

  FitResult run_fit(const Dataset& data) {
    FitResult result = fit(model_, data, fit_options());
    if (!cfg_.no_se) {
      ScoreOptions so;
      so.threads = cfg_.threads > 0 ? cfg_.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
      attach_standard_errors(result, model_, data, so);
    }
    return result;
  }

  int fit_command() {
    const Dataset data = load_data();
    const FitResult result = run_fit(data);
    const std::string fmt = format_or("json");
    if (fmt == "json") {
      emit("fit.json", fit_result_to_json(model_, result), false);
    } else if (fmt == "csv") {
      emit("fit.csv", fit_result_to_csv(model_, result), false);
    } else {
      emit("fit.txt", fit_result_to_text(model_, result), true);
    }
    return finish();
  }

  ParamVector parameters() {
    if (!cfg_.params_path.empty()) return parameters_from_json(model_, input("params", cfg_.params_path));
    return sample_parameters(model_, seed_);
  }

  int simulate() {
    if (cfg_.n <= 0) throw ArgumentError("simulate needs --n with a positive sample size");
    const ParamVector beta = parameters();
    std::vector<std::vector<double>> rows;
    if (!model_.covariate_names.empty()) {
      std::mt19937_64 rng(seed_ ^ 0x5bd1e995ULL);
      std::normal_distribution<double> normal;
      rows.assign(static_cast<std::size_t>(cfg_.n), std::vector<double>(model_.covariate_names.size()));
      for (auto& row : rows)
        for (double& x : row) x = normal(rng);
    }
    const Sample sample = sample_data(model_, beta, static_cast<std::size_t>(cfg_.n), seed_, rows, cfg_.with_latent);
    const std::string fmt = format_or("csv");
    if (fmt != "csv") throw ArgumentError("simulate writes csv only");
    std::string csv = write_csv(model_, sample.data);
    if (cfg_.with_latent) csv = append_latent(csv, sample);
    emit("data.csv", csv, false);
    if (cfg_.params_path.empty()) emit("params.json", parameters_to_json(model_, beta), false);
    return finish();
  }

  std::string append_latent(const std::string& csv, const Sample& sample) const {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    std::getline(in, line);
    out << line;
    for (int l : model_.latent_nodes()) out << ',' << model_.nodes[l].name;
    out << '\n';
    for (const auto& latent : sample.latent) {
      std::getline(in, line);
      out << line;
      for (int v : latent) out << ',' << v;
      out << '\n';
    }
    return out.str();
  }

  int identify() {
    if (cfg_.points < 1) throw ArgumentError("--points must be positive");
    const IdentifiabilityReport report = identifiability_check(model_, cfg_.points, seed_);
    const std::string fmt = format_or("json");
    if (fmt == "json") {
      emit("identify.json", identifiability_to_json(report), false);
    } else if (fmt == "text") {
      emit("identify.txt", identifiability_to_text(report), true);
    } else {
      std::ostringstream csv;
      csv.precision(17);
      csv << "point,rank,sigma_min,sigma_max,pass\n";
      for (std::size_t t = 0; t < report.points.size(); ++t) {
        const auto& p = report.points[t];
        csv << t << ',' << p.rank << ',' << p.sigma_min << ',' << p.sigma_max << ',' << (p.pass ? 1 : 0) << '\n';
      }
      emit("identify.csv", csv.str(), false);
    }
    return finish();
  }

  int effects() {
    const auto queries = parse_effect_queries(model_, input("query", cfg_.query_path));
    ParamVector beta;
    if (!cfg_.params_path.empty()) {
      beta = parameters_from_json(model_, input("params", cfg_.params_path));
    } else if (!cfg_.data_path.empty()) {
      const FitResult result = run_fit(load_data());
      emit("fit.json", fit_result_to_json(model_, result), false);
      beta = result.beta;
    } else {
      throw ArgumentError("effects needs --params (a fit result) or --data to fit first");
    }
    std::vector<EffectRow> rows;
    for (const auto& q : queries) rows.push_back({q.label, q.thresholds, evaluate_effect(model_, beta, q)});
    const std::string fmt = format_or("json");
    if (fmt == "json") {
      emit("effects.json", effects_to_json(model_, queries, rows), false);
    } else if (fmt == "csv") {
      emit("effects.csv", effects_to_csv(rows), false);
    } else {
      emit("effects.txt", effects_to_text(model_, queries, rows), true);
    }
    return finish();
  }

  RunConfig cfg_;
  std::vector<std::string> argv_;
  std::ostream& out_;
  std::uint64_t seed_ = 0;
  ModelSpec model_;
  json inputs_ = json::object();
  json outputs_ = json::object();
};

int report_error(std::ostream& err, const std::string& out_dir, int code, const std::string& kind,
                 const std::string& message) {
  const json record{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  err << record.dump() << '\n';
  std::error_code ec;
  if (!out_dir.empty() && fs::is_directory(out_dir, ec)) {
    try {
      write_atomically(fs::path(out_dir) / "error.json", record.dump(2) + "\n");
    } catch (...) {
    }
  }
  return code;
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--model", cfg.model_path, "model document (JSON)");
  sub->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
  sub->add_option("--seed", cfg.seed, "random seed (default: fresh, recorded in manifest.json)");
  sub->add_option("--threads", cfg.threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  sub->add_option("--format", cfg.format, "output format")->check(CLI::IsMember({"json", "csv", "text"}));
}

void add_fitting(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--data", cfg.data_path, "data file (CSV)");
  sub->add_option("--restarts", cfg.restarts, "random restarts")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--max-iter", cfg.max_iter, "EM iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--tol-loglik", cfg.tol_loglik, "relative log-likelihood tolerance")->capture_default_str();
  sub->add_option("--tol-param", cfg.tol_param, "parameter change tolerance")->capture_default_str();
  sub->add_flag("--canonicalize", cfg.canonicalize, "order latent labels by first-child effect");
  sub->add_flag("--no-se", cfg.no_se, "skip standard errors");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Latent-variable DAG models for ordered categorical data", "dagmix"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", DAGMIX_VERSION);

  auto* fit_cmd = app.add_subcommand("fit", "fit a model by EM");
  add_common(fit_cmd, cfg);
  add_fitting(fit_cmd, cfg);

  auto* sim_cmd = app.add_subcommand("simulate", "draw a dataset from a model");
  add_common(sim_cmd, cfg);
  sim_cmd->add_option("--n", cfg.n, "number of records");
  sim_cmd->add_option("--params", cfg.params_path, "coefficients (default: random, written to params.json)");
  sim_cmd->add_flag("--with-latent", cfg.with_latent, "include latent columns");

  auto* id_cmd = app.add_subcommand("identify", "numerical local identifiability check");
  add_common(id_cmd, cfg);
  id_cmd->add_option("--points", cfg.points, "random parameter points")->capture_default_str();

  auto* eff_cmd = app.add_subcommand("effects", "causal effects as survival ratios");
  add_common(eff_cmd, cfg);
  add_fitting(eff_cmd, cfg);
  eff_cmd->add_option("--query", cfg.query_path, "effect query document (JSON)");
  eff_cmd->add_option("--params", cfg.params_path, "fitted coefficients (fit.json)");

  auto* desc_cmd = app.add_subcommand("describe", "print the model table");
  add_common(desc_cmd, cfg);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ExitCode::ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ExitCode::ok;
  } catch (const CLI::CallForVersion&) {
    out << DAGMIX_VERSION << '\n';
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    return report_error(err, "", ExitCode::usage, "usage", e.what());
  }
  cfg.command = app.get_subcommands().front()->get_name();

  try {
    Session session(cfg, args, out);
    return session.execute();
  } catch (const ArgumentError& e) {
    return report_error(err, cfg.out_dir, ExitCode::usage, e.kind(), e.what());
  } catch (const ModelError& e) {
    return report_error(err, cfg.out_dir, ExitCode::invalid_input, e.kind(), e.what());
  } catch (const DataError& e) {
    return report_error(err, cfg.out_dir, ExitCode::invalid_input, e.kind(), e.what());
  } catch (const NumericalError& e) {
    return report_error(err, cfg.out_dir, ExitCode::numerical, e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error(err, cfg.out_dir, ExitCode::invalid_input, "io", e.what());
  }
}

}  // namespace dagmix::cli
