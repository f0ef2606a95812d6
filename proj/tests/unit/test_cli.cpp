#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dagmix/causal.hpp"
#include "dagmix/cli.hpp"
#include "dagmix/serialize.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dagmix::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dagmix_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const std::string education = std::string(DAGMIX_SOURCE_DIR) + "/fixtures/education/model.json";

}  // namespace

TEST_CASE("describe prints the education table") {
  const auto dir = scratch("describe");
  const Run r = cli({"describe", "--model", education, "--out", dir.string()});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> rows;
  std::getline(lines, line);
  CHECK(line.find("n.cat.") != std::string::npos);
  while (std::getline(lines, line) && !line.empty()) rows.push_back(line);
  REQUIRE(rows.size() == 14);
  CHECK(rows[7].find("U^p, I^7, I^11, I^16, S^m, S^f") != std::string::npos);
  CHECK(rows[7].rfind("8   U^c", 0) == 0);
  CHECK(fs::exists(dir / "describe.txt"));
  const json manifest = json::parse(slurp(dir / "manifest.json"));
  CHECK(manifest["command"] == "describe");
  CHECK(manifest["inputs"]["model"]["sha256"].get<std::string>().size() == 64);
}

TEST_CASE("usage errors") {
  const auto dir = scratch("usage");
  const Run zero = cli({"simulate", "--model", education, "--n", "0", "--out", dir.string()});
  CHECK(zero.code == 2);
  const json record = json::parse(zero.err);
  CHECK(record["error"]["exit_code"] == 2);
  CHECK(fs::exists(dir / "error.json"));
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({}).code == 2);
  CHECK(cli({"fit", "--model", education, "--format", "xml"}).code == 2);
  CHECK(cli({"fit", "--model", "/no/such/model.json", "--out", dir.string()}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("invalid model and data exit with 3") {
  const auto dir = scratch("invalid");
  write(dir / "bad.json", R"({"nodes":[{"name":"A","categories":2,"parents":["B"]},{"name":"B","categories":2}]})");
  const Run bad = cli({"describe", "--model", (dir / "bad.json").string(), "--out", dir.string()});
  CHECK(bad.code == 3);
  CHECK(json::parse(bad.err)["error"]["kind"] == "model_semantic");

  write(dir / "lca.json", dagmix::emit_model(testing::lca_model(3)));
  write(dir / "data.csv", "A1,A2,A3\n0,1,5\n");
  const Run data = cli({"fit", "--model", (dir / "lca.json").string(), "--data", (dir / "data.csv").string(), "--out",
                        dir.string()});
  CHECK(data.code == 3);
  CHECK(json::parse(data.err)["error"]["kind"] == "data");
}

TEST_CASE("numerical failures exit with 4") {
  const auto dir = scratch("numerical");
  write(dir / "lca.json", dagmix::emit_model(testing::lca_model(2)));
  const Run r = cli({"identify", "--model", (dir / "lca.json").string(), "--points", "2", "--seed", "1", "--out",
                     dir.string()});
  CHECK(r.code == 0);  // an unidentified verdict is a result, not an error
  CHECK(json::parse(slurp(dir / "identify.json"))["identified"] == false);

  write(dir / "chain.json", dagmix::emit_model(testing::chain_model()));
  write(dir / "params.json", R"({"beta":[0, -800, 0, -800, 0]})");
  write(dir / "q.json", R"({"outcome":"Y","treatment":{"x0":{"X":0},"x1":{"X":1}}})");
  const Run e = cli({"effects", "--model", (dir / "chain.json").string(), "--params", (dir / "params.json").string(),
                     "--query", (dir / "q.json").string(), "--out", dir.string()});
  CHECK(e.code == 4);
}

TEST_CASE("simulate, fit, effects end to end; fit is reproducible from the manifest seed") {
  const auto dir = scratch("e2e");
  write(dir / "model.json", dagmix::emit_model(testing::mediation_model()));
  write(dir / "truth.json", dagmix::parameters_to_json(testing::mediation_model(), testing::mediation_params()));
  write(dir / "q.json", R"({"outcome":"Y","treatment":{"x0":{"X":0},"x1":{"X":1}},"mediators":["M"]})");
  const std::string model = (dir / "model.json").string();

  REQUIRE(cli({"simulate", "--model", model, "--params", (dir / "truth.json").string(), "--n", "20000", "--seed", "3",
               "--out", (dir / "sim").string()})
              .code == 0);
  const std::string data = (dir / "sim" / "data.csv").string();
  REQUIRE(cli({"fit", "--model", model, "--data", data, "--restarts", "2", "--out", (dir / "fit1").string()}).code == 0);
  const json manifest = json::parse(slurp(dir / "fit1" / "manifest.json"));
  const std::string seed = std::to_string(manifest["seed"].get<std::uint64_t>());
  REQUIRE(cli({"fit", "--model", model, "--data", data, "--restarts", "2", "--seed", seed, "--out",
               (dir / "fit2").string()})
              .code == 0);
  CHECK(slurp(dir / "fit1" / "fit.json") == slurp(dir / "fit2" / "fit.json"));
  CHECK(manifest["outputs"]["fit.json"] == json::parse(slurp(dir / "fit2" / "manifest.json"))["outputs"]["fit.json"]);
  CHECK_FALSE(fs::exists(dir / "fit1" / "fit.json.partial"));

  const Run eff = cli({"effects", "--model", model, "--params", (dir / "fit1" / "fit.json").string(), "--query",
                       (dir / "q.json").string(), "--out", (dir / "eff").string()});
  REQUIRE(eff.code == 0);
  const json effects = json::parse(slurp(dir / "eff" / "effects.json"));
  const double ratio = effects["effects"][0]["ratios"][0]["ratio"];
  // Truth 0.66 / 0.26; n = 20000 keeps the estimate within a few percent.
  CHECK(std::abs(ratio - 0.66 / 0.26) < 0.25);

  const Run text = cli({"effects", "--model", model, "--params", (dir / "fit1" / "fit.json").string(), "--query",
                        (dir / "q.json").string(), "--format", "text", "--out", (dir / "eff").string()});
  CHECK(text.out.find("Y>0") != std::string::npos);
}

TEST_CASE("simulate writes latent columns on request and ignores them on read") {
  const auto dir = scratch("latent");
  write(dir / "lca.json", dagmix::emit_model(testing::lca_model(3)));
  REQUIRE(cli({"simulate", "--model", (dir / "lca.json").string(), "--n", "50", "--seed", "4", "--with-latent",
               "--out", dir.string()})
              .code == 0);
  const std::string csv = slurp(dir / "data.csv");
  CHECK(csv.rfind("A1,A2,A3,U\n", 0) == 0);
  CHECK(fs::exists(dir / "params.json"));
  CHECK(cli({"fit", "--model", (dir / "lca.json").string(), "--data", (dir / "data.csv").string(), "--restarts", "1",
             "--seed", "1", "--format", "text", "--out", dir.string()})
            .code == 0);
}
