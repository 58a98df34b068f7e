#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = REBEL_CLI_PATH;
const fs::path kData = REBEL_DATA_DIR;

int run_cmd(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("rebel_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_config(const fs::path& dir, const std::string& name, const json& params,
                      const std::string& algo, int t, int batch, std::uint64_t seed) {
  json cfg;
  cfg["env"] = (kData / "canonical_bandit.json").string();
  cfg["algo"] = algo;
  cfg["seed"] = seed;
  cfg["T"] = t;
  cfg["batch_size"] = batch;
  cfg["params"] = params;
  const fs::path path = dir / name;
  std::ofstream out(path);
  out << cfg.dump(2);
  return path;
}

}  // namespace

TEST_CASE("train on the canonical environment stays inside the regret budget") {
  const fs::path dir = fresh_dir("train");
  const fs::path cfg = write_config(dir, "rebel.json", {{"eta", 1.0}, {"solver", "exact_tabular"}},
                                    "rebel", 100, 4, 3);
  const fs::path out = dir / "run";
  CHECK(run_cmd(kCli + " train --config " + cfg.string() + " --out " + out.string() +
                " > /dev/null 2>&1") == 0);

  const json summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary.at("best_iterate_suboptimality").get<double>() <= 0.2096294148);
  CHECK(fs::exists(out / "policy.json"));
  CHECK(fs::exists(out / "curve.csv"));

  // metrics stream: one line per iteration, fixed key order.
  std::ifstream metrics(out / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) {
    if (lines == 0) CHECK(line.rfind("{\"algo\":\"rebel\",\"iter\":0,\"reward\":", 0) == 0);
    ++lines;
  }
  CHECK(lines == 100);
}

TEST_CASE("zero iterations reports the initial policy") {
  const fs::path dir = fresh_dir("t0");
  const fs::path cfg = write_config(dir, "t0.json", json::object(), "rebel", 0, 1, 1);
  const fs::path out = dir / "run";
  CHECK(run_cmd(kCli + " train --config " + cfg.string() + " --out " + out.string() +
                " > /dev/null 2>&1") == 0);
  const json summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary.at("final_reward").get<double>() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(summary.at("best_iterate_suboptimality").get<double>() ==
        doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("identical seeds give byte-identical metric streams") {
  const fs::path dir = fresh_dir("determinism");
  for (const std::string algo : {"rebel", "rloo"}) {
    const fs::path cfg =
        write_config(dir, algo + ".json", {{"lr", 0.2}}, algo, 25, 8, 42);
    const fs::path out_a = dir / (algo + "_a"), out_b = dir / (algo + "_b");
    CHECK(run_cmd(kCli + " train --config " + cfg.string() + " --out " + out_a.string() +
                  " > /dev/null 2>&1") == 0);
    CHECK(run_cmd(kCli + " train --config " + cfg.string() + " --out " + out_b.string() +
                  " > /dev/null 2>&1") == 0);
    CHECK(slurp(out_a / "metrics.jsonl") == slurp(out_b / "metrics.jsonl"));
    CHECK(slurp(out_a / "summary.json") == slurp(out_b / "summary.json"));
  }
  // and a different seed actually changes a sampled-algorithm stream
  const fs::path cfg = write_config(dir, "rloo2.json", {{"lr", 0.2}}, "rloo", 25, 8, 43);
  const fs::path out_c = dir / "rloo_c";
  CHECK(run_cmd(kCli + " train --config " + cfg.string() + " --out " + out_c.string() +
                " > /dev/null 2>&1") == 0);
  CHECK(slurp(out_c / "metrics.jsonl") != slurp(dir / "rloo_a" / "metrics.jsonl"));
}

TEST_CASE("compare matches rebel against the oracle") {
  const fs::path dir = fresh_dir("compare");
  const fs::path a = write_config(dir, "rebel.json", {{"eta", 1.0}, {"solver", "exact_tabular"}},
                                  "rebel", 30, 4, 5);
  const fs::path b = write_config(dir, "md.json", {{"eta", 1.0}}, "md_oracle", 30, 4, 5);
  const fs::path out = dir / "cmp";
  CHECK(run_cmd(kCli + " compare --config " + a.string() + " --config " + b.string() + " --out " +
                out.string() + " > /dev/null 2>&1") == 0);
  const json rows = json::parse(slurp(out / "comparison.json"));
  REQUIRE(rows.size() == 2);
  const double ra = rows[0].at("final_reward").get<double>();
  const double rb = rows[1].at("final_reward").get<double>();
  CHECK(std::abs(ra - rb) <= 1e-10);
}

TEST_CASE("compare rejects bad inputs") {
  const fs::path dir = fresh_dir("compare_bad");
  const fs::path a = write_config(dir, "a.json", json::object(), "rebel", 10, 4, 1);
  CHECK(run_cmd(kCli + " compare --config " + a.string() + " > /dev/null 2>&1") != 0);

  const fs::path b = write_config(dir, "b.json", json::object(), "md_oracle", 20, 4, 1);
  CHECK(run_cmd(kCli + " compare --config " + a.string() + " --config " + b.string() +
                " > /dev/null 2>&1") != 0);  // budget mismatch: T differs
}

TEST_CASE("sweep over eta emits one summary per value") {
  const fs::path dir = fresh_dir("sweep");
  const fs::path cfg = write_config(dir, "base.json", {{"solver", "exact_tabular"}}, "rebel", 20,
                                    4, 9);
  const fs::path out = dir / "sweep_out";
  CHECK(run_cmd(kCli + " sweep --config " + cfg.string() +
                " --param eta --values 0.3,0.7,1.0,2.0 --out " + out.string() +
                " > /dev/null 2>&1") == 0);
  const json doc = json::parse(slurp(out / "sweep_summary.json"));
  CHECK(doc.at("rows").size() == 4);
  for (const std::string v : {"0.3", "0.7", "1.0", "2.0"})
    CHECK(doc.at("rows").contains(v));
}

TEST_CASE("sweep rejects an empty value list") {
  const fs::path dir = fresh_dir("sweep_empty");
  const fs::path cfg = write_config(dir, "base.json", json::object(), "rebel", 5, 2, 1);
  CHECK(run_cmd(kCli + " sweep --config " + cfg.string() + " --param eta --values ,, " +
                " > /dev/null 2>&1") != 0);
}

TEST_CASE("sweep over seeds reports the cross-seed variance") {
  const fs::path dir = fresh_dir("sweep_seed");
  const fs::path cfg = write_config(dir, "base.json", {{"lr", 0.2}}, "reinforce", 10, 8, 0);
  const fs::path out = dir / "out";
  CHECK(run_cmd(kCli + " sweep --config " + cfg.string() + " --param seed --values 1,2,3,4 --out " +
                out.string() + " > /dev/null 2>&1") == 0);
  const json doc = json::parse(slurp(out / "sweep_summary.json"));
  CHECK(doc.contains("final_reward_mean"));
  CHECK(doc.contains("final_reward_variance"));
  CHECK(doc.at("final_reward_variance").get<double>() >= 0.0);
}

TEST_CASE("self-play command on the bundled game file") {
  const fs::path dir = fresh_dir("spo");
  json cfg;
  cfg["env"] = (kData / "rock_paper_scissors.json").string();
  cfg["algo"] = "spo_rebel";
  cfg["seed"] = 2;
  cfg["T"] = 50;
  cfg["batch_size"] = 2;
  cfg["params"] = {{"eta", 0.5}};
  const fs::path path = dir / "spo.json";
  {
    std::ofstream out(path);
    out << cfg.dump(2);
  }
  const fs::path out = dir / "run";
  CHECK(run_cmd(kCli + " train --config " + path.string() + " --out " + out.string() +
                " > /dev/null 2>&1") == 0);
  const json summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary.at("duality_gap").get<double>() <= 1e-12);
}

TEST_CASE("config errors surface as nonzero exits") {
  const fs::path dir = fresh_dir("bad_config");
  {
    std::ofstream out(dir / "unknown_key.json");
    out << R"({"env": "nope.json", "algo": "rebel", "frobnicate": 1})";
  }
  CHECK(run_cmd(kCli + " train --config " + (dir / "unknown_key.json").string() +
                " > /dev/null 2>&1") != 0);
  {
    std::ofstream out(dir / "bad_algo.json");
    out << R"({"env": ")" << (kData / "canonical_bandit.json").string()
        << R"(", "algo": "mystery"})";
  }
  CHECK(run_cmd(kCli + " train --config " + (dir / "bad_algo.json").string() +
                " > /dev/null 2>&1") != 0);
}

TEST_CASE("algo override flag") {
  const fs::path dir = fresh_dir("override");
  const fs::path cfg = write_config(dir, "base.json", {{"eta", 0.8}}, "rebel", 5, 4, 1);
  const fs::path out = dir / "run";
  CHECK(run_cmd(kCli + " train --config " + cfg.string() + " --algo md_oracle --out " +
                out.string() + " > /dev/null 2>&1") == 0);
  const json summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary.at("algo").get<std::string>() == "md_oracle");
}

TEST_CASE("verify battery gates the exit status") {
  const fs::path dir = fresh_dir("verify");
  const std::string log = (dir / "verify.txt").string();
  CHECK(run_cmd(kCli + " verify --verbose > " + log + " 2>&1") == 0);
  std::ifstream in(log);
  std::string line;
  int pass_lines = 0;
  while (std::getline(in, line))
    if (line.rfind("[PASS]", 0) == 0) ++pass_lines;
  CHECK(pass_lines >= 20);

  CHECK(run_cmd(kCli + " verify --inject-fault gauss-newton-sign > /dev/null 2>&1") != 0);
  CHECK(run_cmd(kCli + " verify --inject-fault bogus > /dev/null 2>&1") != 0);
}
