#include "disc/error.hpp"
#include "disc/experiment.hpp"
#include "disc/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

using namespace disc;

namespace {

std::string binary() {
  const char* path = std::getenv("DISC_LAB");
  return path ? path : "./disc_lab";
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("disc_lab_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = binary() + " " + args + " > " + (log.string() + ".out") + " 2> " + log.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
  const fs::path path = dir / "config.json";
  write_text(path, body);
  return path;
}

const char* kSmall = R"({"data": {"p1": 4, "p2": 2, "n": 300, "k": 2},
  "train": {"max_epochs": 3}, "eval": {"test_size": 500}})";

}  // namespace

TEST_CASE("minimal config resolves to defaults and round-trips") {
  const ExperimentConfig c = config_from_json(Json::parse(R"({"data": {"p1": 4, "p2": 2, "n": 100, "k": 3}})"));
  CHECK(c.train.mixup.beta1 == 2.0);
  CHECK(c.train.mixup.beta2 == 2.0);
  CHECK(c.bank.n_pos == 150);
  CHECK(c.bank.n_neg == 150);
  CHECK(c.train.k == 3);
  CHECK(c.data.mu.size() == 4);
  CHECK(c.data.mu(0) == doctest::Approx(0.5));
  const Json echoed = config_to_json(c);
  CHECK(config_to_json(config_from_json(echoed)) == echoed);
}

TEST_CASE("unknown keys are named in the error") {
  CHECK_THROWS_WITH_AS(config_from_json(Json::parse(R"({"data": {"p1": 4, "p2": 2, "n": 100, "k": 3},
                                                        "train": {"learning_rte": 0.1}})")),
                       doctest::Contains("learning_rte"), ConfigError);
  CHECK_THROWS_WITH_AS(config_from_json(Json::parse(R"({"data": {"p1": 4, "p2": 2, "n": 100}})")),
                       doctest::Contains("k"), ConfigError);
  CHECK_THROWS_AS(config_from_json(Json::parse(R"({"data": {"p1": "four", "p2": 2, "n": 100, "k": 3}})")),
                  ConfigError);
}

TEST_CASE("seed ranges and method lists") {
  CHECK(parse_seed_range("0..3") == std::vector<std::uint64_t>{0, 1, 2, 3});
  CHECK(parse_seed_range("5,2") == std::vector<std::uint64_t>{5, 2});
  CHECK_THROWS_AS(parse_seed_range("3..1"), ConfigError);
  CHECK(parse_methods("erm,disc").size() == 2);
  CHECK_THROWS_AS(parse_methods("erm,gdro"), ConfigError);
}

TEST_CASE("gen-data then train writes a run directory") {
  const fs::path dir = scratch("pipeline");
  const fs::path config = write_config(dir, kSmall);
  REQUIRE(run("gen-data --config " + config.string() + " --out " + (dir / "data").string(), dir / "gen.log") == 0);
  for (const char* f : {"train.csv", "test.csv", "patterns.json", "bank.json", "resolved_config.json"}) {
    CHECK(fs::exists(dir / "data" / f));
  }
  REQUIRE(run("train --config " + config.string() + " --method erm --data " + (dir / "data").string() + " --out " +
                  (dir / "run").string(),
              dir / "train.log") == 0);
  for (const char* f : {"resolved_config.json", "metrics.csv", "report.json", "seed", "model.json"}) {
    CHECK(fs::exists(dir / "run" / f));
  }
  const std::string metrics = read_text(dir / "run" / "metrics.csv");
  CHECK(metrics.rfind("epoch,loss,avg_acc,worst_acc,mean_spurious_sensitivity\n", 0) == 0);

  REQUIRE(run("train --config " + config.string() + " --method disc --out " + (dir / "disc").string(),
              dir / "disc.log") == 0);
  CHECK(fs::exists(dir / "disc" / "sensitivity.csv"));
  CHECK(fs::exists(dir / "disc" / "clusters.csv"));
  CHECK(fs::exists(dir / "disc" / "cavs.csv"));
}

TEST_CASE("seed flag gives bit-identical runs") {
  const fs::path dir = scratch("seed");
  const fs::path config = write_config(dir, kSmall);
  for (const char* name : {"a", "b"}) {
    REQUIRE(run("train --config " + config.string() + " --method disc --seed 7 --out " + (dir / name).string(),
                dir / (std::string(name) + ".log")) == 0);
  }
  CHECK(read_text(dir / "a" / "model.json") == read_text(dir / "b" / "model.json"));
  CHECK(read_text(dir / "a" / "metrics.csv") == read_text(dir / "b" / "metrics.csv"));
  CHECK(read_text(dir / "a" / "seed") == read_text(dir / "b" / "seed"));
  REQUIRE(run("train --config " + config.string() + " --method disc --seed 8 --out " + (dir / "c").string(),
              dir / "c.log") == 0);
  CHECK(read_text(dir / "a" / "model.json") != read_text(dir / "c" / "model.json"));
}

TEST_CASE("sweep emits one directory per cell and a paired summary") {
  const fs::path dir = scratch("sweep");
  const fs::path config = write_config(dir, kSmall);
  REQUIRE(run("sweep --config " + config.string() + " --methods erm,disc --seeds 0..9 --out " + (dir / "grid").string(),
              dir / "sweep.log") == 0);
  int runs = 0;
  for (const auto& entry : fs::directory_iterator(dir / "grid")) runs += entry.is_directory() ? 1 : 0;
  CHECK(runs == 20);
  const Json summary = read_json(dir / "grid" / "summary.json");
  CHECK(summary["runs"].size() == 20);
  REQUIRE(summary.contains("disc_vs_erm"));
  CHECK(summary["disc_vs_erm"]["pairs"] == 10);

  REQUIRE(run("report --out " + (dir / "grid").string(), dir / "report.log") == 0);
  CHECK(fs::exists(dir / "grid" / "report" / "summary.csv"));
  CHECK(fs::exists(dir / "grid" / "report" / "cumulative_sensitivity.csv"));
  const std::string before = read_text(dir / "grid" / "report" / "summary.csv");
  REQUIRE(run("report --out " + (dir / "grid").string(), dir / "report2.log") == 0);
  CHECK(read_text(dir / "grid" / "report" / "summary.csv") == before);
}

TEST_CASE("sweep-k writes the silhouette table") {
  const fs::path dir = scratch("sweepk");
  const fs::path config = write_config(dir, kSmall);
  REQUIRE(run("sweep-k --config " + config.string() + " --k 3 --out " + (dir / "k.csv").string(), dir / "k.log") == 0);
  std::istringstream lines(read_text(dir / "k.csv"));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  CHECK(count == 3);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("exit");
  const fs::path bad = write_config(dir, R"({"data": {"p1": 4, "p2": 2, "n": 300, "k": 2}, "train": {"learning_rte": 1}})");
  CHECK(run("train --config " + bad.string(), dir / "bad.log") == 1);
  CHECK(read_text(dir / "bad.log").find("learning_rte") != std::string::npos);
  CHECK(run("train --config " + bad.string() + " --bogus", dir / "flag.log") == 1);
  CHECK(read_text(dir / "flag.log").find("Usage") != std::string::npos);
  CHECK(run("", dir / "none.log") == 1);
}
