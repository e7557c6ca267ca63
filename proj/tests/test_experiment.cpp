#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bdlat/errors.hpp"
#include "bdlat/experiment.hpp"
#include "json.hpp"

using namespace bdlat;
namespace fs = std::filesystem;

namespace {

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("bdlat-test-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const fs::path& dir, const std::string& name, const std::string& text) {
  std::ofstream(dir / name) << text;
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

int cli(const fs::path& config, const fs::path& out_dir, std::string* err_text = nullptr,
        std::optional<unsigned> workers = std::nullopt) {
  std::ostringstream out, err;
  const int code = run_cli(config, std::nullopt, workers, out_dir, out, err);
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("defaults are filled in and echoed") {
  auto c = parse("experiment = run\n[model]\ntype = contact\n");
  CHECK(c.seed == 0);
  CHECK(c.replicates == 1000);
  CHECK(c.algorithm == Algorithm::Gillespie);
  CHECK(c.window->radius() == 5);
  CHECK(c.resolved["model"]["lambda"] == 1.0);
  CHECK(c.resolved["window"]["radius"] == 5);
  CHECK(c.resolved["params"]["replicate"] == "0");
  CHECK(c.params.at("replicate") == "0");

  auto s = parse("experiment = survival-sweep\n");
  CHECK(s.window->radius() == 20);
  CHECK(s.model == nullptr);
}

TEST_CASE("unknown keys and blocks are rejected") {
  CHECK_THROWS_AS(parse("experiment = run\ncolour = red\n[model]\ntype = frozen\n"), ConfigError);
  CHECK_THROWS_AS(parse("experiment = run\n[model]\ntype = frozen\nspeed = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("experiment = run\n[extras]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("experiment = teleport\n"), ConfigError);
  CHECK_THROWS_AS(parse("seed = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("experiment = run\nreplicates = many\n[model]\ntype = frozen\n"), ConfigError);
  CHECK_THROWS_AS(parse("experiment = run\n[model]\ntype = contact\n[params]\ncap = 3\n"), ConfigError);
}

TEST_CASE("config hash follows the resolved config only") {
  auto a = parse("experiment = run\nworkers = 1\n[model]\ntype = contact\n");
  auto b = parse("experiment = run\nworkers = 4\n[model]\ntype = contact\n");
  auto c = parse("experiment = run\nseed = 1\n[model]\ntype = contact\n");
  auto d = parse("experiment = run\nseed = 0\n[model]\ntype = contact\nlambda = 1\n");
  CHECK(a.config_hash() == b.config_hash());
  CHECK(a.config_hash() != c.config_hash());
  CHECK(a.config_hash() == d.config_hash());
}

TEST_CASE("value parsers") {
  auto k = parse_kernel("box:0.5:2", 1);
  CHECK(k.range() == 2);
  CHECK(k(Site{2}) == 0.5);
  CHECK(parse_kernel("point:0.2", 2)(Site{0, 0}) == 0.2);
  CHECK(parse_kernel("zero", 1).support().empty());
  auto list = parse_kernel("[[[1], 0.25], [[-1], 0.25]]", 1);
  CHECK(list(Site{-1}) == 0.25);
  CHECK_THROWS_AS(parse_kernel("gauss:1", 1), ConfigError);

  auto sites = parse_sites("0,0; 1,0", 2);
  CHECK(sites == std::vector<Site>{Site{0, 0}, Site{1, 0}});
  CHECK_THROWS_AS(parse_sites("0,0;1", 2), ConfigError);

  auto w = Window::ball(1, 3);
  auto eta = parse_counts("0:2; -1:1", w);
  CHECK(eta(Site{0}) == 2);
  CHECK(eta(Site{-1}) == 1);
  CHECK_THROWS_AS(parse_counts("7:1", w), ConfigError);
  CHECK(parse_reals("0.1, 0.5,1") == std::vector<double>{0.1, 0.5, 1.0});
}

TEST_CASE("missing config file exits 2") {
  std::string err;
  CHECK(cli("/nonexistent/bdlat.ini", scratch("missing"), &err) == exit_code::config);
  CHECK(err.rfind("error kind=config message=\"", 0) == 0);
  CHECK(err.find('\n') == err.size() - 1);
}

TEST_CASE("bad model parameters exit 2") {
  auto dir = scratch("badmodel");
  auto cfg = write_file(dir, "c.ini", "experiment = run\n[model]\ntype = bpdl\nb0 = x\n");
  CHECK(cli(cfg, dir / "out") == exit_code::config);
}

TEST_CASE("explosion guard exits 4") {
  auto dir = scratch("explode");
  auto cfg = write_file(dir, "c.ini",
                        "experiment = run\nhorizon = 100\nmax_events = 50\n[model]\ntype = branch-local\nlambda = 3\n"
                        "g = linear\n[initial]\ncounts = 0:5\n");
  std::string err;
  CHECK(cli(cfg, dir / "out", &err) == exit_code::explosion);
  CHECK(err.rfind("error kind=explosion", 0) == 0);
}

TEST_CASE("contact from the empty configuration logs nothing") {
  auto dir = scratch("empty");
  auto cfg = write_file(dir, "c.ini", "experiment = run\nhorizon = 5\n[model]\ntype = contact\n");
  CHECK(cli(cfg, dir / "out") == exit_code::ok);
  std::ifstream log(dir / "out" / "events.jsonl");
  std::string header, extra;
  REQUIRE(std::getline(log, header));
  CHECK_FALSE(std::getline(log, extra));
  auto h = nlohmann::json::parse(header);
  CHECK(h["model"] == "contact");

  auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(manifest["experiment"] == "run");
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest["outputs"].size() == 2);
  CHECK(manifest["config"]["model"]["type"] == "contact");
}

TEST_CASE("oracle comparison on a one-site instance") {
  auto dir = scratch("oracle");
  auto cfg = write_file(dir, "c.ini",
                        "experiment = oracle-compare\nreplicates = 20000\nseed = 3\n"
                        "[window]\nsites = 0\n[model]\ntype = bpdl\nb0 = 1\nm = 1\n"
                        "[initial]\ncounts = 0:0\n[params]\ntv_tol = 0.03\n");
  CHECK(cli(cfg, dir / "out") == exit_code::ok);
  CHECK(fs::exists(dir / "out" / "oracle.csv"));
  CHECK(fs::exists(dir / "out" / "oracle_t2.csv"));

  // an impossible tolerance makes the same run an assertion failure
  auto strict = write_file(dir, "s.ini",
                           "experiment = oracle-compare\nreplicates = 200\nseed = 3\n"
                           "[window]\nsites = 0\n[model]\ntype = bpdl\n[initial]\ncounts = 0:0\n"
                           "[params]\ntv_tol = 0\n");
  CHECK(cli(strict, dir / "strict") == exit_code::assertion);
}

TEST_CASE("outputs do not depend on the worker count") {
  auto dir = scratch("workers");
  auto cfg = write_file(dir, "c.ini",
                        "experiment = martingale\nreplicates = 400\nseed = 5\n[window]\nradius = 3\n"
                        "[model]\ntype = contact\nlambda = 1.5\n[initial]\ncounts = 0:1\n");
  CHECK(cli(cfg, dir / "one", nullptr, 1) == exit_code::ok);
  CHECK(cli(cfg, dir / "three", nullptr, 3) == exit_code::ok);
  CHECK(slurp(dir / "one" / "residual.csv") == slurp(dir / "three" / "residual.csv"));
  auto m1 = nlohmann::json::parse(slurp(dir / "one" / "manifest.json"));
  auto m3 = nlohmann::json::parse(slurp(dir / "three" / "manifest.json"));
  CHECK(m1["content_hash"] == m3["content_hash"]);
}

TEST_CASE("every experiment tag runs on a tiny config") {
  const std::map<std::string, std::string> configs = {
      {"coupling",
       "replicates = 50\n[model]\ntype = bpdl\na_plus = box:0.3:1\na_minus = point:0.2\n[initial]\ncounts = 0:1\n"
       "[initial2]\ncounts = 0:2\n[params]\nprobe_pairs = 200\n"},
      {"contraction",
       "replicates = 200\n[model]\ntype = bpdl\na_plus = box:0.3:1\na_minus = box:0.2:1\n[initial]\ncounts = 0:1\n"
       "[initial2]\ncounts = 0:2\n[kernel]\nn_max = 40\n"},
      {"drift",
       "[window]\nradius = 10\n[model]\ntype = bpdl\na_plus = box:0.1:1\na_minus = point:0.2\n[params]\nsamples = 200\n"},
      {"occupation",
       "replicates = 20\n[window]\nradius = 10\n[model]\ntype = bpdl\na_plus = box:0.1:1\na_minus = point:0.2\n"
       "[params]\nsamples = 200\nn = 5\nr = 20\n"},
      {"survival-sweep", "replicates = 50\nhorizon = 5\n[window]\nradius = 5\n[params]\nlambdas = 0,2\n"},
      {"bracket",
       "replicates = 100\nhorizon = 5\n[window]\nradius = 5\n[params]\ntol = 1\nmax_replicates = 200\n"},
      {"window-convergence", "replicates = 100\nhorizon = 0.5\n[model]\ntype = contact\n[initial]\ncounts = 0:1\n"},
  };
  for (const auto& [tag, body] : configs) {
    CAPTURE(tag);
    auto dir = scratch("tag-" + tag);
    auto cfg = write_file(dir, "c.ini", "experiment = " + tag + "\nseed = 2\n" + body);
    std::string err;
    const int code = cli(cfg, dir / "out", &err);
    CAPTURE(err);
    CHECK(code == exit_code::ok);
    CHECK(fs::exists(dir / "out" / "manifest.json"));
  }
}
