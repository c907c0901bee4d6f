#include <catch_amalgamated.hpp>

#include <filesystem>

#include "wfdual/config.hpp"
#include "wfdual/output.hpp"

using namespace wfdual;

namespace {
const std::filesystem::path kConfigs = std::filesystem::path(WFDUAL_SOURCE_DIR) / "configs";
}

TEST_CASE("shipped configs load and round-trip exactly") {
  std::size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(kConfigs)) {
    if (entry.path().extension() != ".toml") continue;
    ++n;
    INFO(entry.path());
    const auto c = load_config(entry.path().string());
    const auto again = parse_config(to_toml(c));
    CHECK(again == c);
    CHECK(config_hash(again) == config_hash(c));
  }
  CHECK(n >= 5);
}

TEST_CASE("defaults fill missing tables") {
  const auto c = parse_config("points = [0.0]\n[drift]\ncoeffs = [0.0]\n");
  CHECK(c.master_seed == 1);
  CHECK(c.horizon == 0.25);
  CHECK(c.discretization.dx == 1.0 / 32);
  CHECK(c.k_mode() == std::nullopt);
  const auto ts = c.resolved_sample_times();
  REQUIRE(ts.size() == 11);
  CHECK(ts.front() == 0.0);
  CHECK(ts.back() == 0.25);
}

TEST_CASE("binomial drift block") {
  const auto c = parse_config("[drift]\nbinomial_q = 0.5\ntruncate_k = 5\n");
  const auto s = c.drift.build();
  CHECK(s.coeffs().size() == 6);
  CHECK(s.b1() == -1.0);
  CHECK(parse_config("[drift]\nbinomial_q = 0.5\n").drift.build().coeffs().size() == 9);
}

TEST_CASE("unknown keys are rejected") {
  CHECK_THROWS_AS(parse_config("horizonn = 1.0\n[drift]\ncoeffs = [0.0]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[drift]\ncoeffs = [0.0]\nb_infinity = 1.0\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[drift]\ncoeffs = [0.0]\n[bogus]\nx = 1\n"), ConfigError);
}

TEST_CASE("type and semantic errors are reported as ConfigError") {
  CHECK_THROWS_AS(parse_config("horizon = \"long\"\n[drift]\ncoeffs = [0.0]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("master_seed = -1\n[drift]\ncoeffs = [0.0]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[drift]\ncoeffs = [0.0, \"x\"]\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[drift]\ncoeffs = []\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[drift]\ncoeffs = [0.0]\nbinomial_q = 0.5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[drift]\ncoeffs = [0.0]\n[truncation]\nk_mode = \"sometimes\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[drift]\ncoeffs = [0.0]\n[discretization]\ndx = 0.3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("[drift]\ncoeffs = [0.0]\n[initial]\nkind = \"wave\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("horizon = [\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.toml"), ConfigError);
}

TEST_CASE("hash ignores threads and output_dir, tracks everything else") {
  auto c = load_config((kConfigs / "shiga.toml").string());
  const auto h = config_hash(c);
  CHECK(config_hash_hex(c).size() == 16);
  c.threads = 7;
  c.output_dir = "elsewhere";
  CHECK(config_hash(c) == h);
  c.horizon = 0.5;
  CHECK(config_hash(c) != h);
  c.horizon = 0.25;
  c.reps.rhs += 1;
  CHECK(config_hash(c) != h);
}

TEST_CASE("CSV and JSON outputs carry the hash") {
  const auto dir = std::filesystem::temp_directory_path() / "wfdual_config_test";
  std::filesystem::create_directories(dir);
  {
    CsvWriter w((dir / "a.csv").string(), "00ff", {"t", "u"}, "branching");
    w.row(0.5, 1);
  }
  std::ifstream in(dir / "a.csv");
  std::string l1, l2, l3, l4;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  std::getline(in, l4);
  CHECK(l1 == "# config_hash: 00ff");
  CHECK(l2 == "# check: branching");
  CHECK(l3 == "t,u");
  CHECK(l4 == "0.5,1");
  write_json((dir / "b.json").string(), nlohmann::json{{"x", 1}}, "00ff");
  std::ifstream jin(dir / "b.json");
  const auto j = nlohmann::json::parse(jin);
  CHECK(j["config_hash"] == "00ff");
  CHECK(j["x"] == 1);
  std::filesystem::remove_all(dir);
}
