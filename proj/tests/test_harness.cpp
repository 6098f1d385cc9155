#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "lyaplab/harness.hpp"

using namespace lyaplab;

namespace {

json base_config() {
  return json{{"q", 2},
              {"P", {{0.5, 0.5}, {0.25, 0.75}}},
              {"A", {{2.0, 0.0, 0.0, 0.5}, {2.0, 0.0, 0.0, 0.5}}},
              {"grid", 128},
              {"n", 20000},
              {"reps", 4},
              {"seed", 9}};
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

TEST_CASE("config parsing") {
  SECTION("minimal config fills the documented defaults") {
    json j{{"q", 2},
           {"P", {{0.5, 0.5}, {0.25, 0.75}}},
           {"A", {{2.0, 0.0, 0.0, 0.5}, {1.0, 0.0, 0.0, 1.0}}}};
    const ExperimentConfig cfg = config_from_json(j);
    CHECK(cfg.grid == 1024);
    CHECK(cfg.n == 100000);
    CHECK(cfg.reps == 32);
    CHECK(cfg.seed == 1);
    const json echo = config_echo(cfg);
    CHECK(echo["grid"] == 1024);
    CHECK(echo["n"] == 100000);
    CHECK(echo["reps"] == 32);
  }

  SECTION("non-stochastic row names the row") {
    json j = base_config();
    j["P"] = {{0.5, 0.4}, {0.25, 0.75}};
    CHECK_THROWS_MATCHES(config_from_json(j), ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("row 1")));
  }

  SECTION("wrong matrix shape names the field") {
    json j = base_config();
    j["A"] = {{2.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 1.0}};
    CHECK_THROWS_MATCHES(config_from_json(j), ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("A[0]")));
  }

  SECTION("missing required fields are reported by name") {
    json j = base_config();
    j.erase("A");
    CHECK_THROWS_MATCHES(config_from_json(j), ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("A")));
  }

  SECTION("singular cocycle matrix is rejected") {
    json j = base_config();
    j["A"] = {{1.0, 1.0, 1.0, 1.0}, {1.0, 0.0, 0.0, 1.0}};
    CHECK_THROWS_AS(config_from_json(j), ValidationError);
  }

  SECTION("bad ranges name the field") {
    json j = base_config();
    j["grid"] = 4;
    CHECK_THROWS_MATCHES(config_from_json(j), ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("grid")));
    j = base_config();
    j["sweep"] = {{"values", {0.1}}, {"family", "nonsense"}};
    CHECK_THROWS_MATCHES(config_from_json(j), ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("family")));
  }

  SECTION("unreadable path is an io error") {
    CHECK_THROWS_AS(load_config("/nonexistent/nowhere.json"), IoError);
  }

  SECTION("malformed json is a validation error") {
    const std::string path = "/tmp/lyaplab_test_bad.json";
    std::ofstream(path) << "{ not json";
    CHECK_THROWS_MATCHES(load_config(path), ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("parse")));
    std::remove(path.c_str());
  }
}

TEST_CASE("lyapunov report") {
  const ExperimentConfig cfg = config_from_json(base_config());
  const json rep = run_lyapunov(cfg);

  SECTION("hyperbolic oracle values") {
    CHECK_THAT(rep["lambda_plus"]["value"].get<double>(),
               Catch::Matchers::WithinAbs(std::log(2.0), 1e-10));
    CHECK_THAT(rep["lambda_minus_direct"]["value"].get<double>(),
               Catch::Matchers::WithinAbs(-std::log(2.0), 1e-10));
    CHECK(rep["consistent"].get<bool>());
    CHECK(rep["sum_residual"].get<double>() < 1e-10);
    CHECK_THAT(rep["furstenberg"]["lambda_plus"].get<double>(),
               Catch::Matchers::WithinAbs(std::log(2.0), 5e-3));
    CHECK(rep["furstenberg"]["stationary_residual"].get<double>() <= 1e-6);
  }

  SECTION("report echoes the config") {
    CHECK(rep["config"] == config_echo(cfg));
  }

  SECTION("identical config gives identical bytes") {
    const json rep2 = run_lyapunov(config_from_json(base_config()));
    CHECK(rep.dump(2) == rep2.dump(2));
  }

  SECTION("rotation cocycle reports zero exponents") {
    json j = base_config();
    const double c = std::cos(0.7), s = std::sin(0.7);
    j["A"] = {{c, -s, s, c}, {c, -s, s, c}};
    const json rot = run_lyapunov(config_from_json(j));
    CHECK_THAT(rot["lambda_plus"]["value"].get<double>(),
               Catch::Matchers::WithinAbs(0.0, 1e-10));
    CHECK_THAT(rot["furstenberg"]["lambda_plus"].get<double>(),
               Catch::Matchers::WithinAbs(0.0, 1e-10));
  }
}

TEST_CASE("sweep csv") {
  json j = base_config();
  j["n"] = 5000;
  j["reps"] = 3;
  j["grid"] = 64;

  SECTION("rotation family produces the documented columns") {
    j["sweep"] = {{"values", {0.0, 0.01, 0.1}}, {"family", "rotation_perturb"}};
    const std::string csv = run_sweep(config_from_json(j));
    std::stringstream ss(csv);
    std::string line;
    REQUIRE(std::getline(ss, line));
    CHECK(line ==
          "t,lambda_plus_mc,stderr,lambda_plus_furstenberg,lambda_minus,"
          "sum_residual,stationary_residual,reason");
    int rows = 0;
    while (std::getline(ss, line)) {
      const auto fields = split_csv_line(line);
      REQUIRE(fields.size() == 8);
      CHECK(fields[7].empty());  // no skipped rows here
      ++rows;
    }
    CHECK(rows == 3);
  }

  SECTION("t values are echoed verbatim in column 1") {
    j["sweep"] = {{"values", {0.0, 0.25, 0.5}}, {"family", "rotation_perturb"}};
    const std::string csv = run_sweep(config_from_json(j));
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    const char* want[] = {"0", "0.25", "0.5"};
    for (const char* w : want) {
      REQUIRE(std::getline(ss, line));
      CHECK(split_csv_line(line)[0] == w);
    }
  }

  SECTION("markov blend with identity cocycle keeps lambda at zero") {
    j["A"] = {{1.0, 0.0, 0.0, 1.0}, {1.0, 0.0, 0.0, 1.0}};
    j["sweep"] = {{"values", {0.0, 0.3, 0.7}},
                  {"family", "markov_blend"},
                  {"Q", {{0.6, 0.4}, {0.5, 0.5}}}};
    const std::string csv = run_sweep(config_from_json(j));
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    while (std::getline(ss, line)) {
      const auto fields = split_csv_line(line);
      CHECK_THAT(std::stod(fields[1]), Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
  }

  SECTION("singular blend point is skipped with a reason") {
    // at t=0.5 the blend of diag(2,0.5) and diag(-2,-0.5) vanishes
    j["sweep"] = {{"values", {0.0, 0.5}},
                  {"family", "matrix_blend"},
                  {"B", {{-2.0, 0.0, 0.0, -0.5}, {-2.0, 0.0, 0.0, -0.5}}}};
    const std::string csv = run_sweep(config_from_json(j));
    std::stringstream ss(csv);
    std::string line;
    std::getline(ss, line);
    REQUIRE(std::getline(ss, line));
    CHECK(split_csv_line(line)[7].empty());
    REQUIRE(std::getline(ss, line));
    const auto fields = split_csv_line(line);
    CHECK(fields[0] == "0.5");
    CHECK(fields[1].empty());
    CHECK_FALSE(fields[7].empty());
  }

  SECTION("thread count does not change the bytes") {
    j["sweep"] = {{"values", {0.0, 0.02, 0.05, 0.08}},
                  {"family", "rotation_perturb"}};
    const ExperimentConfig cfg = config_from_json(j);
    CHECK(run_sweep(cfg, 1) == run_sweep(cfg, 4));
  }

  SECTION("missing sweep block is a validation error") {
    CHECK_THROWS_MATCHES(run_sweep(config_from_json(base_config())),
                         ValidationError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("sweep")));
  }
}

TEST_CASE("energy decay csv") {
  json j = base_config();
  j["grid"] = 64;
  j["energy"] = {{"delta", 0.25},
                 {"u1_center", kPi / 2.0},
                 {"u1_radius", 0.15},
                 {"iters", 4}};

  SECTION("certified run has four columns and valid bounds") {
    const std::string csv = run_energy_decay(config_from_json(j));
    std::stringstream ss(csv);
    std::string line;
    REQUIRE(std::getline(ss, line));
    CHECK(line == "iteration,symbol,energy,bound_rhs");
    CHECK(split_csv_line(line).size() == 4);
    std::vector<double> energy, rhs;
    bool summary_seen = false;
    while (std::getline(ss, line)) {
      if (line.rfind("#", 0) == 0) {
        if (line.find("C_emp=") != std::string::npos) summary_seen = true;
        continue;
      }
      const auto fields = split_csv_line(line);
      REQUIRE(fields.size() == 4);
      energy.push_back(std::stod(fields[2]));
      rhs.push_back(std::stod(fields[3]));
    }
    CHECK(summary_seen);
    REQUIRE(energy.size() >= 2);
    for (std::size_t k = 0; k + 1 < energy.size(); ++k)
      CHECK(energy[k + 1] <= rhs[k] + 1e-9);
  }

  SECTION("identity cocycle fails certification with the symbol named") {
    j["A"] = {{1.0, 0.0, 0.0, 1.0}, {1.0, 0.0, 0.0, 1.0}};
    CHECK_THROWS_MATCHES(
        run_energy_decay(config_from_json(j)), ValidationError,
        Catch::Matchers::MessageMatches(
            Catch::Matchers::ContainsSubstring("certification failed")));
  }

  SECTION("missing energy block is a validation error") {
    CHECK_THROWS_AS(run_energy_decay(config_from_json(base_config())),
                    ValidationError);
  }
}

TEST_CASE("emit writes atomically with exact round-trips") {
  const std::string path = "/tmp/lyaplab_test_emit.csv";
  const double x = 0.1 + 0.2;  // not exactly 0.3
  const std::string text = "a,b\n" + fmt(x) + ",1\n";
  emit(text, path);
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == text);
  // 17 significant digits recover the double bit-exactly
  std::stringstream parse(fmt(x));
  double back;
  parse >> back;
  CHECK(back == x);
  std::remove(path.c_str());

  CHECK_THROWS_AS(emit("x", "/nonexistent_dir/file.csv"), IoError);
}

TEST_CASE("fmt round-trips random doubles") {
  Rng rng(123);
  for (int k = 0; k < 1000; ++k) {
    const double x = (rng.next_double() - 0.5) * std::pow(10.0, (k % 40) - 20);
    std::stringstream parse(fmt(x));
    double back;
    parse >> back;
    CHECK(back == x);
  }
}
