#ifndef LYAPLAB_HARNESS_HPP
#define LYAPLAB_HARNESS_HPP

#include <atomic>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lyaplab/coupling_ops.hpp"
#include "lyaplab/stationary.hpp"
#include "lyaplab/transport.hpp"

namespace lyaplab {

using json = nlohmann::ordered_json;

// 17 significant digits round-trip doubles bit-exactly.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

struct SweepConfig {
  std::vector<double> values;
  std::string family;            // matrix_blend | rotation_perturb | markov_blend
  std::vector<Mat2> blend_target;              // B, matrix_blend only
  std::vector<std::vector<double>> markov_target;  // Q rows, markov_blend only
};

struct EnergyConfig {
  double delta = 0.25;
  double u1_center = 0.0;
  double u1_radius = 0.1;
  int l = 0;        // 0: take the certified l
  int iters = 8;
  double point = std::numeric_limits<double>::quiet_NaN();  // default u1_center
  std::vector<Mat2> certify;  // cocycle used for certification; empty: A
};

struct ExperimentConfig {
  int q = 0;
  std::vector<std::vector<double>> P_rows;
  std::vector<Mat2> A;
  int grid = 1024;
  std::size_t n = 100000;
  int reps = 32;
  std::uint64_t seed = 1;
  std::optional<SweepConfig> sweep;
  std::optional<EnergyConfig> energy;
  std::string out;

  StochasticMatrix stochastic() const { return StochasticMatrix(P_rows); }
  CocycleMap cocycle() const { return CocycleMap(A); }
};

namespace detail {

inline Mat2 parse_mat2(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 4)
    throw ValidationError(field + ": expected a row-major 2x2 matrix as a "
                          "4-element array");
  for (const auto& e : j)
    if (!e.is_number())
      throw ValidationError(field + ": matrix entries must be numbers");
  return Mat2{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
              j[3].get<double>()};
}

inline std::vector<Mat2> parse_cocycle_field(const json& j, int q,
                                             const std::string& field) {
  if (!j.is_array() || static_cast<int>(j.size()) != q)
    throw ValidationError(field + ": expected " + std::to_string(q) +
                          " matrices, one per symbol");
  std::vector<Mat2> out;
  for (int i = 0; i < q; ++i)
    out.push_back(parse_mat2(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<std::vector<double>> parse_rows(const json& j, int q,
                                                   const std::string& field) {
  if (!j.is_array() || static_cast<int>(j.size()) != q)
    throw ValidationError(field + ": expected " + std::to_string(q) + " rows");
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < q; ++i) {
    const json& row = j[i];
    if (!row.is_array() || static_cast<int>(row.size()) != q)
      throw ValidationError(field + " row " + std::to_string(i + 1) +
                            " must have " + std::to_string(q) + " entries");
    std::vector<double> r;
    for (const auto& e : row) {
      if (!e.is_number())
        throw ValidationError(field + " row " + std::to_string(i + 1) +
                              " has a non-numeric entry");
      r.push_back(e.get<double>());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// spread per-point seeds so replicate XOR patterns cannot collide
inline std::uint64_t point_seed(std::uint64_t seed, std::size_t index) {
  return seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (!j.is_object()) throw ValidationError("config root must be an object");
  if (!j.contains("q") || !j["q"].is_number_integer())
    throw ValidationError("q: required integer field");
  cfg.q = j["q"].get<int>();
  if (cfg.q < 2 || cfg.q > 64)
    throw ValidationError("q: must lie in [2, 64]");
  if (!j.contains("P")) throw ValidationError("P: required field");
  cfg.P_rows = detail::parse_rows(j["P"], cfg.q, "P");
  if (!j.contains("A")) throw ValidationError("A: required field");
  cfg.A = detail::parse_cocycle_field(j["A"], cfg.q, "A");

  if (j.contains("grid")) {
    if (!j["grid"].is_number_integer() || j["grid"].get<int>() < 8)
      throw ValidationError("grid: must be an integer >= 8");
    cfg.grid = j["grid"].get<int>();
  }
  if (j.contains("n")) {
    if (!j["n"].is_number_integer() || j["n"].get<long long>() < 1)
      throw ValidationError("n: must be a positive integer");
    cfg.n = j["n"].get<std::size_t>();
  }
  if (j.contains("reps")) {
    if (!j["reps"].is_number_integer() || j["reps"].get<int>() < 1)
      throw ValidationError("reps: must be a positive integer");
    cfg.reps = j["reps"].get<int>();
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer())
      throw ValidationError("seed: must be an integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("out")) {
    if (!j["out"].is_string()) throw ValidationError("out: must be a string");
    cfg.out = j["out"].get<std::string>();
  }

  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    if (!s.is_object()) throw ValidationError("sweep: must be an object");
    SweepConfig sw;
    if (!s.contains("values") || !s["values"].is_array() || s["values"].empty())
      throw ValidationError("sweep.values: required non-empty array");
    for (const auto& v : s["values"]) {
      if (!v.is_number())
        throw ValidationError("sweep.values: entries must be numbers");
      sw.values.push_back(v.get<double>());
    }
    if (!s.contains("family") || !s["family"].is_string())
      throw ValidationError("sweep.family: required string field");
    sw.family = s["family"].get<std::string>();
    if (sw.family != "matrix_blend" && sw.family != "rotation_perturb" &&
        sw.family != "markov_blend")
      throw ValidationError("sweep.family: unknown family '" + sw.family +
                            "'; expected matrix_blend, rotation_perturb or "
                            "markov_blend");
    if (sw.family == "matrix_blend") {
      if (!s.contains("B"))
        throw ValidationError("sweep.B: required for matrix_blend");
      sw.blend_target = detail::parse_cocycle_field(s["B"], cfg.q, "sweep.B");
    }
    if (sw.family == "markov_blend") {
      if (!s.contains("Q"))
        throw ValidationError("sweep.Q: required for markov_blend");
      sw.markov_target = detail::parse_rows(s["Q"], cfg.q, "sweep.Q");
    }
    cfg.sweep = std::move(sw);
  }

  if (j.contains("energy")) {
    const json& e = j["energy"];
    if (!e.is_object()) throw ValidationError("energy: must be an object");
    EnergyConfig en;
    if (e.contains("delta")) {
      if (!e["delta"].is_number())
        throw ValidationError("energy.delta: must be a number");
      en.delta = e["delta"].get<double>();
    }
    if (!(en.delta > 0.0 && en.delta <= 1.0))
      throw ValidationError("energy.delta: must lie in (0, 1]");
    if (!e.contains("u1_center") || !e["u1_center"].is_number())
      throw ValidationError("energy.u1_center: required number field");
    en.u1_center = e["u1_center"].get<double>();
    if (!e.contains("u1_radius") || !e["u1_radius"].is_number())
      throw ValidationError("energy.u1_radius: required number field");
    en.u1_radius = e["u1_radius"].get<double>();
    if (!(en.u1_radius > 0.0 && en.u1_radius < kPi / 4.0))
      throw ValidationError("energy.u1_radius: must lie in (0, pi/4)");
    if (e.contains("l")) {
      if (!e["l"].is_number_integer() || e["l"].get<int>() < 0)
        throw ValidationError("energy.l: must be a nonnegative integer");
      en.l = e["l"].get<int>();
    }
    if (e.contains("iters")) {
      if (!e["iters"].is_number_integer() || e["iters"].get<int>() < 1)
        throw ValidationError("energy.iters: must be a positive integer");
      en.iters = e["iters"].get<int>();
    }
    if (e.contains("point")) {
      if (!e["point"].is_number())
        throw ValidationError("energy.point: must be a number");
      en.point = e["point"].get<double>();
    }
    if (e.contains("certify"))
      en.certify = detail::parse_cocycle_field(e["certify"], cfg.q,
                                               "energy.certify");
    cfg.energy = std::move(en);
  }

  // constructor-level validation surfaces bad rows / singular matrices
  cfg.stochastic();
  cfg.cocycle();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
  return config_from_json(j);
}

inline json config_echo(const ExperimentConfig& cfg) {
  json j;
  j["q"] = cfg.q;
  j["P"] = cfg.P_rows;
  json a = json::array();
  for (const Mat2& m : cfg.A) a.push_back({m.a, m.b, m.c, m.d});
  j["A"] = std::move(a);
  j["grid"] = cfg.grid;
  j["n"] = cfg.n;
  j["reps"] = cfg.reps;
  j["seed"] = cfg.seed;
  if (cfg.sweep) {
    json s;
    s["values"] = cfg.sweep->values;
    s["family"] = cfg.sweep->family;
    if (!cfg.sweep->blend_target.empty()) {
      json b = json::array();
      for (const Mat2& m : cfg.sweep->blend_target)
        b.push_back({m.a, m.b, m.c, m.d});
      s["B"] = std::move(b);
    }
    if (!cfg.sweep->markov_target.empty()) s["Q"] = cfg.sweep->markov_target;
    j["sweep"] = std::move(s);
  }
  if (cfg.energy) {
    json e;
    e["delta"] = cfg.energy->delta;
    e["u1_center"] = cfg.energy->u1_center;
    e["u1_radius"] = cfg.energy->u1_radius;
    e["l"] = cfg.energy->l;
    e["iters"] = cfg.energy->iters;
    if (std::isfinite(cfg.energy->point)) e["point"] = cfg.energy->point;
    if (!cfg.energy->certify.empty()) {
      json c = json::array();
      for (const Mat2& m : cfg.energy->certify)
        c.push_back({m.a, m.b, m.c, m.d});
      e["certify"] = std::move(c);
    }
    j["energy"] = std::move(e);
  }
  return j;
}

inline json estimate_json(const ExponentEstimate& e) {
  json j;
  j["value"] = e.value;
  j["stderr"] = e.stderr_;
  j["n"] = e.n;
  j["reps"] = e.reps;
  j["method"] = e.method;
  return j;
}

inline json run_lyapunov(const ExperimentConfig& cfg) {
  const StochasticMatrix P = cfg.stochastic();
  const CocycleMap A = cfg.cocycle();
  const LambdaPair pair = lambda_pair(A, P, cfg.n, cfg.reps, cfg.seed);
  const ProjectiveGrid grid(cfg.grid);
  const FurstenbergMax fb = maximize_furstenberg(A, P, grid);

  json j;
  j["config"] = config_echo(cfg);
  j["lambda_plus"] = estimate_json(pair.plus);
  j["lambda_minus_direct"] = estimate_json(pair.minus_direct);
  j["lambda_minus_via_sum"] = pair.minus_via_sum;
  j["sum_exact"] = lyapunov_sum_exact(A, P);
  j["sum_residual"] =
      std::abs(pair.plus.value + pair.minus_direct.value - lyapunov_sum_exact(A, P));
  j["consistent"] = pair.consistent;
  json f;
  f["lambda_plus"] = fb.value;
  f["stationary_residual"] = fb.residual;
  f["winner"] = fb.winner;
  j["furstenberg"] = std::move(f);
  return j;
}

inline json run_stationary(const ExperimentConfig& cfg) {
  const StochasticMatrix P = cfg.stochastic();
  const CocycleMap A = cfg.cocycle();
  const ProjectiveGrid grid(cfg.grid);
  const FurstenbergMax fb = maximize_furstenberg(A, P, grid);
  // refinement at 2N separates atoms from sharp densities
  const ProjectiveGrid fine(2 * cfg.grid);
  const FurstenbergMax fb2 = maximize_furstenberg(A, P, fine);
  const auto atoms = detect_atoms(fb.eta, 0.05, &fb2.eta);

  json j;
  j["config"] = config_echo(cfg);
  j["furstenberg_lambda_plus"] = fb.value;
  j["stationary_residual"] = fb.residual;
  j["winner"] = fb.winner;
  json alist = json::array();
  for (const auto& a : atoms) {
    json e;
    e["symbol"] = a.symbol;
    e["bin"] = a.bin;
    e["theta"] = grid.center(a.bin).theta;
    e["mass"] = a.mass;
    alist.push_back(std::move(e));
  }
  j["atoms"] = std::move(alist);
  if (!atoms.empty()) {
    const auto rep = verify_atomic_invariant_set(A, fb.eta, 0.05, &fb2.eta);
    json r;
    r["atom_bins"] = rep.atom_bins;
    r["closed_under_cocycle"] = rep.closed_under_cocycle;
    r["weights_uniform"] = rep.weights_uniform;
    r["violations"] = rep.violations;
    j["invariant_set"] = std::move(r);
  }
  return j;
}

inline json run_expanding(const ExperimentConfig& cfg) {
  const StochasticMatrix P = cfg.stochastic();
  const CocycleMap A = cfg.cocycle();
  const FixedDirections dirs = invariant_points(A);
  json j;
  j["config"] = config_echo(cfg);
  j["all_directions_invariant"] = dirs.all;
  json pts = json::array();
  for (const auto& v : dirs.points) {
    json e;
    e["theta"] = v.theta;
    const auto cert = check_expanding(A, P, v);
    e["certified"] = cert.has_value();
    if (cert) {
      e["l"] = cert->l;
      e["c"] = cert->c;
      const auto delta =
          delta_moment_scan(A, P, v, cert->l, cert->c, default_delta_grid());
      if (delta) e["delta"] = *delta;
    }
    pts.push_back(std::move(e));
  }
  j["invariant_points"] = std::move(pts);
  return j;
}

namespace detail {

struct SweepSystem {
  std::vector<Mat2> maps;
  std::vector<std::vector<double>> rows;
};

inline SweepSystem sweep_system(const ExperimentConfig& cfg, double t) {
  const SweepConfig& sw = *cfg.sweep;
  SweepSystem sys{cfg.A, cfg.P_rows};
  if (sw.family == "matrix_blend") {
    for (int i = 0; i < cfg.q; ++i) {
      const Mat2& a = cfg.A[i];
      const Mat2& b = sw.blend_target[i];
      sys.maps[i] = Mat2{(1.0 - t) * a.a + t * b.a, (1.0 - t) * a.b + t * b.b,
                         (1.0 - t) * a.c + t * b.c, (1.0 - t) * a.d + t * b.d};
    }
  } else if (sw.family == "rotation_perturb") {
    for (int i = 0; i < cfg.q; ++i) sys.maps[i] = Mat2::rotation(t) * cfg.A[i];
  } else {  // markov_blend
    for (int i = 0; i < cfg.q; ++i)
      for (int k = 0; k < cfg.q; ++k)
        sys.rows[i][k] =
            (1.0 - t) * cfg.P_rows[i][k] + t * sw.markov_target[i][k];
  }
  return sys;
}

inline std::string sweep_row(const ExperimentConfig& cfg, std::size_t index) {
  const double t = cfg.sweep->values[index];
  std::string row = fmt(t);
  try {
    const SweepSystem sys = sweep_system(cfg, t);
    const CocycleMap A(sys.maps);  // rejects singular A_t
    const StochasticMatrix P(sys.rows);
    const LambdaPair pair =
        lambda_pair(A, P, cfg.n, cfg.reps, point_seed(cfg.seed, index));
    const FurstenbergMax fb =
        maximize_furstenberg(A, P, ProjectiveGrid(cfg.grid));
    const double sum_residual = std::abs(
        pair.plus.value + pair.minus_direct.value - lyapunov_sum_exact(A, P));
    row += "," + fmt(pair.plus.value) + "," + fmt(pair.plus.stderr_) + "," +
           fmt(fb.value) + "," + fmt(pair.minus_direct.value) + "," +
           fmt(sum_residual) + "," + fmt(fb.residual) + ",";
  } catch (const std::exception& e) {
    std::string reason = e.what();
    for (char& ch : reason)
      if (ch == ',' || ch == '\n') ch = ';';
    row += ",,,,,,," + reason;
  }
  return row + "\n";
}

}  // namespace detail

inline std::string run_sweep(const ExperimentConfig& cfg, int threads = 1) {
  if (!cfg.sweep)
    throw ValidationError("sweep: config block required for this command");
  const std::size_t np = cfg.sweep->values.size();
  std::vector<std::string> rows(np);
  if (threads < 1) throw ValidationError("threads must be >= 1");
  if (threads == 1) {
    for (std::size_t k = 0; k < np; ++k) rows[k] = detail::sweep_row(cfg, k);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (std::size_t k = next.fetch_add(1); k < np; k = next.fetch_add(1))
          rows[k] = detail::sweep_row(cfg, k);
      });
    for (auto& th : pool) th.join();
  }
  std::string csv =
      "t,lambda_plus_mc,stderr,lambda_plus_furstenberg,lambda_minus,"
      "sum_residual,stationary_residual,reason\n";
  for (const std::string& r : rows) csv += r;
  return csv;
}

inline std::string run_energy_decay(const ExperimentConfig& cfg) {
  if (!cfg.energy)
    throw ValidationError("energy: config block required for this command");
  const EnergyConfig& en = *cfg.energy;
  const StochasticMatrix P = cfg.stochastic();
  const CocycleMap A = cfg.cocycle();
  const CocycleMap certA(en.certify.empty() ? cfg.A : en.certify);
  const ProjectivePoint v{std::isfinite(en.point) ? en.point : en.u1_center};

  auto cert = check_expanding(certA, P, v);
  if (!cert) {
    // name the symbol whose integral blocks the certificate
    std::string detail_msg;
    for (int i = 1; i <= P.q(); ++i) {
      const double integral = expanding_integral(certA, P, v, 1, i);
      if (integral <= 0.0) {
        detail_msg = "symbol " + std::to_string(i) +
                     " has l=1 expanding integral " + fmt(integral) +
                     " <= 0, so no c > 0 satisfies the 4*c*p_i bound";
        break;
      }
    }
    throw ValidationError("expanding certification failed at theta=" +
                          fmt(v.theta) + ": " + detail_msg);
  }
  if (en.l > 0) cert->l = en.l;

  EnergyParams params;
  params.delta = en.delta;
  params.u1 = Arc{en.u1_center, en.u1_radius};

  // start: a 0.7 bump on the two central U1 bins over a 0.3 uniform
  // background, identical across symbols
  const ProjectiveGrid grid(cfg.grid);
  MeasureVector eta(grid, cfg.q);
  const int hb = grid.bin_of(en.u1_center);
  for (int j = 1; j <= cfg.q; ++j) {
    GridMeasure& m = eta.component(j);
    for (int b = 0; b < grid.bins(); ++b) m.mass(b) = 0.3 / grid.bins();
    m.mass(hb) += 0.35;
    m.mass((hb + 1) % grid.bins()) += 0.35;
  }

  const ContractionTrace trace =
      contraction_experiment(A, P, eta, params, *cert, en.delta, en.iters);

  std::string csv = "iteration,symbol,energy,bound_rhs\n";
  for (const auto& e : trace.entries) {
    const double rhs =
        trace.empirical_c + trace.contraction_factor * e.total_energy;
    csv += std::to_string(e.iteration) + ",total," + fmt(e.total_energy) +
           "," + fmt(rhs) + "\n";
  }
  csv += "# C_emp=" + fmt(trace.empirical_c) +
         " contraction_factor=" + fmt(trace.contraction_factor) +
         " c=" + fmt(trace.c) + " delta=" + fmt(trace.delta) +
         " l=" + std::to_string(cert->l) +
         " truncated=" + (trace.truncated ? std::string("1") : std::string("0")) +
         " product_start=" + (trace.product_start ? std::string("1")
                                                  : std::string("0")) +
         "\n";
  if (trace.truncated) csv += "# truncation_reason=" + trace.truncation_reason + "\n";
  return csv;
}

// Atomic write: temp file in the same directory, then rename.
inline void emit(const std::string& text, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot open " + tmp + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("cannot rename " + tmp + " to " + path);
}

}  // namespace lyaplab

#endif
