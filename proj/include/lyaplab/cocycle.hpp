#ifndef LYAPLAB_COCYCLE_HPP
#define LYAPLAB_COCYCLE_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "lyaplab/errors.hpp"
#include "lyaplab/markov.hpp"
#include "lyaplab/mat2.hpp"

namespace lyaplab {

constexpr double kPi = std::numbers::pi;

// A line through the origin in R^2, as an angle in [0, pi).
struct ProjectivePoint {
  double theta = 0.0;

  static ProjectivePoint from_angle(double t) {
    double r = std::fmod(t, kPi);
    if (r < 0.0) r += kPi;
    if (r >= kPi) r = 0.0;  // guards fmod landing exactly on pi
    return {r};
  }

  Vec2 unit_vector() const { return {std::cos(theta), std::sin(theta)}; }
};

// Angular distance on the half-circle (before the diameter-1 rescaling
// used by the energy module).
inline double angular_distance(ProjectivePoint u, ProjectivePoint w) {
  double d = std::abs(u.theta - w.theta);
  return std::min(d, kPi - d);
}

inline ProjectivePoint projective_action(const Mat2& alpha, ProjectivePoint v) {
  const Vec2 img = alpha.apply(v.unit_vector());
  return ProjectivePoint::from_angle(std::atan2(img.y, img.x));
}

// Magnitude of the 1-dimensional projective derivative at v. For d=2
// this is |det alpha| / ||alpha v||^2 with v unit.
inline double projective_derivative(const Mat2& alpha, ProjectivePoint v) {
  const Vec2 img = alpha.apply(v.unit_vector());
  const double n2 = img.x * img.x + img.y * img.y;
  return std::abs(alpha.det()) / n2;
}

inline double matrix_conorm(const Mat2& alpha) { return alpha.conorm(); }

// One invertible matrix per symbol.
class CocycleMap {
 public:
  explicit CocycleMap(std::vector<Mat2> maps) : maps_(std::move(maps)) {
    if (maps_.empty()) throw ValidationError("cocycle needs at least one matrix");
    for (std::size_t i = 0; i < maps_.size(); ++i) {
      const Mat2& m = maps_[i];
      if (std::abs(m.det()) < 1e-12 * m.frobenius_sq())
        throw ValidationError("matrix for symbol " + std::to_string(i + 1) +
                              " is singular");
    }
  }

  int q() const { return static_cast<int>(maps_.size()); }
  const Mat2& at(int i) const { return maps_[i - 1]; }  // 1-based
  const std::vector<Mat2>& maps() const { return maps_; }

  // A^n(x) = A(i_{n-1}) ... A(i_1) A(i_0); empty word gives the identity.
  Mat2 word_product(const Word& w) const {
    w.validate(q());
    Mat2 prod = Mat2::identity();
    for (int s : w.symbols) prod = at(s) * prod;
    return prod;
  }

 private:
  std::vector<Mat2> maps_;
};

// Projective fixed points of one matrix, i.e. its real eigendirections.
struct FixedDirections {
  bool all = false;  // scalar multiple of the identity
  std::vector<ProjectivePoint> points;
};

inline FixedDirections fixed_directions(const Mat2& m) {
  FixedDirections out;
  const double scale = std::sqrt(m.frobenius_sq());
  const double tol = 1e-12 * std::max(1.0, scale);
  if (std::abs(m.b) <= tol && std::abs(m.c) <= tol &&
      std::abs(m.a - m.d) <= tol) {
    out.all = true;
    return out;
  }
  const double tr = m.a + m.d;
  const double disc = (m.a - m.d) * (m.a - m.d) + 4.0 * m.b * m.c;
  if (disc < -tol * tol) return out;  // complex eigenvalues: no fixed line
  const double sq = std::sqrt(std::max(0.0, disc));
  for (double lam : {0.5 * (tr + sq), 0.5 * (tr - sq)}) {
    double vx, vy;
    if (std::abs(m.b) > tol) {
      vx = m.b;
      vy = lam - m.a;
    } else if (std::abs(m.c) > tol) {
      vx = lam - m.d;
      vy = m.c;
    } else {
      // diagonal matrix: eigenvectors are the axes
      vx = (std::abs(lam - m.a) <= std::abs(lam - m.d)) ? 1.0 : 0.0;
      vy = 1.0 - vx;
    }
    ProjectivePoint pt = ProjectivePoint::from_angle(std::atan2(vy, vx));
    bool dup = false;
    for (const auto& other : out.points)
      if (angular_distance(pt, other) < 1e-9) dup = true;
    if (!dup) out.points.push_back(pt);
    if (sq <= tol) break;  // repeated eigenvalue, single direction
  }
  return out;
}

// All v with A(i)v = v for every i; all=true when every A(i) is a
// scalar multiple of the identity.
inline FixedDirections invariant_points(const CocycleMap& A) {
  FixedDirections acc;
  acc.all = true;
  for (int i = 1; i <= A.q(); ++i) {
    FixedDirections fi = fixed_directions(A.at(i));
    if (fi.all) continue;
    if (acc.all) {
      acc = fi;
      continue;
    }
    std::vector<ProjectivePoint> kept;
    for (const auto& pt : acc.points)
      for (const auto& cand : fi.points)
        if (angular_distance(pt, cand) < 1e-9) kept.push_back(pt);
    acc.points = std::move(kept);
    acc.all = false;
  }
  return acc;
}

inline bool is_invariant_point(const CocycleMap& A, ProjectivePoint v,
                               double tol = 1e-9) {
  for (int i = 1; i <= A.q(); ++i)
    if (angular_distance(projective_action(A.at(i), v), v) > tol) return false;
  return true;
}

// log of the l-step projective derivative along the fixed orbit of an
// invariant point: sum of log(|det A(s)| / ||A(s) v||^2) over the word.
inline double log_orbit_derivative(const CocycleMap& A, const Word& w,
                                   ProjectivePoint v) {
  double acc = 0.0;
  for (int s : w.symbols) acc += std::log(projective_derivative(A.at(s), v));
  return acc;
}

// Exact integral over the cylinder [0;i] of the log l-step derivative
// at an invariant point: sum over words of length l starting with i of
// cylinder mass times log-derivative.
inline double expanding_integral(const CocycleMap& A, const StochasticMatrix& P,
                                 ProjectivePoint v, int l, int symbol) {
  if (!is_invariant_point(A, v))
    throw ValidationError("point is not invariant for the cocycle");
  if (symbol < 1 || symbol > P.q())
    throw ValidationError("symbol out of range");
  double acc = 0.0;
  for (const auto& [w, mass] : P.enumerate_cylinders(l)) {
    if (w.symbols.front() != symbol || mass == 0.0) continue;
    acc += mass * log_orbit_derivative(A, w, v);
  }
  return acc;
}

struct ExpandingCertificate {
  int l = 0;
  double c = 0.0;
};

// Smallest l <= l_max making every per-symbol integral positive;
// c = min_i integral_i / (4 p_i).
inline std::optional<ExpandingCertificate> check_expanding(
    const CocycleMap& A, const StochasticMatrix& P, ProjectivePoint v,
    int l_max = 8) {
  if (!is_invariant_point(A, v))
    throw ValidationError("point is not invariant for the cocycle");
  for (int l = 1; l <= l_max; ++l) {
    double c = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (int i = 1; i <= P.q(); ++i) {
      const double integral = expanding_integral(A, P, v, l, i);
      if (integral <= 0.0) {
        ok = false;
        break;
      }
      c = std::min(c, integral / (4.0 * P.p(i)));
    }
    if (ok) return ExpandingCertificate{l, c};
  }
  return std::nullopt;
}

// Largest delta in the grid with
//   sum_words mass * |D|^{-delta} <= (1 - 3 c delta) p_i  for every i,
// where |D| is the l-step orbit derivative (in d=2, ||D^{-1}||^{-1} = |D|).
inline std::optional<double> delta_moment_scan(
    const CocycleMap& A, const StochasticMatrix& P, ProjectivePoint v, int l,
    double c, const std::vector<double>& delta_grid) {
  if (!is_invariant_point(A, v))
    throw ValidationError("point is not invariant for the cocycle");
  const auto cylinders = P.enumerate_cylinders(l);
  std::optional<double> best;
  for (double delta : delta_grid) {
    if (delta <= 0.0) continue;
    bool ok = true;
    for (int i = 1; i <= P.q() && ok; ++i) {
      double moment = 0.0;
      for (const auto& [w, mass] : cylinders) {
        if (w.symbols.front() != i || mass == 0.0) continue;
        moment += mass * std::exp(-delta * log_orbit_derivative(A, w, v));
      }
      if (moment > (1.0 - 3.0 * c * delta) * P.p(i)) ok = false;
    }
    if (ok && (!best || delta > *best)) best = delta;
  }
  return best;
}

inline std::vector<double> default_delta_grid() {
  std::vector<double> g;
  for (int k = 1; k <= 10; ++k) g.push_back(std::pow(2.0, -k));
  return g;
}

}  // namespace lyaplab

#endif
