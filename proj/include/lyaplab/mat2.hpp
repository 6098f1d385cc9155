#ifndef LYAPLAB_MAT2_HPP
#define LYAPLAB_MAT2_HPP

#include <array>
#include <cmath>

namespace lyaplab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  double norm() const { return std::hypot(x, y); }
};

// Real 2x2 matrix with closed-form singular values. The spectral norm
// and co-norm come from trace/det of M^T M, which is exact to machine
// precision for d=2 and branch-free.
struct Mat2 {
  double a = 1.0, b = 0.0;  // row 0
  double c = 0.0, d = 1.0;  // row 1

  static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
  static Mat2 diagonal(double s, double t) { return {s, 0.0, 0.0, t}; }
  static Mat2 rotation(double phi) {
    const double cs = std::cos(phi), sn = std::sin(phi);
    return {cs, -sn, sn, cs};
  }

  double det() const { return a * d - b * c; }

  Vec2 apply(const Vec2& v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }

  Mat2 operator*(const Mat2& o) const {
    return {a * o.a + b * o.c, a * o.b + b * o.d,
            c * o.a + d * o.c, c * o.b + d * o.d};
  }

  Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }

  Mat2 inverse() const {
    const double dt = det();
    return {d / dt, -b / dt, -c / dt, a / dt};
  }

  Mat2 transpose() const { return {a, c, b, d}; }

  double max_abs() const {
    return std::max(std::max(std::abs(a), std::abs(b)),
                    std::max(std::abs(c), std::abs(d)));
  }

  double frobenius_sq() const { return a * a + b * b + c * c + d * d; }

  // Singular values, largest first: s1^2 + s2^2 = tr(M^T M),
  // s1 * s2 = |det M|.
  std::array<double, 2> singular_values() const {
    const double t = frobenius_sq();
    const double dt = std::abs(det());
    const double disc = std::sqrt(std::max(0.0, t * t - 4.0 * dt * dt));
    const double s1 = std::sqrt(0.5 * (t + disc));
    // |det|/s1 avoids cancellation in 0.5*(t - disc) for ill-conditioned M.
    const double s2 = (s1 > 0.0) ? dt / s1 : 0.0;
    return {s1, s2};
  }

  // Spectral norm.
  double norm() const { return singular_values()[0]; }

  // Smallest singular value, equal to ||M^{-1}||^{-1}.
  double conorm() const { return singular_values()[1]; }
};

}  // namespace lyaplab

#endif
