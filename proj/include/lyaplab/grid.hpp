#ifndef LYAPLAB_GRID_HPP
#define LYAPLAB_GRID_HPP

#include <cmath>
#include <string>
#include <vector>

#include "lyaplab/cocycle.hpp"
#include "lyaplab/errors.hpp"

namespace lyaplab {

// Uniform angular grid over P(R^2) = [0, pi). Bin b covers
// [b h, (b+1) h) with h = pi/N and center (b + 0.5) h.
class ProjectiveGrid {
 public:
  explicit ProjectiveGrid(int bins) : n_(bins) {
    if (n_ < 8) throw ValidationError("grid needs at least 8 bins");
  }

  int bins() const { return n_; }
  double width() const { return kPi / n_; }
  ProjectivePoint center(int b) const {
    return {(static_cast<double>(b) + 0.5) * width()};
  }
  int bin_of(double theta) const {
    const double t = ProjectivePoint::from_angle(theta).theta;
    int b = static_cast<int>(t / width());
    return (b >= n_) ? n_ - 1 : b;
  }
  bool operator==(const ProjectiveGrid& o) const { return n_ == o.n_; }

 private:
  int n_;
};

// Nonnegative masses on the grid bins.
class GridMeasure {
 public:
  explicit GridMeasure(const ProjectiveGrid& grid)
      : grid_(grid), mass_(grid.bins(), 0.0) {}

  GridMeasure(const ProjectiveGrid& grid, std::vector<double> mass)
      : grid_(grid), mass_(std::move(mass)) {
    if (static_cast<int>(mass_.size()) != grid_.bins())
      throw ValidationError("mass vector length does not match grid");
    for (double m : mass_)
      if (m < 0.0) throw ValidationError("grid measure has a negative mass");
  }

  static GridMeasure uniform(const ProjectiveGrid& grid) {
    return GridMeasure(grid,
                       std::vector<double>(grid.bins(), 1.0 / grid.bins()));
  }

  static GridMeasure dirac(const ProjectiveGrid& grid, ProjectivePoint at) {
    GridMeasure m(grid);
    m.mass_[grid.bin_of(at.theta)] = 1.0;
    return m;
  }

  const ProjectiveGrid& grid() const { return grid_; }
  double mass(int b) const { return mass_[b]; }
  double& mass(int b) { return mass_[b]; }
  const std::vector<double>& masses() const { return mass_; }

  double total() const {
    double s = 0.0;
    for (double m : mass_) s += m;
    return s;
  }

  bool is_unit(double tol = 1e-10) const {
    return std::abs(total() - 1.0) <= tol;
  }

  GridMeasure& operator+=(const GridMeasure& o) {
    for (int b = 0; b < grid_.bins(); ++b) mass_[b] += o.mass_[b];
    return *this;
  }

  GridMeasure& scale(double s) {
    for (double& m : mass_) m *= s;
    return *this;
  }

 private:
  ProjectiveGrid grid_;
  std::vector<double> mass_;
};

// Half of the L1 distance, i.e. total variation for equal-mass measures.
inline double tv_distance(const GridMeasure& a, const GridMeasure& b) {
  double s = 0.0;
  for (int i = 0; i < a.grid().bins(); ++i)
    s += std::abs(a.mass(i) - b.mass(i));
  return 0.5 * s;
}

// Per-bin images under the projective action, with the linear two-bin
// split. Precomputed once per matrix; reused by the measure and the
// coupling pushforwards so their results commute bin-exactly.
struct PushforwardTable {
  std::vector<int> lo;       // first target bin (mod N)
  std::vector<int> hi;       // second target bin
  std::vector<double> w_lo;  // weight on lo; w_lo + w_hi == 1 exactly
  std::vector<double> w_hi;

  PushforwardTable(const Mat2& alpha, const ProjectiveGrid& grid) {
    const int n = grid.bins();
    lo.resize(n);
    hi.resize(n);
    w_lo.resize(n);
    w_hi.resize(n);
    for (int b = 0; b < n; ++b) {
      const double image = projective_action(alpha, grid.center(b)).theta;
      double u = image / grid.width() - 0.5;  // position in center coordinates
      double base = std::floor(u);
      double frac = u - base;
      int b0 = static_cast<int>(base);
      lo[b] = ((b0 % n) + n) % n;
      hi[b] = (lo[b] + 1) % n;
      w_hi[b] = frac;
      w_lo[b] = 1.0 - frac;
    }
  }
};

// alpha_* nu on the grid: each bin's mass moves to the image of its
// center and splits linearly between the two nearest centers (wrapping
// mod pi). Conserves mass exactly.
inline GridMeasure grid_pushforward(const PushforwardTable& table,
                                    const GridMeasure& nu) {
  GridMeasure out(nu.grid());
  const int n = nu.grid().bins();
  for (int b = 0; b < n; ++b) {
    const double m = nu.mass(b);
    if (m == 0.0) continue;
    out.mass(table.lo[b]) += m * table.w_lo[b];
    out.mass(table.hi[b]) += m * table.w_hi[b];
  }
  return out;
}

inline GridMeasure grid_pushforward(const Mat2& alpha, const GridMeasure& nu) {
  return grid_pushforward(PushforwardTable(alpha, nu.grid()), nu);
}

// One grid measure per symbol, on a shared grid.
class MeasureVector {
 public:
  MeasureVector(const ProjectiveGrid& grid, int q)
      : grid_(grid), comps_(q, GridMeasure(grid)) {
    if (q < 1) throw ValidationError("measure vector needs q >= 1");
  }

  static MeasureVector uniform(const ProjectiveGrid& grid, int q) {
    MeasureVector v(grid, q);
    for (auto& c : v.comps_) c = GridMeasure::uniform(grid);
    return v;
  }

  static MeasureVector dirac(const ProjectiveGrid& grid, int q,
                             ProjectivePoint at) {
    MeasureVector v(grid, q);
    for (auto& c : v.comps_) c = GridMeasure::dirac(grid, at);
    return v;
  }

  int q() const { return static_cast<int>(comps_.size()); }
  const ProjectiveGrid& grid() const { return grid_; }
  const GridMeasure& component(int i) const { return comps_[i - 1]; }  // 1-based
  GridMeasure& component(int i) { return comps_[i - 1]; }

  bool is_unit(double tol = 1e-10) const {
    for (const auto& c : comps_)
      if (!c.is_unit(tol)) return false;
    return true;
  }

  void require_unit(const std::string& who) const {
    if (!is_unit())
      throw ValidationError(who + ": measure vector is not a unit vector");
  }

 private:
  ProjectiveGrid grid_;
  std::vector<GridMeasure> comps_;
};

}  // namespace lyaplab

#endif
