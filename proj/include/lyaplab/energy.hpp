#ifndef LYAPLAB_ENERGY_HPP
#define LYAPLAB_ENERGY_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lyaplab/cocycle.hpp"
#include "lyaplab/grid.hpp"
#include "lyaplab/markov.hpp"

namespace lyaplab {

inline constexpr double kInfEnergy = std::numeric_limits<double>::infinity();

// Open arc in [0, pi), wrapping mod pi.
struct Arc {
  double center = 0.0;
  double radius = 0.0;

  bool contains(double theta) const {
    return angular_distance(ProjectivePoint::from_angle(theta),
                            ProjectivePoint::from_angle(center)) < radius;
  }

  Arc scaled(double factor) const { return {center, radius * factor}; }
};

struct EnergyParams {
  double delta = 0.25;     // exponent in (0, 1]
  Arc u1;                  // reference neighborhood, radius < pi/4
  double cap = 1e30;       // finite surrogate for infinity in reports

  void validate() const {
    if (!(delta > 0.0 && delta <= 1.0))
      throw ValidationError("energy exponent delta must lie in (0, 1]");
    if (!(u1.radius > 0.0 && u1.radius < kPi / 4.0))
      throw ValidationError("U1 arc radius must lie in (0, pi/4)");
  }
};

// Projective distance normalized so that the diameter is 1.
inline double projective_distance(ProjectivePoint u, ProjectivePoint w) {
  return angular_distance(u, w) / (kPi / 2.0);
}

// Kernel Psi: d(u,w)^{-delta} when both points lie in U1, 1 otherwise;
// +infinity at coincident points inside U1.
inline double energy_kernel(ProjectivePoint u, ProjectivePoint w,
                            const EnergyParams& params) {
  if (!(params.u1.contains(u.theta) && params.u1.contains(w.theta)))
    return 1.0;
  const double d = projective_distance(u, w);
  if (d == 0.0) return kInfEnergy;
  return std::pow(d, -params.delta);
}

// Joint nonnegative mass matrix on grid x grid with declared marginals.
class GridCoupling {
 public:
  explicit GridCoupling(const ProjectiveGrid& grid)
      : grid_(grid), cell_(static_cast<std::size_t>(grid.bins()) * grid.bins(), 0.0) {}

  static GridCoupling product(const GridMeasure& a, const GridMeasure& b) {
    GridCoupling out(a.grid());
    const int n = a.grid().bins();
    for (int i = 0; i < n; ++i) {
      if (a.mass(i) == 0.0) continue;
      for (int j = 0; j < n; ++j)
        if (b.mass(j) != 0.0) out.cell(i, j) = a.mass(i) * b.mass(j);
    }
    return out;
  }

  const ProjectiveGrid& grid() const { return grid_; }
  int bins() const { return grid_.bins(); }
  double cell(int r, int c) const { return cell_[static_cast<std::size_t>(r) * bins() + c]; }
  double& cell(int r, int c) { return cell_[static_cast<std::size_t>(r) * bins() + c]; }

  GridMeasure marginal(int axis) const {  // axis 1 = rows, 2 = columns
    GridMeasure out(grid_);
    const int n = bins();
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        out.mass(axis == 1 ? r : c) += cell(r, c);
    return out;
  }

  double total() const {
    double s = 0.0;
    for (double m : cell_) s += m;
    return s;
  }

  bool is_symmetric(double tol = 1e-12) const {
    const int n = bins();
    for (int r = 0; r < n; ++r)
      for (int c = r + 1; c < n; ++c)
        if (std::abs(cell(r, c) - cell(c, r)) > tol) return false;
    return true;
  }

  GridCoupling symmetrized() const {
    GridCoupling out(grid_);
    const int n = bins();
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        out.cell(r, c) = 0.5 * (cell(r, c) + cell(c, r));
    return out;
  }

  void check_marginals(const GridMeasure& first, const GridMeasure& second,
                       double tol = 1e-10) const {
    const GridMeasure rows = marginal(1), cols = marginal(2);
    for (int b = 0; b < bins(); ++b) {
      if (std::abs(rows.mass(b) - first.mass(b)) > tol)
        throw ValidationError("coupling row marginal mismatch at bin " +
                              std::to_string(b));
      if (std::abs(cols.mass(b) - second.mass(b)) > tol)
        throw ValidationError("coupling column marginal mismatch at bin " +
                              std::to_string(b));
    }
  }

 private:
  ProjectiveGrid grid_;
  std::vector<double> cell_;
};

// E_delta(xi) = sum of cell mass times Psi at the bin centers. Same-bin
// cells inside U1 are the grid's diagonal: positive mass there means
// infinite energy.
inline double coupling_energy(const GridCoupling& xi,
                              const EnergyParams& params) {
  const int n = xi.bins();
  double acc = 0.0;
  for (int r = 0; r < n; ++r) {
    const ProjectivePoint u = xi.grid().center(r);
    const bool u_in = params.u1.contains(u.theta);
    for (int c = 0; c < n; ++c) {
      const double m = xi.cell(r, c);
      if (m == 0.0) continue;
      if (!u_in) {
        acc += m;
        continue;
      }
      if (r == c) return kInfEnergy;
      const ProjectivePoint w = xi.grid().center(c);
      acc += m * (params.u1.contains(w.theta)
                      ? std::pow(projective_distance(u, w), -params.delta)
                      : 1.0);
    }
  }
  return acc;
}

// Fat-atom dichotomy for a single measure: a bin carrying more than
// half the total mass inside U1 forces infinite self-coupling energy;
// strictly less than half everywhere on the closed arc keeps it finite.
enum class FatAtomStatus { kInfinite, kFinite, kBoundary };

inline FatAtomStatus fat_atom_check(const GridMeasure& eta,
                                    const EnergyParams& params) {
  const double half = 0.5 * eta.total();
  const int n = eta.grid().bins();
  FatAtomStatus status = FatAtomStatus::kFinite;
  for (int b = 0; b < n; ++b) {
    const double theta = eta.grid().center(b).theta;
    // closed arc for the finiteness direction
    const bool in_closed =
        angular_distance(ProjectivePoint::from_angle(theta),
                         ProjectivePoint::from_angle(params.u1.center)) <=
        params.u1.radius;
    if (!in_closed) continue;
    const double m = eta.mass(b);
    if (std::abs(m - half) <= 1e-9) {
      status = FatAtomStatus::kBoundary;
    } else if (m > half && params.u1.contains(theta)) {
      return FatAtomStatus::kInfinite;
    }
  }
  return status;
}

// One coupling per symbol.
class CouplingVector {
 public:
  CouplingVector(const ProjectiveGrid& grid, int q)
      : comps_(q, GridCoupling(grid)) {}

  static CouplingVector product_self_coupling(const MeasureVector& eta) {
    CouplingVector out(eta.grid(), eta.q());
    for (int i = 1; i <= eta.q(); ++i)
      out.component(i) = GridCoupling::product(eta.component(i), eta.component(i));
    return out;
  }

  int q() const { return static_cast<int>(comps_.size()); }
  const GridCoupling& component(int i) const { return comps_[i - 1]; }  // 1-based
  GridCoupling& component(int i) { return comps_[i - 1]; }

  const ProjectiveGrid& grid() const { return comps_.front().grid(); }

  MeasureVector marginal(int axis) const {
    MeasureVector out(grid(), q());
    for (int i = 1; i <= q(); ++i)
      out.component(i) = comps_[i - 1].marginal(axis);
    return out;
  }

 private:
  std::vector<GridCoupling> comps_;
};

// Weighted energy sum_i p_i E_delta(xi_i).
inline double weighted_energy(const CouplingVector& xi,
                              const StochasticMatrix& P,
                              const EnergyParams& params) {
  double acc = 0.0;
  for (int i = 1; i <= xi.q(); ++i) {
    const double e = coupling_energy(xi.component(i), params);
    if (std::isinf(e)) return kInfEnergy;
    acc += P.p(i) * e;
  }
  return acc;
}

}  // namespace lyaplab

#endif
