#ifndef LYAPLAB_STATIONARY_HPP
#define LYAPLAB_STATIONARY_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lyaplab/cocycle.hpp"
#include "lyaplab/grid.hpp"
#include "lyaplab/lyapunov.hpp"
#include "lyaplab/markov.hpp"

namespace lyaplab {

// (P eta)_j = sum_i (p_i P_{i,j} / p_j) A(i)_* eta_i. Unit vectors map
// to unit vectors because sum_i p_i P_{i,j} / p_j = 1.
class TransferOperator {
 public:
  TransferOperator(const CocycleMap& A, const StochasticMatrix& P,
                   const ProjectiveGrid& grid)
      : q_(P.q()) {
    if (A.q() != P.q())
      throw ValidationError("cocycle and stochastic matrix disagree on q");
    for (int i = 1; i <= q_; ++i) tables_.emplace_back(A.at(i), grid);
    weights_.assign(q_ * q_, 0.0);
    for (int i = 1; i <= q_; ++i)
      for (int j = 1; j <= q_; ++j)
        weights_[(i - 1) * q_ + (j - 1)] = P.p(i) * P.at(i, j) / P.p(j);
  }

  MeasureVector apply(const MeasureVector& eta) const {
    MeasureVector out(eta.grid(), q_);
    for (int i = 1; i <= q_; ++i) {
      const GridMeasure pushed = grid_pushforward(tables_[i - 1], eta.component(i));
      for (int j = 1; j <= q_; ++j) {
        const double w = weights_[(i - 1) * q_ + (j - 1)];
        if (w == 0.0) continue;
        GridMeasure& target = out.component(j);
        for (int b = 0; b < eta.grid().bins(); ++b)
          target.mass(b) += w * pushed.mass(b);
      }
    }
    return out;
  }

  const PushforwardTable& table(int i) const { return tables_[i - 1]; }
  double weight(int i, int j) const {
    return weights_[(i - 1) * q_ + (j - 1)];
  }

 private:
  int q_;
  std::vector<PushforwardTable> tables_;
  std::vector<double> weights_;
};

inline MeasureVector transfer_apply(const CocycleMap& A,
                                    const StochasticMatrix& P,
                                    const MeasureVector& eta) {
  return TransferOperator(A, P, eta.grid()).apply(eta);
}

// max_j TV(eta_j, (P eta)_j); zero iff eta is stationary on the grid.
inline double invariance_residual(const TransferOperator& op,
                                  const MeasureVector& eta) {
  const MeasureVector mapped = op.apply(eta);
  double res = 0.0;
  for (int j = 1; j <= eta.q(); ++j)
    res = std::max(res, tv_distance(eta.component(j), mapped.component(j)));
  return res;
}

inline double invariance_residual(const CocycleMap& A,
                                  const StochasticMatrix& P,
                                  const MeasureVector& eta) {
  eta.require_unit("invariance_residual");
  return invariance_residual(TransferOperator(A, P, eta.grid()), eta);
}

struct StationaryResult {
  MeasureVector eta;
  double residual = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Cesaro fixed-point solver. Averages of operator iterates converge to
// a stationary vector; a plain Cesaro average alone closes the residual
// only at rate O(1/n), so the average is restarted in windows: after
// each window the running average becomes the new base point. Every
// restarted run is again a Cesaro average of operator iterates.
inline StationaryResult cesaro_stationary(const CocycleMap& A,
                                          const StochasticMatrix& P,
                                          const MeasureVector& init,
                                          int max_iters = 5000,
                                          double tol = 1e-6,
                                          int window = 64) {
  init.require_unit("cesaro_stationary");
  const TransferOperator op(A, P, init.grid());
  MeasureVector current = init;   // P^l of the window's base point
  MeasureVector accum = init;     // sum of iterates over the window
  int in_window = 1;
  StationaryResult best{init, invariance_residual(op, init), false, 0};
  if (best.residual <= tol) {
    best.converged = true;
    return best;
  }
  for (int it = 1; it <= max_iters; ++it) {
    current = op.apply(current);
    for (int j = 1; j <= init.q(); ++j)
      accum.component(j) += current.component(j);
    ++in_window;
    if (in_window == window || it == max_iters) {
      MeasureVector avg = accum;
      for (int j = 1; j <= init.q(); ++j)
        avg.component(j).scale(1.0 / in_window);
      const double res = invariance_residual(op, avg);
      if (res < best.residual) best = {avg, res, false, it};
      if (res <= tol) {
        best = {avg, res, true, it};
        return best;
      }
      current = avg;
      accum = avg;
      in_window = 1;
    }
  }
  best.iterations = max_iters;
  return best;  // flagged: converged == false
}

struct Atom {
  int symbol = 0;  // 1-based
  int bin = 0;
  double mass = 0.0;
};

// Bins whose mass exceeds tau. When a refinement of eta at grid size 2N
// is supplied, an atom must also keep >= 0.9 of its mass within two
// fine bins of its location, which separates genuine atoms from sharp
// but diffuse densities.
inline std::vector<Atom> detect_atoms(const MeasureVector& eta, double tau,
                                      const MeasureVector* refined = nullptr) {
  eta.require_unit("detect_atoms");
  if (refined && refined->grid().bins() != 2 * eta.grid().bins())
    throw ValidationError("refined vector must live on the doubled grid");
  std::vector<Atom> out;
  const int n = eta.grid().bins();
  for (int i = 1; i <= eta.q(); ++i) {
    for (int b = 0; b < n; ++b) {
      const double mass = eta.component(i).mass(b);
      if (mass <= tau) continue;
      if (refined) {
        const int fn = 2 * n;
        double kept = 0.0;
        for (int f = 2 * b - 2; f <= 2 * b + 3; ++f)
          kept += refined->component(i).mass(((f % fn) + fn) % fn);
        if (kept < 0.9 * mass) continue;
      }
      out.push_back({i, b, mass});
    }
  }
  return out;
}

struct AtomSetReport {
  std::vector<int> atom_bins;              // the extracted set L
  std::vector<std::vector<int>> images;    // images[i][k]: bin of A(i+1) atom k
  bool closed_under_cocycle = true;        // A(i)(L) = L at bin level
  bool weights_uniform = true;             // eta_j({v}) equal across j
  std::vector<std::string> violations;
};

// Checks the finite-invariant-set structure of an atomic stationary
// vector: the maximal-mass atom bins form a set L with A(i)(L) = L
// (tolerance one bin), and each invariant atom carries the same weight
// in every component (tolerance 2/N + 1e-3).
inline AtomSetReport verify_atomic_invariant_set(
    const CocycleMap& A, const MeasureVector& eta, double tau,
    const MeasureVector* refined = nullptr,
    const std::vector<ProjectivePoint>* locations = nullptr) {
  const auto atoms = detect_atoms(eta, tau, refined);
  AtomSetReport rep;
  if (atoms.empty()) {
    rep.violations.push_back("no atoms above threshold");
    rep.closed_under_cocycle = rep.weights_uniform = false;
    return rep;
  }
  // A grid atom on a bin boundary splits over two adjacent bins, so
  // cluster adjacent candidate bins first. Each cluster's mass is the
  // largest per-symbol mass over its bins; its representative bin is the
  // heaviest one.
  const int n = eta.grid().bins();
  const double weight_tol = 2.0 / n + 1e-3;
  std::vector<char> flagged(n, 0);
  for (const auto& a : atoms) flagged[a.bin] = 1;
  struct Cluster {
    int bin = 0;       // representative
    double mass = 0.0;
  };
  std::vector<Cluster> clusters;
  std::vector<char> seen(n, 0);
  for (int b0 = 0; b0 < n; ++b0) {
    if (!flagged[b0] || seen[b0]) continue;
    // walk the circular run of flagged bins containing b0
    int start = b0;
    while (flagged[((start - 1) % n + n) % n] && ((start - 1) % n + n) % n != b0)
      start = ((start - 1) % n + n) % n;
    std::vector<int> run;
    int b = start;
    while (flagged[b] && !seen[b]) {
      seen[b] = 1;
      run.push_back(b);
      b = (b + 1) % n;
    }
    Cluster cl;
    double best_bin_mass = -1.0;
    for (int j = 1; j <= eta.q(); ++j) {
      double mj = 0.0;
      for (int rb : run) mj += eta.component(j).mass(rb);
      cl.mass = std::max(cl.mass, mj);
    }
    for (int rb : run)
      for (int j = 1; j <= eta.q(); ++j)
        if (eta.component(j).mass(rb) > best_bin_mass) {
          best_bin_mass = eta.component(j).mass(rb);
          cl.bin = rb;
        }
    clusters.push_back(cl);
  }
  double max_mass = 0.0;
  for (const auto& cl : clusters) max_mass = std::max(max_mass, cl.mass);
  for (const auto& cl : clusters)
    if (cl.mass >= max_mass - weight_tol) rep.atom_bins.push_back(cl.bin);
  // Closure under every A(i), bin-level with tolerance one bin. A bin
  // can place an atom only to within half a width, and the projective
  // derivative amplifies that offset, so when exact atom locations are
  // known (e.g. from an atomic refinement) the image is computed from
  // the location nearest each representative bin instead of its center.
  std::vector<ProjectivePoint> atom_loc;
  for (int b : rep.atom_bins) {
    ProjectivePoint loc = eta.grid().center(b);
    if (locations) {
      double best = 1.5 * eta.grid().width();
      for (const auto& cand : *locations) {
        const double d = angular_distance(cand, loc);
        if (d < best) {
          best = d;
          loc = cand;
        }
      }
    }
    atom_loc.push_back(loc);
  }
  for (int i = 1; i <= A.q(); ++i) {
    std::vector<int> img;
    for (std::size_t k = 0; k < rep.atom_bins.size(); ++k) {
      const int b = rep.atom_bins[k];
      const ProjectivePoint image = projective_action(A.at(i), atom_loc[k]);
      const int ib = eta.grid().bin_of(image.theta);
      img.push_back(ib);
      bool found = false;
      for (int t : rep.atom_bins) {
        int diff = std::abs(t - ib);
        diff = std::min(diff, n - diff);
        if (diff <= 1) found = true;
      }
      if (!found) {
        rep.closed_under_cocycle = false;
        rep.violations.push_back("A(" + std::to_string(i) + ") maps atom bin " +
                                 std::to_string(b) + " to bin " +
                                 std::to_string(ib) + " outside the set");
      }
    }
    rep.images.push_back(std::move(img));
  }
  // Per-symbol weight agreement for each atom location (one-bin halo
  // absorbs split-mass discretization).
  for (int b : rep.atom_bins) {
    double lo = 2.0, hi = -1.0;
    for (int j = 1; j <= eta.q(); ++j) {
      double w = 0.0;
      for (int d = -1; d <= 1; ++d)
        w += eta.component(j).mass(((b + d) % n + n) % n);
      lo = std::min(lo, w);
      hi = std::max(hi, w);
    }
    if (hi - lo > weight_tol) {
      rep.weights_uniform = false;
      rep.violations.push_back(
          "atom at bin " + std::to_string(b) + " has weights spanning [" +
          std::to_string(lo) + ", " + std::to_string(hi) + "] across symbols");
    }
  }
  return rep;
}

struct AtomicStationary {
  std::vector<ProjectivePoint> points;       // shared atom locations
  std::vector<std::vector<double>> weights;  // weights[i-1][k] for symbol i
  double residual = 0.0;
};

// Exact atomic fixed point. The Ulam grid cannot hold mass at a
// repelling invariant point (the bin center sits half a bin off it and
// leaks every step), so atoms detected on the grid are refined here:
// exact locations are fixed directions of word products up to
// `word_len` lying within `match_radius` of a detected atom, the set
// must be closed under every A(i) to `tol`, and the weight vector is
// the fixed point of the induced finite transfer operator.
inline std::optional<AtomicStationary> atomic_refinement(
    const CocycleMap& A, const StochasticMatrix& P,
    const std::vector<ProjectivePoint>& detected, double match_radius,
    int word_len = 3, double tol = 1e-9) {
  if (detected.empty()) return std::nullopt;
  // candidate locations from fixed directions of short words
  std::vector<ProjectivePoint> candidates;
  std::vector<Word> stack{Word{}};
  for (int l = 1; l <= word_len; ++l) {
    std::vector<Word> next;
    for (const Word& w : stack)
      for (int s = 1; s <= A.q(); ++s) {
        Word e = w;
        e.symbols.push_back(s);
        next.push_back(e);
      }
    stack = std::move(next);
    for (const Word& w : stack) {
      const FixedDirections dirs = fixed_directions(A.word_product(w));
      if (dirs.all) continue;
      for (const auto& v : dirs.points) {
        bool near = false;
        for (const auto& d : detected)
          if (angular_distance(v, d) <= match_radius) near = true;
        bool dup = false;
        for (const auto& c : candidates)
          if (angular_distance(v, c) <= tol) dup = true;
        if (near && !dup) candidates.push_back(v);
      }
    }
  }
  if (candidates.empty() || candidates.size() > 64) return std::nullopt;
  const int m = static_cast<int>(candidates.size());
  // closure: image index of each atom under each A(i)
  std::vector<std::vector<int>> image(A.q(), std::vector<int>(m, -1));
  for (int i = 1; i <= A.q(); ++i)
    for (int k = 0; k < m; ++k) {
      const ProjectivePoint img = projective_action(A.at(i), candidates[k]);
      for (int t = 0; t < m; ++t)
        if (angular_distance(img, candidates[t]) <= tol) image[i - 1][k] = t;
      if (image[i - 1][k] < 0) return std::nullopt;
    }
  // lazy power iteration of the finite transfer operator on weights
  std::vector<std::vector<double>> w(A.q(), std::vector<double>(m, 1.0 / m));
  for (int it = 0; it < 100000; ++it) {
    std::vector<std::vector<double>> nw(A.q(), std::vector<double>(m, 0.0));
    for (int j = 1; j <= P.q(); ++j)
      for (int i = 1; i <= P.q(); ++i) {
        const double coef = P.p(i) * P.at(i, j) / P.p(j);
        if (coef == 0.0) continue;
        for (int k = 0; k < m; ++k)
          nw[j - 1][image[i - 1][k]] += coef * w[i - 1][k];
      }
    double res = 0.0;
    for (int j = 0; j < P.q(); ++j)
      for (int k = 0; k < m; ++k) {
        const double mixed = 0.5 * (nw[j][k] + w[j][k]);
        res = std::max(res, std::abs(mixed - w[j][k]));
        w[j][k] = mixed;
      }
    if (res <= 1e-14) break;
  }
  AtomicStationary out{candidates, w, 0.0};
  // residual of the exact fixed-point equation
  for (int j = 1; j <= P.q(); ++j)
    for (int k = 0; k < m; ++k) {
      double s = 0.0;
      for (int i = 1; i <= P.q(); ++i)
        for (int t = 0; t < m; ++t)
          if (image[i - 1][t] == k)
            s += P.p(i) * P.at(i, j) / P.p(j) * w[i - 1][t];
      out.residual = std::max(out.residual, std::abs(s - w[j - 1][k]));
    }
  return out;
}

// Renders an atomic stationary vector on the grid with the same linear
// two-bin split the pushforward uses, so a point on a bin boundary
// spreads evenly over its two neighbors.
inline MeasureVector atomic_to_grid(const AtomicStationary& atoms,
                                    const ProjectiveGrid& grid, int q) {
  MeasureVector eta(grid, q);
  const int n = grid.bins();
  for (int j = 1; j <= q; ++j)
    for (std::size_t k = 0; k < atoms.points.size(); ++k) {
      const double u = atoms.points[k].theta / grid.width() - 0.5;
      const double base = std::floor(u);
      const double frac = u - base;
      const int lo = ((static_cast<int>(base) % n) + n) % n;
      const int hi = (lo + 1) % n;
      eta.component(j).mass(lo) += (1.0 - frac) * atoms.weights[j - 1][k];
      eta.component(j).mass(hi) += frac * atoms.weights[j - 1][k];
    }
  return eta;
}

struct FurstenbergMax {
  double value = 0.0;
  MeasureVector eta;
  double residual = 0.0;
  std::string winner;  // which initial vector won
};

inline std::vector<std::pair<std::string, MeasureVector>>
default_stationary_inits(const CocycleMap& A, const ProjectiveGrid& grid,
                         int q) {
  std::vector<std::pair<std::string, MeasureVector>> inits;
  inits.emplace_back("uniform", MeasureVector::uniform(grid, q));
  const FixedDirections dirs = fixed_directions(A.at(1));
  int k = 0;
  for (const auto& pt : dirs.points)
    inits.emplace_back("eigendirection_" + std::to_string(++k),
                       MeasureVector::dirac(grid, q, pt));
  for (int quart = 0; quart < 4; ++quart)
    inits.emplace_back("quartile_" + std::to_string(quart),
                       MeasureVector::dirac(grid, q,
                                            ProjectivePoint{quart * kPi / 4.0}));
  return inits;
}

// Runs the solver from each initial vector and returns the stationary
// vector with the largest Furstenberg integral. The initial family is
// one constructive choice; it may miss ergodic components of contrived
// cocycles, so the winner is reported.
inline FurstenbergMax maximize_furstenberg(
    const CocycleMap& A, const StochasticMatrix& P, const ProjectiveGrid& grid,
    std::vector<std::pair<std::string, MeasureVector>> inits = {},
    int max_iters = 5000, double tol = 1e-6) {
  if (inits.empty()) inits = default_stationary_inits(A, grid, P.q());
  std::optional<FurstenbergMax> best;
  double worst_residual = 0.0;
  for (auto& [name, init] : inits) {
    const StationaryResult run = cesaro_stationary(A, P, init, max_iters, tol);
    worst_residual = std::max(worst_residual, run.residual);
    if (!run.converged) continue;
    const double value = furstenberg_integral(A, P, run.eta);
    if (!best || value > best->value)
      best = FurstenbergMax{value, run.eta, run.residual, name};
  }
  if (!best)
    throw NumericalError(
        "no stationary solve converged; worst residual " +
        std::to_string(worst_residual));
  return *best;
}

}  // namespace lyaplab

#endif
