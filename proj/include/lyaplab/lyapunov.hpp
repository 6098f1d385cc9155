#ifndef LYAPLAB_LYAPUNOV_HPP
#define LYAPLAB_LYAPUNOV_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lyaplab/cocycle.hpp"
#include "lyaplab/grid.hpp"
#include "lyaplab/markov.hpp"

namespace lyaplab {

struct ExponentEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  int reps = 0;
  std::string method;
};

namespace detail {

// One chain's (1/n) log ||A^n||, (1/n) log conorm(A^n) and the Birkhoff
// average of log|det A(i_t)|. The product is renormalized every 32 steps
// by its max-abs entry to stay in floating range; the co-norm uses
// conorm = |det| / norm, with log|det A^n| accumulated term by term.
struct ChainRates {
  double top;
  double bottom;
  double logdet_avg;
};

inline ChainRates chain_rates(const CocycleMap& A, const StochasticMatrix& P,
                              std::size_t n, std::uint64_t seed) {
  const Word w = P.sample_chain(n, seed);
  Mat2 prod = Mat2::identity();
  double log_scale = 0.0;
  double logdet = 0.0;
  std::size_t steps = 0;
  for (int s : w.symbols) {
    prod = A.at(s) * prod;
    logdet += std::log(std::abs(A.at(s).det()));
    if (++steps % 32 == 0) {
      const double m = prod.max_abs();
      prod = prod * (1.0 / m);
      log_scale += std::log(m);
    }
  }
  const double log_norm = log_scale + std::log(prod.norm());
  if (!std::isfinite(log_norm))
    throw NumericalError("matrix product overflowed despite renormalization");
  const double nn = static_cast<double>(n);
  return {log_norm / nn, (logdet - log_norm) / nn, logdet / nn};
}

struct MeanStderr {
  double mean;
  double se;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
  const double r = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= r;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var = (xs.size() > 1) ? var / (r - 1.0) : 0.0;
  return {mean, std::sqrt(var / r)};
}

}  // namespace detail

// Monte-Carlo top exponent: mean over replicates of (1/n) log ||A^n(x)||.
inline ExponentEstimate lambda_plus_monte_carlo(const CocycleMap& A,
                                               const StochasticMatrix& P,
                                               std::size_t n, int reps,
                                               std::uint64_t seed) {
  if (n < 1 || reps < 1) throw ValidationError("need n >= 1 and reps >= 1");
  std::vector<double> tops(reps);
  for (int r = 0; r < reps; ++r)
    tops[r] = detail::chain_rates(A, P, n, Rng::replicate_seed(seed, r)).top;
  const auto ms = detail::mean_stderr(tops);
  return {ms.mean, ms.se, n, reps, "monte_carlo"};
}

// Exact lambda_+ + lambda_-: sum_i p_i log|det A(i)|.
inline double lyapunov_sum_exact(const CocycleMap& A,
                                 const StochasticMatrix& P) {
  double acc = 0.0;
  for (int i = 1; i <= P.q(); ++i)
    acc += P.p(i) * std::log(std::abs(A.at(i).det()));
  return acc;
}

struct LambdaPair {
  ExponentEstimate plus;
  ExponentEstimate minus_direct;   // co-norm of the sampled products
  double minus_via_sum = 0.0;      // lyapunov_sum_exact - lambda_plus
  bool consistent = true;          // the two lambda_- routes agree to 3 se
};

inline LambdaPair lambda_pair(const CocycleMap& A, const StochasticMatrix& P,
                              std::size_t n, int reps, std::uint64_t seed) {
  if (n < 1 || reps < 1) throw ValidationError("need n >= 1 and reps >= 1");
  std::vector<double> tops(reps), bottoms(reps);
  for (int r = 0; r < reps; ++r) {
    const auto cr = detail::chain_rates(A, P, n, Rng::replicate_seed(seed, r));
    tops[r] = cr.top;
    bottoms[r] = cr.bottom;
  }
  const auto mt = detail::mean_stderr(tops);
  const auto mb = detail::mean_stderr(bottoms);
  LambdaPair out;
  out.plus = {mt.mean, mt.se, n, reps, "monte_carlo"};
  out.minus_direct = {mb.mean, mb.se, n, reps, "conorm_direct"};
  out.minus_via_sum = lyapunov_sum_exact(A, P) - mt.mean;
  const double combined =
      3.0 * std::sqrt(mt.se * mt.se + mb.se * mb.se) + 1e-9;
  out.consistent = std::abs(out.minus_direct.value - out.minus_via_sum) <= combined;
  return out;
}

// sum_i p_i int log ||A(i) v|| d eta_i(v), evaluated at bin centers.
inline double furstenberg_integral(const CocycleMap& A,
                                   const StochasticMatrix& P,
                                   const MeasureVector& eta) {
  eta.require_unit("furstenberg_integral");
  const ProjectiveGrid& grid = eta.grid();
  double acc = 0.0;
  for (int i = 1; i <= P.q(); ++i) {
    const GridMeasure& comp = eta.component(i);
    double inner = 0.0;
    for (int b = 0; b < grid.bins(); ++b) {
      const double mass = comp.mass(b);
      if (mass == 0.0) continue;
      const Vec2 img = A.at(i).apply(grid.center(b).unit_vector());
      inner += mass * std::log(img.norm());
    }
    acc += P.p(i) * inner;
  }
  return acc;
}

}  // namespace lyaplab

#endif
