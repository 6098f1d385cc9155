#ifndef LYAPLAB_MARKOV_HPP
#define LYAPLAB_MARKOV_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lyaplab/errors.hpp"
#include "lyaplab/rng.hpp"

namespace lyaplab {

// A finite word over the alphabet {1..q}.
struct Word {
  std::vector<int> symbols;  // 1-based

  std::size_t length() const { return symbols.size(); }

  void validate(int q) const {
    for (int s : symbols) {
      if (s < 1 || s > q) {
        throw ValidationError("word symbol " + std::to_string(s) +
                              " outside alphabet 1.." + std::to_string(q));
      }
    }
  }
};

namespace detail {

inline std::vector<std::uint8_t> positivity_pattern(
    const std::vector<std::vector<double>>& rows) {
  const int q = static_cast<int>(rows.size());
  std::vector<std::uint8_t> pat(static_cast<std::size_t>(q) * q);
  for (int i = 0; i < q; ++i)
    for (int j = 0; j < q; ++j) pat[i * q + j] = rows[i][j] > 0.0 ? 1 : 0;
  return pat;
}

inline std::vector<std::uint8_t> bool_mul(const std::vector<std::uint8_t>& x,
                                          const std::vector<std::uint8_t>& y,
                                          int q) {
  std::vector<std::uint8_t> z(static_cast<std::size_t>(q) * q, 0);
  for (int i = 0; i < q; ++i)
    for (int k = 0; k < q; ++k)
      if (x[i * q + k])
        for (int j = 0; j < q; ++j)
          if (y[k * q + j]) z[i * q + j] = 1;
  return z;
}

}  // namespace detail

// Smallest N <= (q-1)^2 + 1 with P^N entrywise positive (Wielandt bound:
// beyond it no such N exists). Rows are validated for stochasticity.
inline std::optional<int> check_aperiodic(
    const std::vector<std::vector<double>>& rows, double row_tol = 1e-12) {
  const int q = static_cast<int>(rows.size());
  for (int i = 0; i < q; ++i) {
    if (static_cast<int>(rows[i].size()) != q)
      throw ValidationError("row " + std::to_string(i + 1) + " has wrong length");
    double sum = 0.0;
    for (double x : rows[i]) {
      if (x < 0.0)
        throw ValidationError("row " + std::to_string(i + 1) +
                              " has a negative entry");
      sum += x;
    }
    if (std::abs(sum - 1.0) > row_tol)
      throw ValidationError("row " + std::to_string(i + 1) +
                            " sums to " + std::to_string(sum) + ", not 1");
  }
  const int bound = (q - 1) * (q - 1) + 1;
  auto base = detail::positivity_pattern(rows);
  auto pow = base;
  for (int n = 1; n <= bound; ++n) {
    bool all = true;
    for (auto e : pow)
      if (!e) { all = false; break; }
    if (all) return n;
    pow = detail::bool_mul(pow, base, q);
  }
  return std::nullopt;
}

// Row-stochastic q x q matrix with its stationary probability vector.
// Immutable after construction; safe to share across threads.
class StochasticMatrix {
 public:
  explicit StochasticMatrix(std::vector<std::vector<double>> rows)
      : rows_(std::move(rows)), q_(static_cast<int>(rows_.size())) {
    if (q_ < 2) throw ValidationError("need at least 2 symbols");
    aperiodicity_exponent_ = check_aperiodic(rows_);
    reject_zero_lines();
    check_irreducible();
    compute_stationary();
  }

  int q() const { return q_; }
  double at(int i, int j) const { return rows_[i - 1][j - 1]; }  // 1-based
  const std::vector<std::vector<double>>& rows() const { return rows_; }

  const std::vector<double>& stationary() const { return p_; }
  double p(int i) const { return p_[i - 1]; }  // 1-based

  std::optional<int> aperiodicity_exponent() const {
    return aperiodicity_exponent_;
  }
  bool aperiodic() const { return aperiodicity_exponent_.has_value(); }

  bool is_bernoulli(double tol = 1e-14) const {
    for (int i = 0; i < q_; ++i)
      for (int j = 0; j < q_; ++j)
        if (std::abs(rows_[i][j] - rows_[0][j]) > tol) return false;
    return true;
  }

  // p_{j0} P_{j0,j1} ... P_{j_{n-2},j_{n-1}}; empty word has measure 1.
  double cylinder_measure(const Word& w) const {
    w.validate(q_);
    if (w.symbols.empty()) return 1.0;
    double m = p(w.symbols.front());
    for (std::size_t s = 0; s + 1 < w.symbols.size(); ++s)
      m *= at(w.symbols[s], w.symbols[s + 1]);
    return m;
  }

  // i0 ~ p, i_{t+1} ~ row i_t. Deterministic given the seed.
  Word sample_chain(std::size_t n, std::uint64_t seed) const {
    if (n < 1) throw ValidationError("chain length must be >= 1");
    Rng rng(seed);
    Word w;
    w.symbols.reserve(n);
    w.symbols.push_back(sample_index(p_, rng));
    for (std::size_t t = 1; t < n; ++t)
      w.symbols.push_back(sample_index(rows_[w.symbols.back() - 1], rng));
    return w;
  }

  // All q^l words of length l with their cylinder measures. Zero-mass
  // words are kept (callers relying on masses only can skip them).
  std::vector<std::pair<Word, double>> enumerate_cylinders(
      int l, std::uint64_t cap = (std::uint64_t{1} << 20)) const {
    if (l < 0) throw ValidationError("cylinder length must be >= 0");
    double count = std::pow(static_cast<double>(q_), l);
    if (count > static_cast<double>(cap))
      throw SizeError("q^l = " + std::to_string(count) +
                      " exceeds enumeration cap; use a Monte-Carlo fallback");
    std::vector<std::pair<Word, double>> out;
    out.reserve(static_cast<std::size_t>(count));
    Word w;
    enumerate_rec(l, w, out);
    return out;
  }

 private:
  void reject_zero_lines() {
    for (int j = 0; j < q_; ++j) {
      double col = 0.0;
      for (int i = 0; i < q_; ++i) col += rows_[i][j];
      if (col == 0.0)
        throw ValidationError("column " + std::to_string(j + 1) +
                              " is identically zero");
    }
  }

  void check_irreducible() const {
    // Reachability closure on the positivity pattern.
    auto pat = detail::positivity_pattern(rows_);
    std::vector<std::uint8_t> reach = pat;
    for (int k = 0; k < q_; ++k)
      for (int i = 0; i < q_; ++i)
        if (reach[i * q_ + k])
          for (int j = 0; j < q_; ++j)
            if (reach[k * q_ + j]) reach[i * q_ + j] = 1;
    for (int i = 0; i < q_; ++i)
      for (int j = 0; j < q_; ++j)
        if (!reach[i * q_ + j])
          throw ValidationError("matrix is reducible: symbol " +
                                std::to_string(j + 1) + " unreachable from " +
                                std::to_string(i + 1));
  }

  // Power iteration on the transpose action. Iterating the lazy chain
  // (P+I)/2 keeps the same stationary vector and converges also for
  // irreducible-but-periodic matrices.
  void compute_stationary() {
    const int cap = 100000;
    p_.assign(q_, 1.0 / q_);
    std::vector<double> next(q_);
    // Iterate to machine precision: stop once the step stalls below 1e-12
    // (geometric convergence means a stalled step is roundoff noise).
    double prev_res = std::numeric_limits<double>::infinity();
    int stalled = 0;
    for (int it = 0; it < cap; ++it) {
      for (int j = 0; j < q_; ++j) {
        double s = 0.0;
        for (int i = 0; i < q_; ++i) s += p_[i] * rows_[i][j];
        next[j] = 0.5 * (s + p_[j]);
      }
      double total = 0.0;
      for (double x : next) total += x;
      for (double& x : next) x /= total;
      double res = 0.0;
      for (int j = 0; j < q_; ++j) res = std::max(res, std::abs(next[j] - p_[j]));
      p_.swap(next);
      if (res == 0.0) break;
      stalled = (res <= 1e-12 && res >= prev_res) ? stalled + 1 : 0;
      if (stalled >= 2) break;
      prev_res = res;
    }
    // Residual of the actual fixed-point equation pP = p.
    double fp_res = 0.0;
    for (int j = 0; j < q_; ++j) {
      double s = 0.0;
      for (int i = 0; i < q_; ++i) s += p_[i] * rows_[i][j];
      fp_res = std::max(fp_res, std::abs(s - p_[j]));
    }
    if (fp_res > 1e-10)
      throw NumericalError("stationary vector did not converge, residual " +
                           std::to_string(fp_res));
    for (double x : p_)
      if (x <= 0.0) throw NumericalError("stationary vector not positive");
  }

  static int sample_index(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.next_double();
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) return static_cast<int>(k) + 1;
    }
    return static_cast<int>(probs.size());
  }

  void enumerate_rec(int remaining, Word& w,
                     std::vector<std::pair<Word, double>>& out) const {
    if (remaining == 0) {
      out.emplace_back(w, cylinder_measure(w));
      return;
    }
    for (int s = 1; s <= q_; ++s) {
      w.symbols.push_back(s);
      enumerate_rec(remaining - 1, w, out);
      w.symbols.pop_back();
    }
  }

  std::vector<std::vector<double>> rows_;
  int q_;
  std::vector<double> p_;
  std::optional<int> aperiodicity_exponent_;
};

}  // namespace lyaplab

#endif
