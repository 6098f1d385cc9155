#ifndef LYAPLAB_COUPLING_OPS_HPP
#define LYAPLAB_COUPLING_OPS_HPP

#include <cmath>
#include <string>
#include <vector>

#include "lyaplab/energy.hpp"
#include "lyaplab/stationary.hpp"
#include "lyaplab/transport.hpp"

namespace lyaplab {

// (A x A)_* xi on the grid: each cell's mass moves to the image pair of
// its bin centers and splits bilinearly over the 2x2 neighboring cells.
// Uses the same per-bin split table as the 1-d pushforward, so marginals
// commute with grid_pushforward bin-exactly.
inline GridCoupling coupling_pushforward(const PushforwardTable& table,
                                         const GridCoupling& xi) {
  GridCoupling out(xi.grid());
  const int n = xi.bins();
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double m = xi.cell(r, c);
      if (m == 0.0) continue;
      const double mrl = m * table.w_lo[r];
      const double mrh = m * table.w_hi[r];
      out.cell(table.lo[r], table.lo[c]) += mrl * table.w_lo[c];
      out.cell(table.lo[r], table.hi[c]) += mrl * table.w_hi[c];
      out.cell(table.hi[r], table.lo[c]) += mrh * table.w_lo[c];
      out.cell(table.hi[r], table.hi[c]) += mrh * table.w_hi[c];
    }
  }
  return out;
}

// Diagonal action of the transfer operator on coupling vectors:
// (P xi)_j = sum_i (p_i P_{i,j} / p_j) (A(i) x A(i))_* xi_i, iterated
// l times. Projecting on either coordinate commutes with the plain
// transfer operator.
inline CouplingVector diagonal_transfer(const TransferOperator& op,
                                        const CouplingVector& xi, int l) {
  CouplingVector cur = xi;
  const int q = xi.q();
  const int n = xi.grid().bins();
  for (int step = 0; step < l; ++step) {
    CouplingVector next(xi.grid(), q);
    for (int i = 1; i <= q; ++i) {
      const GridCoupling pushed = coupling_pushforward(op.table(i), cur.component(i));
      for (int j = 1; j <= q; ++j) {
        const double w = op.weight(i, j);
        if (w == 0.0) continue;
        GridCoupling& target = next.component(j);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < n; ++c)
            target.cell(r, c) += w * pushed.cell(r, c);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

inline CouplingVector diagonal_transfer(const CocycleMap& A,
                                        const StochasticMatrix& P,
                                        const CouplingVector& xi, int l) {
  return diagonal_transfer(TransferOperator(A, P, xi.grid()), xi, l);
}

// Off-diagonal surgery: removes all mass from U2^c x U2^c and repairs
// the marginals with product terms against the U3 x U3 block. The
// four-term formula
//   xi' = xi - R - (|R|/|S|) S + (1/|S|) [zeta1 x sigma2 + sigma1 x zeta2]
// with R = xi restricted to U2^c x U2^c and S = xi restricted to
// U3 x U3 preserves both marginals; positivity needs |R| < |S|.
inline GridCoupling surgery_off_diagonal(const GridCoupling& xi, const Arc& u2,
                                         const Arc& u3) {
  if (u3.radius >= u2.radius)
    throw ValidationError("surgery needs U3 strictly inside U2");
  const ProjectiveGrid& grid = xi.grid();
  const int n = grid.bins();
  std::vector<char> in2(n), in3(n);
  for (int b = 0; b < n; ++b) {
    const double t = grid.center(b).theta;
    in2[b] = u2.contains(t);
    in3[b] = u3.contains(t);
  }
  // projections of the two restricted blocks
  std::vector<double> zeta1(n, 0.0), zeta2(n, 0.0);   // of R, outer corner
  std::vector<double> sigma1(n, 0.0), sigma2(n, 0.0); // of S, inner block
  double mass_r = 0.0, mass_s = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double m = xi.cell(r, c);
      if (m == 0.0) continue;
      if (!in2[r] && !in2[c]) {
        zeta1[r] += m;
        zeta2[c] += m;
        mass_r += m;
      } else if (in3[r] && in3[c]) {
        sigma1[r] += m;
        sigma2[c] += m;
        mass_s += m;
      }
    }
  if (mass_r == 0.0) return xi;  // already clear outside U2
  if (mass_r >= mass_s)
    throw ValidationError(
        "surgery mass precondition failed: outer-corner mass " +
        std::to_string(mass_r) + " >= inner-block mass " +
        std::to_string(mass_s));
  GridCoupling out(grid);
  const double shrink = 1.0 - mass_r / mass_s;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      double m = xi.cell(r, c);
      if (!in2[r] && !in2[c]) {
        m = 0.0;
      } else if (in3[r] && in3[c]) {
        m *= shrink;
      }
      m += (zeta1[r] * sigma2[c] + sigma1[r] * zeta2[c]) / mass_s;
      out.cell(r, c) = m;
    }
  return out;
}

struct ContractionTraceEntry {
  int iteration = 0;
  double total_energy = 0.0;              // sum_i p_i E_delta(xi_i)
  std::vector<double> symbol_energy;      // per-symbol, unweighted
};

struct ContractionTrace {
  std::vector<ContractionTraceEntry> entries;
  double c = 0.0;
  double delta = 0.0;
  double contraction_factor = 0.0;        // 1 - c*delta
  double empirical_c = 0.0;               // smallest C with the affine bound
  bool truncated = false;                 // surgery precondition failed mid-run
  std::string truncation_reason;
  bool product_start = true;              // false: minimum-energy start used
};

// Alternates off-diagonal surgery and the l-step diagonal action,
// recording the weighted energy after each round. The start is the
// per-symbol product self-coupling; when that has infinite grid energy
// (any U1 mass makes its same-bin cells positive) the minimum-energy
// self-coupling is used instead, which represents the same measure
// vector with the diagonal artifact removed.
inline ContractionTrace contraction_experiment(
    const CocycleMap& A, const StochasticMatrix& P, const MeasureVector& eta,
    const EnergyParams& params, const ExpandingCertificate& cert, double delta,
    int iters) {
  params.validate();
  eta.require_unit("contraction_experiment");
  EnergyParams run_params = params;
  run_params.delta = delta;
  const Arc u2 = params.u1.scaled(2.0 / 3.0);
  const Arc u3 = params.u1.scaled(1.0 / 3.0);
  const TransferOperator op(A, P, eta.grid());

  ContractionTrace trace;
  trace.c = cert.c;
  trace.delta = delta;
  trace.contraction_factor = 1.0 - cert.c * delta;

  CouplingVector xi = CouplingVector::product_self_coupling(eta);
  if (std::isinf(weighted_energy(xi, P, run_params))) {
    trace.product_start = false;
    for (int i = 1; i <= eta.q(); ++i) {
      MinEnergyCoupling best =
          min_energy_coupling(eta.component(i), eta.component(i), run_params);
      if (std::isinf(best.energy))
        throw ValidationError(
            "component " + std::to_string(i) +
            " has no finite-energy self-coupling (fat atom in U1)");
      xi.component(i) = best.coupling.symmetrized();
    }
  }

  auto record = [&](int iteration) {
    ContractionTraceEntry e;
    e.iteration = iteration;
    e.total_energy = weighted_energy(xi, P, run_params);
    for (int i = 1; i <= eta.q(); ++i)
      e.symbol_energy.push_back(coupling_energy(xi.component(i), run_params));
    trace.entries.push_back(std::move(e));
  };
  record(0);

  for (int round = 1; round <= iters; ++round) {
    try {
      for (int i = 1; i <= eta.q(); ++i)
        xi.component(i) = surgery_off_diagonal(xi.component(i), u2, u3);
    } catch (const ValidationError& err) {
      trace.truncated = true;
      trace.truncation_reason = err.what();
      break;
    }
    xi = diagonal_transfer(op, xi, cert.l);
    record(round);
  }

  double c_emp = 0.0;
  for (std::size_t k = 0; k + 1 < trace.entries.size(); ++k) {
    const double prev = trace.entries[k].total_energy;
    const double next = trace.entries[k + 1].total_energy;
    if (std::isinf(prev)) continue;  // bound vacuous at infinite steps
    if (std::isinf(next)) {
      c_emp = kInfEnergy;
      break;
    }
    c_emp = std::max(c_emp, next - trace.contraction_factor * prev);
  }
  trace.empirical_c = c_emp;
  return trace;
}

}  // namespace lyaplab

#endif
