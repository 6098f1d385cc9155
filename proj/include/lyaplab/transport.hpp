#ifndef LYAPLAB_TRANSPORT_HPP
#define LYAPLAB_TRANSPORT_HPP

#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "lyaplab/energy.hpp"
#include "lyaplab/errors.hpp"

namespace lyaplab {

// Exact dense transportation solver via successive shortest paths with
// Dijkstra and node potentials. Real-valued supplies; forbidden arcs
// are simply absent, so the optimum is exact rather than cap-dependent.
// Infeasibility (no way to route all mass around forbidden arcs) is
// reported as an infinite optimum.
class TransportationSolver {
 public:
  struct Result {
    double cost = 0.0;
    bool feasible = true;
    // flow[k] corresponds to arcs[k]
    std::vector<double> flow;
  };

  struct Arc {
    int source = 0;
    int sink = 0;
    double cost = 0.0;
  };

  static constexpr std::size_t kSupportCap = 256;

  TransportationSolver(std::vector<double> supply, std::vector<double> demand,
                       std::vector<Arc> arcs)
      : supply_(std::move(supply)), demand_(std::move(demand)),
        arcs_(std::move(arcs)) {
    if (supply_.size() > kSupportCap || demand_.size() > kSupportCap)
      throw SizeError("transportation support exceeds cap of 256; use a "
                      "coarser grid");
    double s = 0.0, d = 0.0;
    for (double x : supply_) s += x;
    for (double x : demand_) d += x;
    if (std::abs(s - d) > 1e-9)
      throw ValidationError("transportation supply and demand masses differ");
  }

  Result solve() {
    const int ns = static_cast<int>(supply_.size());
    const int nt = static_cast<int>(demand_.size());
    const int n_nodes = ns + nt;
    // adjacency: arc index list per node; arc k has forward s->t
    std::vector<std::vector<int>> adj_s(ns), adj_t(nt);
    for (int k = 0; k < static_cast<int>(arcs_.size()); ++k) {
      adj_s[arcs_[k].source].push_back(k);
      adj_t[arcs_[k].sink].push_back(k);
    }
    std::vector<double> flow(arcs_.size(), 0.0);
    std::vector<double> rem_supply = supply_;
    std::vector<double> rem_demand = demand_;
    std::vector<double> potential(n_nodes, 0.0);  // costs >= 0 initially

    double total_mass = 0.0;
    for (double x : rem_supply) total_mass += x;
    // rounding drift across augmentations can leave phantom remainders;
    // anything below this is treated as fully routed
    const double kDust = 1e-12 * (total_mass + 1.0);
    double total_remaining = total_mass;

    Result res;
    int guard = 0;
    const int guard_cap = 64 * (n_nodes + 2) + 1024;
    while (total_remaining > kDust) {
      if (++guard > guard_cap)
        throw NumericalError("transportation solver exceeded iteration guard");
      // Multi-source Dijkstra over the residual graph in reduced costs.
      // Source s starts at key C - potential[s] (C keeps keys nonnegative);
      // then true cost to sink t is key[t] + potential[t] - C.
      const double inf = std::numeric_limits<double>::infinity();
      double base = -inf;
      for (int s = 0; s < ns; ++s)
        if (rem_supply[s] > kDust) base = std::max(base, potential[s]);
      std::vector<double> dist(n_nodes, inf);
      std::vector<int> pred_arc(n_nodes, -1);
      std::vector<char> done(n_nodes, 0);
      using QE = std::pair<double, int>;
      std::priority_queue<QE, std::vector<QE>, std::greater<QE>> pq;
      for (int s = 0; s < ns; ++s)
        if (rem_supply[s] > kDust) {
          dist[s] = base - potential[s];
          pq.emplace(dist[s], s);
        }
      while (!pq.empty()) {
        auto [du, u] = pq.top();
        pq.pop();
        if (done[u]) continue;
        done[u] = 1;
        if (u < ns) {
          for (int k : adj_s[u]) {  // forward arcs, unlimited capacity
            const int v = ns + arcs_[k].sink;
            if (done[v]) continue;
            // clamp: roundoff can push a reduced cost slightly negative,
            // which would re-relax settled nodes and knot the path tree
            const double rc =
                std::max(0.0, arcs_[k].cost + potential[u] - potential[v]);
            if (dist[u] + rc < dist[v]) {
              dist[v] = dist[u] + rc;
              pred_arc[v] = k;
              pq.emplace(dist[v], v);
            }
          }
        } else {
          for (int k : adj_t[u - ns]) {  // backward arcs, capacity = flow
            if (flow[k] <= kDust) continue;
            const int v = arcs_[k].source;
            if (done[v]) continue;
            const double rc =
                std::max(0.0, -arcs_[k].cost + potential[u] - potential[v]);
            if (dist[u] + rc < dist[v]) {
              dist[v] = dist[u] + rc;
              pred_arc[v] = k;
              pq.emplace(dist[v], v);
            }
          }
        }
      }
      // Unsaturated sink with the smallest true distance.
      int best_sink = -1;
      double best_true = inf;
      for (int t = 0; t < nt; ++t)
        if (rem_demand[t] > kDust && dist[ns + t] < inf) {
          const double true_cost = dist[ns + t] + potential[ns + t] - base;
          if (true_cost < best_true) {
            best_true = true_cost;
            best_sink = t;
          }
        }
      if (best_sink < 0) {
        double left = 0.0;
        for (double x : rem_demand) left = std::max(left, x);
        if (left <= kDust) break;  // only drift remains; routing is complete
        res.feasible = false;
        res.cost = kInfEnergy;
        res.flow = std::move(flow);
        return res;
      }
      // Trace the path back, find the bottleneck.
      double push = rem_demand[best_sink];
      int node = ns + best_sink;
      while (true) {
        const int k = pred_arc[node];
        if (k < 0) break;
        if (node >= ns) {
          node = arcs_[k].source;  // forward arc, no capacity bound
        } else {
          push = std::min(push, flow[k]);
          node = ns + arcs_[k].sink;
        }
      }
      push = std::min(push, rem_supply[node]);
      // Apply the augmentation.
      int cur = ns + best_sink;
      while (true) {
        const int k = pred_arc[cur];
        if (k < 0) break;
        if (cur >= ns) {
          flow[k] += push;
          cur = arcs_[k].source;
        } else {
          flow[k] -= push;
          cur = ns + arcs_[k].sink;
        }
      }
      rem_supply[node] -= push;
      rem_demand[best_sink] -= push;
      total_remaining -= push;
      // Potential update keeping residual reduced costs nonnegative;
      // unreached nodes advance by the largest finite distance.
      double dmax = 0.0;
      for (int u = 0; u < n_nodes; ++u)
        if (dist[u] < inf) dmax = std::max(dmax, dist[u]);
      for (int u = 0; u < n_nodes; ++u)
        potential[u] += (dist[u] < inf) ? dist[u] : dmax;
    }
    double cost = 0.0;
    for (std::size_t k = 0; k < arcs_.size(); ++k)
      cost += flow[k] * arcs_[k].cost;
    res.cost = cost;
    res.flow = std::move(flow);
    return res;
  }

 private:
  std::vector<double> supply_;
  std::vector<double> demand_;
  std::vector<Arc> arcs_;
};

struct MinEnergyCoupling {
  GridCoupling coupling;
  double energy = 0.0;  // +infinity when no coupling avoids the diagonal
};

// Exact optimum of the transportation problem with cost Psi. Cells with
// infinite kernel value (coincident bins inside U1) are forbidden arcs;
// if no feasible coupling avoids them the energy is infinite.
inline MinEnergyCoupling min_energy_coupling(const GridMeasure& eta1,
                                             const GridMeasure& eta2,
                                             const EnergyParams& params) {
  params.validate();
  if (std::abs(eta1.total() - eta2.total()) > 1e-9)
    throw ValidationError("min_energy_coupling requires equal masses");
  const ProjectiveGrid& grid = eta1.grid();
  std::vector<int> rows, cols;
  for (int b = 0; b < grid.bins(); ++b) {
    if (eta1.mass(b) > 0.0) rows.push_back(b);
    if (eta2.mass(b) > 0.0) cols.push_back(b);
  }
  std::vector<double> supply, demand;
  for (int b : rows) supply.push_back(eta1.mass(b));
  for (int b : cols) demand.push_back(eta2.mass(b));
  std::vector<TransportationSolver::Arc> arcs;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double psi = energy_kernel(grid.center(rows[r]),
                                       grid.center(cols[c]), params);
      if (std::isinf(psi)) continue;  // forbidden arc
      arcs.push_back({static_cast<int>(r), static_cast<int>(c), psi});
    }
  TransportationSolver solver(std::move(supply), std::move(demand),
                              std::move(arcs));
  // the arcs vector was moved; rebuild indices for extracting the plan
  TransportationSolver::Result sol = solver.solve();
  MinEnergyCoupling out{GridCoupling(grid), sol.cost};
  if (!sol.feasible) {
    out.energy = kInfEnergy;
    return out;
  }
  std::size_t k = 0;
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double psi = energy_kernel(grid.center(rows[r]),
                                       grid.center(cols[c]), params);
      if (std::isinf(psi)) continue;
      out.coupling.cell(rows[r], cols[c]) = sol.flow[k++];
    }
  return out;
}

// e_delta of a single measure: minimum self-coupling energy.
inline double measure_energy(const GridMeasure& eta,
                             const EnergyParams& params) {
  return min_energy_coupling(eta, eta, params).energy;
}

// Weighted vector energy sum_i p_i e_delta(eta_i).
inline double vector_energy(const MeasureVector& eta,
                            const StochasticMatrix& P,
                            const EnergyParams& params) {
  double acc = 0.0;
  for (int i = 1; i <= eta.q(); ++i) {
    const double e = measure_energy(eta.component(i), params);
    if (std::isinf(e)) return kInfEnergy;
    acc += P.p(i) * e;
  }
  return acc;
}

}  // namespace lyaplab

#endif
