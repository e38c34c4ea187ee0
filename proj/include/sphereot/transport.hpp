#pragma once

// Discrete Kantorovich problem for the cost |x - y|^2 between two measures on
// S^n: exact LP solution (network simplex, with an assignment fast path),
// log-domain Sinkhorn, a permutation-enumeration oracle and the support
// diagnostics used downstream.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "sphereot/errors.hpp"
#include "sphereot/measure.hpp"
#include "sphereot/network_simplex.hpp"
#include "sphereot/sphere_geometry.hpp"

namespace sphereot {

inline constexpr double kMarginalTolerance = 1e-8;
inline constexpr double kArgmaxTieTolerance = 1e-8;

struct CouplingEntry {
  std::size_t i = 0;
  std::size_t j = 0;
  double mass = 0.0;
};

/// Sparse transport plan; only strictly positive masses are stored.
struct Coupling {
  std::size_t source_count = 0;
  std::size_t target_count = 0;
  std::vector<CouplingEntry> entries;
  double total_cost = 0.0;

  std::vector<double> row_sums() const {
    std::vector<double> r(source_count, 0.0);
    for (const auto& e : entries) r[e.i] += e.mass;
    return r;
  }
  std::vector<double> col_sums() const {
    std::vector<double> c(target_count, 0.0);
    for (const auto& e : entries) c[e.j] += e.mass;
    return c;
  }
  /// Largest absolute deviation of either marginal from the given weights.
  double marginal_violation(std::span<const double> mu, std::span<const double> nu) const {
    double worst = 0.0;
    const auto r = row_sums();
    const auto c = col_sums();
    for (std::size_t i = 0; i < r.size(); ++i) worst = std::max(worst, std::abs(r[i] - mu[i]));
    for (std::size_t j = 0; j < c.size(); ++j) worst = std::max(worst, std::abs(c[j] - nu[j]));
    return worst;
  }
};

/// Kantorovich potentials in cost form: psi_vals[i] + phi[j] <= c(x_i, y_j),
/// with equality on the support of the optimal plan.
///
/// Because c(x, y) = 2 - 2 x.y on the unit sphere, the affine change
///   phi_tilde = (1 - phi) / 2,  psi_tilde = (1 - psi) / 2
/// turns them into the correlation form x.y <= psi_tilde(x) + phi_tilde(y),
/// where psi_tilde(x) = max_j (x.y_j - phi_tilde_j) is the convex potential
/// whose subdifferential contains the transport images.
struct DualPotentials {
  std::vector<double> phi;
  std::vector<double> psi_vals;

  std::vector<double> phi_tilde() const {
    std::vector<double> out(phi.size());
    std::transform(phi.begin(), phi.end(), out.begin(), [](double p) { return 0.5 * (1.0 - p); });
    return out;
  }
  std::vector<double> psi_tilde() const {
    std::vector<double> out(psi_vals.size());
    std::transform(psi_vals.begin(), psi_vals.end(), out.begin(), [](double p) { return 0.5 * (1.0 - p); });
    return out;
  }
  /// Dual objective sum psi_i mu_i + sum phi_j nu_j.
  double objective(std::span<const double> mu, std::span<const double> nu) const {
    double s = 0.0;
    for (std::size_t i = 0; i < psi_vals.size(); ++i) s += psi_vals[i] * mu[i];
    for (std::size_t j = 0; j < phi.size(); ++j) s += phi[j] * nu[j];
    return s;
  }
};

struct TransportSolution {
  Coupling coupling;
  DualPotentials duals;
  std::size_t iterations = 0;
};

/// Dense row-major cost matrix c(x_i, y_j).
inline std::vector<double> cost_matrix(std::span<const SpherePoint> xs, std::span<const SpherePoint> ys) {
  std::vector<double> c(xs.size() * ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j) c[i * ys.size() + j] = cost_extrinsic(xs[i], ys[j]);
  return c;
}

namespace detail {

inline void check_problem(std::span<const double> cost, std::span<const double> mu, std::span<const double> nu) {
  if (mu.empty() || nu.empty()) throw SolverError("transport problem has an empty marginal");
  if (cost.size() != mu.size() * nu.size()) throw SolverError("cost matrix does not match the marginals");
  for (double w : mu)
    if (!(w >= 0.0) || !std::isfinite(w)) throw SolverError("negative or non-finite source weight");
  for (double w : nu)
    if (!(w >= 0.0) || !std::isfinite(w)) throw SolverError("negative or non-finite target weight");
  const double a = std::accumulate(mu.begin(), mu.end(), 0.0);
  const double b = std::accumulate(nu.begin(), nu.end(), 0.0);
  if (std::abs(a - b) > kMarginalTolerance)
    throw SolverError("marginals have different total mass (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
}

inline bool all_equal(std::span<const double> w, double value) {
  return std::all_of(w.begin(), w.end(), [value](double x) { return std::abs(x - value) <= 1e-14; });
}

/// Shortest augmenting path assignment (Hungarian method with potentials).
/// Returns match[i] = j and potentials u, v with u_i + v_j <= c_ij.
struct AssignmentResult {
  std::vector<std::size_t> match;
  std::vector<double> u;
  std::vector<double> v;
};

inline AssignmentResult solve_assignment(std::span<const double> cost, std::size_t n) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      const double* row = cost.data() + (i0 - 1) * n;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  AssignmentResult r;
  r.match.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) r.match[p[j] - 1] = j - 1;
  r.u.assign(u.begin() + 1, u.end());
  r.v.assign(v.begin() + 1, v.end());
  return r;
}

/// Shifts (psi, phi) -> (psi - k, phi + k) so that mean(psi) = 0; the dual
/// objective is unchanged because both marginals have the same mass.
inline void center_duals(DualPotentials& d) {
  if (d.psi_vals.empty()) return;
  const double k = std::accumulate(d.psi_vals.begin(), d.psi_vals.end(), 0.0) / d.psi_vals.size();
  for (double& p : d.psi_vals) p -= k;
  for (double& p : d.phi) p += k;
}

inline double plan_cost(const Coupling& c, std::span<const double> cost) {
  double total = 0.0;
  for (const auto& e : c.entries) total += e.mass * cost[e.i * c.target_count + e.j];
  return total;
}

}  // namespace detail

struct ExactOptions {
  /// Use the assignment solver when both sides have N atoms of mass 1/N.
  bool assignment_fast_path = true;
  /// Flows at or below this value are treated as rounding residue.
  double mass_floor = 1e-15;
};

/// Exact optimal plan and potentials for a dense cost matrix (row-major,
/// mu.size() x nu.size()).
inline TransportSolution solve_exact(std::span<const double> cost, std::span<const double> mu,
                                     std::span<const double> nu, const ExactOptions& opts = {}) {
  detail::check_problem(cost, mu, nu);
  TransportSolution sol;
  sol.coupling.source_count = mu.size();
  sol.coupling.target_count = nu.size();
  const std::size_t n = mu.size();

  if (opts.assignment_fast_path && mu.size() == nu.size() && detail::all_equal(mu, 1.0 / n) &&
      detail::all_equal(nu, 1.0 / n)) {
    auto a = detail::solve_assignment(cost, n);
    for (std::size_t i = 0; i < n; ++i) sol.coupling.entries.push_back({i, a.match[i], 1.0 / n});
    sol.duals.psi_vals = std::move(a.u);
    sol.duals.phi = std::move(a.v);
  } else {
    detail::TransportSimplex simplex(cost, mu, nu);
    auto r = simplex.run();
    sol.iterations = r.pivots;
    for (std::size_t i = 0; i < mu.size(); ++i)
      for (std::size_t j = 0; j < nu.size(); ++j) {
        const double f = r.flow[i * nu.size() + j];
        if (f > opts.mass_floor) sol.coupling.entries.push_back({i, j, f});
      }
    sol.duals.psi_vals.resize(mu.size());
    sol.duals.phi.resize(nu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) sol.duals.psi_vals[i] = -r.pi[i];
    for (std::size_t j = 0; j < nu.size(); ++j) sol.duals.phi[j] = r.pi[mu.size() + j];
  }
  detail::center_duals(sol.duals);
  sol.coupling.total_cost = detail::plan_cost(sol.coupling, cost);
  return sol;
}

inline TransportSolution solve_exact(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                     const ExactOptions& opts = {}) {
  if (mu.dim() != nu.dim()) throw SolverError("solve_exact: measures live on different spheres");
  const auto cost = cost_matrix(mu.points(), nu.points());
  return solve_exact(cost, mu.weights(), nu.weights(), opts);
}

/// Entropy-regularized plan by log-domain Sinkhorn iterations. The plan is
/// exp((f_i + g_j - c_ij) / reg); f and g are returned as the potentials.
/// Throws ConvergenceError if the marginal violation is still above `tol`
/// after `max_iter` sweeps.
inline TransportSolution solve_entropic(std::span<const double> cost, std::span<const double> mu,
                                        std::span<const double> nu, double reg, int max_iter, double tol) {
  detail::check_problem(cost, mu, nu);
  if (!(reg > 0.0)) throw SolverError("solve_entropic: reg must be positive");
  if (max_iter < 1) throw SolverError("solve_entropic: max_iter must be >= 1");
  constexpr double neg_inf = -std::numeric_limits<double>::infinity();
  const std::size_t n = mu.size(), m = nu.size();
  std::vector<double> f(n, 0.0), g(m, 0.0), log_mu(n), log_nu(m);
  for (std::size_t i = 0; i < n; ++i) log_mu[i] = mu[i] > 0 ? std::log(mu[i]) : neg_inf;
  for (std::size_t j = 0; j < m; ++j) log_nu[j] = nu[j] > 0 ? std::log(nu[j]) : neg_inf;

  auto lse = [](std::span<const double> z) {
    double mx = neg_inf;
    for (double v : z) mx = std::max(mx, v);
    if (mx == neg_inf) return neg_inf;
    double s = 0.0;
    for (double v : z) s += std::exp(v - mx);
    return mx + std::log(s);
  };

  std::vector<double> buf(std::max(n, m));
  double violation = std::numeric_limits<double>::infinity();
  int iter = 0;
  for (; iter < max_iter; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      if (log_mu[i] == neg_inf) {
        f[i] = neg_inf;
        continue;
      }
      for (std::size_t j = 0; j < m; ++j) buf[j] = (g[j] - cost[i * m + j]) / reg;
      f[i] = reg * (log_mu[i] - lse(std::span<const double>(buf.data(), m)));
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (log_nu[j] == neg_inf) {
        g[j] = neg_inf;
        continue;
      }
      for (std::size_t i = 0; i < n; ++i) buf[i] = (f[i] - cost[i * m + j]) / reg;
      g[j] = reg * (log_nu[j] - lse(std::span<const double>(buf.data(), n)));
    }
    // Columns are exact after the g sweep; measure the row error.
    violation = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      if (f[i] != neg_inf)
        for (std::size_t j = 0; j < m; ++j)
          if (g[j] != neg_inf) row += std::exp((f[i] + g[j] - cost[i * m + j]) / reg);
      violation = std::max(violation, std::abs(row - mu[i]));
    }
    if (violation <= tol) break;
  }
  if (violation > tol)
    throw ConvergenceError("Sinkhorn did not reach marginal tolerance " + std::to_string(tol) + " in " +
                           std::to_string(max_iter) + " iterations (violation " + std::to_string(violation) + ")");

  TransportSolution sol;
  sol.iterations = static_cast<std::size_t>(iter + 1);
  sol.coupling.source_count = n;
  sol.coupling.target_count = m;
  for (std::size_t i = 0; i < n; ++i) {
    if (f[i] == neg_inf) continue;
    for (std::size_t j = 0; j < m; ++j) {
      if (g[j] == neg_inf) continue;
      const double p = std::exp((f[i] + g[j] - cost[i * m + j]) / reg);
      if (p > 0.0) sol.coupling.entries.push_back({i, j, p});
    }
  }
  sol.coupling.total_cost = detail::plan_cost(sol.coupling, cost);
  sol.duals.psi_vals = std::move(f);
  sol.duals.phi = std::move(g);
  return sol;
}

inline TransportSolution solve_entropic(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double reg,
                                        int max_iter, double tol) {
  if (mu.dim() != nu.dim()) throw SolverError("solve_entropic: measures live on different spheres");
  const auto cost = cost_matrix(mu.points(), nu.points());
  return solve_entropic(cost, mu.weights(), nu.weights(), reg, max_iter, tol);
}

/// Optimal plan by enumerating all N! pairings; N <= 8 atoms per side, all
/// of mass 1/N.
inline Coupling brute_force_oracle(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  const std::size_t n = mu.size();
  if (nu.size() != n || n > 8) throw ConfigError("brute_force_oracle needs equal atom counts N <= 8");
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(mu.weight(i) - 1.0 / n) > 1e-12 || std::abs(nu.weight(i) - 1.0 / n) > 1e-12)
      throw ConfigError("brute_force_oracle needs equal weights 1/N");
  std::vector<std::size_t> perm(n), best;
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += cost_extrinsic(mu.point(i), nu.point(perm[i]));
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  Coupling out;
  out.source_count = out.target_count = n;
  for (std::size_t i = 0; i < n; ++i) out.entries.push_back({i, best[i], 1.0 / n});
  out.total_cost = best_cost / static_cast<double>(n);
  return out;
}

/// Largest gain of a pairwise swap over the support:
/// max [c(x_i,y_j) + c(x_k,y_l) - c(x_i,y_l) - c(x_k,y_j)]_+.
inline double cyclical_monotonicity_violation(const Coupling& coupling, const DiscreteMeasure& mu,
                                              const DiscreteMeasure& nu) {
  const auto& e = coupling.entries;
  double worst = 0.0;
  for (std::size_t a = 0; a < e.size(); ++a) {
    const Vector& xi = mu.point(e[a].i).coords();
    const Vector& yj = nu.point(e[a].j).coords();
    for (std::size_t b = a + 1; b < e.size(); ++b) {
      const Vector& xk = mu.point(e[b].i).coords();
      const Vector& yl = nu.point(e[b].j).coords();
      // c = 2 - 2 x.y, so the swap gain reduces to 2 (x_i - x_k).(y_l - y_j).
      const double gain = 2.0 * (xi - xk).dot(yl - yj);
      worst = std::max(worst, gain);
    }
  }
  return worst;
}

struct BrenierValue {
  double value = 0.0;
  /// Target indices attaining the max within kArgmaxTieTolerance.
  std::vector<std::size_t> argmax_set;
};

/// psi(x) = max_j (x.y_j - phi_tilde_j), the discrete convex potential in
/// correlation form, and the targets attaining it.
inline BrenierValue brenier_potential(const DualPotentials& duals, const DiscreteMeasure& nu, const SpherePoint& x) {
  if (duals.phi.size() != nu.size()) throw DomainError("brenier_potential: potentials do not match the target");
  const auto phi_t = duals.phi_tilde();
  std::vector<double> vals(nu.size());
  for (std::size_t j = 0; j < nu.size(); ++j) vals[j] = x.dot(nu.point(j)) - phi_t[j];
  BrenierValue out;
  out.value = *std::max_element(vals.begin(), vals.end());
  for (std::size_t j = 0; j < vals.size(); ++j)
    if (vals[j] >= out.value - kArgmaxTieTolerance) out.argmax_set.push_back(j);
  return out;
}

}  // namespace sphereot
