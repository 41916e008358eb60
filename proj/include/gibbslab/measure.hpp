#pragma once

// Probability measures on quadrature grids and empirical measures of
// configurations, with relative entropy, Wasserstein-1 distance, and the
// exponential-Orlicz (Luxemburg) norm machinery.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "gibbslab/errors.hpp"
#include "gibbslab/interaction.hpp"
#include "gibbslab/space.hpp"

namespace gibbslab {

// A probability vector over the cells of a grid.
struct GridMeasure {
  std::shared_ptr<const QuadratureGrid> grid;
  std::vector<double> masses;

  int cells() const { return static_cast<int>(masses.size()); }

  void validate() const {
    if (!grid || masses.size() != static_cast<size_t>(grid->cell_count()))
      throw DomainError("grid measure does not match its grid");
    double total = 0;
    for (double m : masses) {
      if (m < 0 || !std::isfinite(m))
        throw DomainError("grid measure has a negative or non-finite mass");
      total += m;
    }
    if (std::fabs(total - 1.0) > 1e-12)
      throw DomainError("grid measure masses must sum to 1");
  }
};

inline GridMeasure base_measure(std::shared_ptr<const QuadratureGrid> grid) {
  GridMeasure mu;
  mu.grid = std::move(grid);
  mu.masses = mu.grid->weights;
  return mu;
}

inline GridMeasure normalized(std::shared_ptr<const QuadratureGrid> grid,
                              std::vector<double> raw) {
  double total = 0;
  for (double v : raw) {
    if (v < 0 || !std::isfinite(v))
      throw DomainError("cannot normalize: negative or non-finite mass");
    total += v;
  }
  if (total <= 0) throw DomainError("cannot normalize: zero total mass");
  for (double& v : raw) v /= total;
  GridMeasure mu;
  mu.grid = std::move(grid);
  mu.masses = std::move(raw);
  return mu;
}

inline void require_same_grid(const GridMeasure& a, const GridMeasure& b) {
  if (!a.grid || a.grid != b.grid) {
    // Distinct objects describing the same grid are accepted too.
    if (!a.grid || !b.grid || a.grid->space.kind != b.grid->space.kind ||
        a.grid->cell_count() != b.grid->cell_count())
      throw DomainError("measures live on different grids");
  }
}

// The empirical measure of a configuration: atoms of weight 1/N.
struct EmpiricalMeasure {
  std::vector<Point> atoms;
  double weight() const { return 1.0 / static_cast<double>(atoms.size()); }
};

inline EmpiricalMeasure empirical(const Configuration& config) {
  if (config.points.empty()) throw DomainError("empirical: N must be >= 1");
  return EmpiricalMeasure{config.points};
}

// Nearest-cell binning of an empirical measure.
inline GridMeasure bin(const EmpiricalMeasure& emp,
                       std::shared_ptr<const QuadratureGrid> grid) {
  GridMeasure mu;
  mu.masses.assign(static_cast<size_t>(grid->cell_count()), 0.0);
  const double w = emp.weight();
  for (const Point& p : emp.atoms) mu.masses[grid->cell_of(p)] += w;
  mu.grid = std::move(grid);
  return mu;
}

// Linear tilt functional Phi(mu) = int u d mu.
struct TiltFunctional {
  std::vector<double> values;  // u on grid cells
  double lipschitz_bound = 0;  // optional, 0 = unknown

  double operator()(const GridMeasure& mu) const {
    if (mu.masses.size() != values.size())
      throw DomainError("tilt and measure live on different grids");
    double acc = 0;
    for (size_t c = 0; c < values.size(); ++c) acc += values[c] * mu.masses[c];
    return acc;
  }
};

// --- entropy -------------------------------------------------------------

// Kullback-Leibler divergence D(mu | mu0) in nats, with 0 log 0 = 0 and
// +inf when mu charges a cell of zero base mass.
inline double relative_entropy(const std::vector<double>& mu,
                               const std::vector<double>& mu0) {
  if (mu.size() != mu0.size())
    throw DomainError("relative_entropy: measures live on different grids");
  double acc = 0;
  for (size_t c = 0; c < mu.size(); ++c) {
    if (mu[c] == 0) continue;
    if (mu0[c] == 0) return kInf;
    acc += mu[c] * std::log(mu[c] / mu0[c]);
  }
  return acc;
}

inline double relative_entropy(const GridMeasure& mu, const GridMeasure& mu0) {
  require_same_grid(mu, mu0);
  return relative_entropy(mu.masses, mu0.masses);
}

inline double total_variation(const GridMeasure& mu, const GridMeasure& nu) {
  require_same_grid(mu, nu);
  double acc = 0;
  for (size_t c = 0; c < mu.masses.size(); ++c)
    acc += std::fabs(mu.masses[c] - nu.masses[c]);
  return 0.5 * acc;
}

// --- Wasserstein-1 -------------------------------------------------------

namespace detail {

// Interval: W1 = int |F_mu - F_nu| dx, exact for measures on the nodes.
inline double w1_interval(const GridMeasure& mu, const GridMeasure& nu) {
  const double h = mu.grid->cell_width()[0];
  double cum = 0, acc = 0;
  for (size_t c = 0; c + 1 < mu.masses.size(); ++c) {
    cum += mu.masses[c] - nu.masses[c];
    acc += std::fabs(cum) * h;
  }
  return acc;
}

// Circle: W1 = min_t int |F_mu - F_nu - t|, convex in the shift t; ternary
// search to 1e-10.
inline double w1_circle(const GridMeasure& mu, const GridMeasure& nu) {
  const double h = mu.grid->cell_width()[0];
  const size_t K = mu.masses.size();
  std::vector<double> cum(K);
  double run = 0;
  for (size_t c = 0; c < K; ++c) {
    run += mu.masses[c] - nu.masses[c];
    cum[c] = run;
  }
  auto objective = [&](double t) {
    double acc = 0;
    for (double v : cum) acc += std::fabs(v - t) * h;
    return acc;
  };
  double lo = *std::min_element(cum.begin(), cum.end());
  double hi = *std::max_element(cum.begin(), cum.end());
  while (hi - lo > 1e-10) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (objective(m1) <= objective(m2)) hi = m2; else lo = m1;
  }
  return objective(0.5 * (lo + hi));
}

// Entropic-regularized transport cost (log-domain Sinkhorn), used on the
// 2-dimensional spaces. Returns the unregularized cost of the entropic plan;
// the entropic bias is upward and of order eps * log(cells), so assertions
// against this value must leave at least 5x that slack.
inline double w1_sinkhorn(const GridMeasure& mu, const GridMeasure& nu, double eps) {
  const auto& grid = *mu.grid;
  const int K = grid.cell_count();
  std::vector<double> cost(static_cast<size_t>(K) * K);
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b)
      cost[static_cast<size_t>(a) * K + b] =
          grid.space.distance(grid.nodes[a], grid.nodes[b]);

  const double neg = -1e300;
  std::vector<double> logmu(K, neg), lognu(K, neg);
  for (int c = 0; c < K; ++c) {
    if (mu.masses[c] > 0) logmu[c] = std::log(mu.masses[c]);
    if (nu.masses[c] > 0) lognu[c] = std::log(nu.masses[c]);
  }
  std::vector<double> f(K, 0.0), g(K, 0.0), row(K);
  auto lse = [](const std::vector<double>& v) {
    double m = *std::max_element(v.begin(), v.end());
    if (m <= -1e299) return -1e300;
    double s = 0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
  };
  double err = 1;
  for (int it = 0; it < 5000 && err > 1e-9; ++it) {
    for (int a = 0; a < K; ++a) {
      if (logmu[a] <= -1e299) { f[a] = 0; continue; }
      for (int b = 0; b < K; ++b)
        row[b] = (g[b] - cost[static_cast<size_t>(a) * K + b]) / eps + lognu[b];
      f[a] = -eps * lse(row);
    }
    err = 0;
    for (int b = 0; b < K; ++b) {
      if (lognu[b] <= -1e299) { g[b] = 0; continue; }
      for (int a = 0; a < K; ++a)
        row[a] = (f[a] - cost[static_cast<size_t>(a) * K + b]) / eps + logmu[a];
      g[b] = -eps * lse(row);
    }
    // Row-marginal violation of the current plan.
    for (int a = 0; a < K; ++a) {
      if (logmu[a] <= -1e299) continue;
      double m = 0;
      for (int b = 0; b < K; ++b) {
        if (lognu[b] <= -1e299) continue;
        m += std::exp((f[a] + g[b] - cost[static_cast<size_t>(a) * K + b]) / eps +
                      logmu[a] + lognu[b]);
      }
      err = std::max(err, std::fabs(m - mu.masses[a]));
    }
  }
  double total = 0;
  for (int a = 0; a < K; ++a) {
    if (logmu[a] <= -1e299) continue;
    for (int b = 0; b < K; ++b) {
      if (lognu[b] <= -1e299) continue;
      const double c = cost[static_cast<size_t>(a) * K + b];
      total += c * std::exp((f[a] + g[b] - c) / eps + logmu[a] + lognu[b]);
    }
  }
  return total;
}

}  // namespace detail

// Wasserstein-1 distance between two measures on the same grid.
//   Circle / Interval : exact cumulative-mass formulas
//   Torus2 / Sphere2  : entropic transport with eps = 0.01 * diameter
//   FiniteSet         : exact; under the 0/1 metric the optimal cost is the
//                       total-variation distance (mass that must move)
inline double wasserstein1(const GridMeasure& mu, const GridMeasure& nu) {
  require_same_grid(mu, nu);
  switch (mu.grid->space.kind) {
    case SpaceKind::Interval: return detail::w1_interval(mu, nu);
    case SpaceKind::Circle: return detail::w1_circle(mu, nu);
    case SpaceKind::FiniteSet: return total_variation(mu, nu);
    case SpaceKind::Torus2:
    case SpaceKind::Sphere2:
      return detail::w1_sinkhorn(mu, nu, 0.01 * mu.grid->space.diameter());
  }
  throw DomainError("wasserstein1: unsupported space");
}

// Entropic value exposed for diagnostics (e.g. to compare against the exact
// finite-space solution).
inline double wasserstein1_entropic(const GridMeasure& mu, const GridMeasure& nu,
                                    double eps = 0.0) {
  require_same_grid(mu, nu);
  if (eps <= 0) eps = 0.01 * mu.grid->space.diameter();
  return detail::w1_sinkhorn(mu, nu, eps);
}

// --- Orlicz / Luxemburg --------------------------------------------------

enum class YoungFunction {
  ExpYoung,      // theta(s) = e^s - s - 1
  DualExpYoung,  // theta*(s) = (s+1) log(1+s) - s
};

inline double young_value(YoungFunction kind, double s) {
  s = std::fabs(s);
  switch (kind) {
    case YoungFunction::ExpYoung: return std::expm1(s) - s;
    case YoungFunction::DualExpYoung: return (s + 1.0) * std::log1p(s) - s;
  }
  return 0;
}

// Luxemburg norm inf{ b > 0 : int theta(|f|/b) d mu <= 1 } by bisection to
// relative tolerance 1e-8 (returns the feasible endpoint, so the constraint
// is satisfied at the reported value). Returns +inf if f is non-finite
// somewhere on the support of mu.
inline double luxemburg_norm(const std::vector<double>& f,
                             const GridMeasure& mu, YoungFunction kind) {
  if (f.size() != mu.masses.size())
    throw DomainError("luxemburg_norm: function not on the measure's grid");
  double fmax = 0;
  for (size_t c = 0; c < f.size(); ++c) {
    if (mu.masses[c] == 0) continue;
    if (!std::isfinite(f[c])) return kInf;
    fmax = std::max(fmax, std::fabs(f[c]));
  }
  if (fmax == 0) return 0.0;

  auto integral = [&](double b) {
    double acc = 0;
    for (size_t c = 0; c < f.size(); ++c)
      if (mu.masses[c] > 0) acc += young_value(kind, f[c] / b) * mu.masses[c];
    return acc;
  };

  // theta(1) <= 1 for both Young functions, so b = fmax is always feasible.
  double hi = fmax, lo = fmax;
  for (int it = 0; it < 200 && integral(lo) <= 1.0; ++it) {
    hi = lo;
    lo *= 0.5;
  }
  if (integral(lo) <= 1.0) return lo;  // numerically zero function
  for (int it = 0; it < 200 && (hi - lo) > 1e-8 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (integral(mid) <= 1.0) hi = mid; else lo = mid;
  }
  return hi;
}

struct HolderYoungReport {
  double pairing = 0;    // |int f g d mu|
  double norm_f = 0;     // Luxemburg norm of f (ExpYoung)
  double norm_g = 0;     // Luxemburg norm of g (DualExpYoung)
  double bound = 0;      // 2 * norm_f * norm_g
  double slack = 0;      // bound - pairing
  bool holds = false;
};

// Checks |int f g d mu| <= 2 ||f||_theta ||g||_theta*.
inline HolderYoungReport holder_young_check(const std::vector<double>& f,
                                            const std::vector<double>& g,
                                            const GridMeasure& mu) {
  if (f.size() != mu.masses.size() || g.size() != mu.masses.size())
    throw DomainError("holder_young_check: functions not on the grid");
  HolderYoungReport rep;
  double pairing = 0;
  for (size_t c = 0; c < f.size(); ++c)
    if (mu.masses[c] > 0) pairing += f[c] * g[c] * mu.masses[c];
  rep.pairing = std::fabs(pairing);
  rep.norm_f = luxemburg_norm(f, mu, YoungFunction::ExpYoung);
  rep.norm_g = luxemburg_norm(g, mu, YoungFunction::DualExpYoung);
  rep.bound = 2.0 * rep.norm_f * rep.norm_g;
  rep.slack = rep.bound - rep.pairing;
  rep.holds = rep.pairing <= rep.bound + 1e-12;
  return rep;
}

}  // namespace gibbslab
