#pragma once

// Minimization of the macroscopic free-energy functionals on the simplex of
// grid measures:
//   beta in (0, inf) : F_beta(mu) = E(mu) + D(mu|mu0) / beta  (+ Phi)
//   beta < 0         : signed rate  beta E(mu) + D(mu|mu0)    (+ beta Phi)
//   beta = inf       : E(mu)                                  (+ Phi)
// Finite beta uses the damped mean-field fixed point
//   mu <- (1-a) mu + a Normalize(mu0 exp(-beta potential(mu))),
// zero temperature uses Frank-Wolfe with step 2/(t+2).

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "gibbslab/interaction.hpp"
#include "gibbslab/measure.hpp"

namespace gibbslab {

struct FreeEnergyProblem {
  HamiltonianSpec spec;
  std::shared_ptr<const QuadratureGrid> grid;
  double beta = 1.0;          // nonzero; +inf for zero temperature
  std::vector<double> tilt;   // optional linear tilt Phi(mu) = int u d mu

  void validate() const {
    if (!grid) throw ConfigError("free-energy problem needs a grid");
    if (beta == 0) throw ConfigError("beta must be nonzero");
    spec.validate();
    if (!tilt.empty() && tilt.size() != static_cast<size_t>(grid->cell_count()))
      throw ConfigError("tilt size does not match the grid");
  }
};

struct SolverReport {
  GridMeasure minimizer;
  double value = 0;          // objective at the reported measure
  int iterations = 0;
  double residual = 0;       // fixed-point sup-residual or Frank-Wolfe gap
  bool converged = false;
  bool diverged = false;     // negative-temperature stability failure
  bool convex_certified = false;  // PSD certificate (beta = inf path)
  double order_parameter = std::numeric_limits<double>::quiet_NaN();
  std::string message;
};

// First-harmonic modulus |int e^{i theta} d mu| on the circle.
inline double circle_order_parameter(const QuadratureGrid& grid,
                                     const std::vector<double>& mu) {
  if (grid.space.kind != SpaceKind::Circle)
    return std::numeric_limits<double>::quiet_NaN();
  double a = 0, b = 0;
  for (int c = 0; c < grid.cell_count(); ++c) {
    a += std::cos(grid.nodes[c][0]) * mu[c];
    b += std::sin(grid.nodes[c][0]) * mu[c];
  }
  return std::sqrt(a * a + b * b);
}

namespace detail {

// Caches the per-term cell matrices so fixed-point / Frank-Wolfe iterations
// cost O(K^2) instead of re-evaluating kernels.
struct MacroWorkspace {
  const FreeEnergyProblem& prob;
  const QuadratureGrid& grid;
  int K;
  std::vector<const KernelTerm*> pair_terms;
  std::vector<std::vector<double>> pair_mats;
  std::vector<const KernelTerm*> triple_terms;
  std::vector<double> linear;  // order-1 fields + spec tilt (part of E)

  explicit MacroWorkspace(const FreeEnergyProblem& p)
      : prob(p), grid(*p.grid), K(p.grid->cell_count()), linear(K, 0.0) {
    for (const auto& t : prob.spec.terms) {
      if (t.order == 1) {
        for (int c = 0; c < K; ++c)
          linear[c] += field_value(t, prob.spec, grid.nodes[c]);
      } else if (t.order == 2) {
        pair_terms.push_back(&t);
        pair_mats.push_back(pair_matrix(t, prob.spec, grid));
      } else {
        triple_terms.push_back(&t);
      }
    }
    if (!prob.spec.tilt.empty())
      for (int c = 0; c < K; ++c) linear[c] += prob.spec.tilt[c];
  }

  // E(mu): linear + quadratic + cubic parts (spec tilt included).
  double energy(const std::vector<double>& mu) const {
    double acc = 0;
    for (int c = 0; c < K; ++c) acc += linear[c] * mu[c];
    for (const auto& m : pair_mats) {
      double q = 0;
      for (int a = 0; a < K; ++a) {
        if (mu[a] == 0) continue;
        double row = 0;
        for (int b = 0; b < K; ++b) row += m[static_cast<size_t>(a) * K + b] * mu[b];
        q += mu[a] * row;
      }
      acc += q;
    }
    for (const auto* t : triple_terms) acc += term_energy(*t, prob.spec, grid, mu);
    return acc;
  }

  double problem_tilt(const std::vector<double>& mu) const {
    if (prob.tilt.empty()) return 0;
    double acc = 0;
    for (int c = 0; c < K; ++c) acc += prob.tilt[c] * mu[c];
    return acc;
  }

  // First variation of E at mu, plus the problem tilt u. An order-m term
  // contributes m times its partial integral.
  std::vector<double> potential(const std::vector<double>& mu) const {
    std::vector<double> phi = linear;
    for (const auto& m : pair_mats)
      for (int a = 0; a < K; ++a) {
        double row = 0;
        for (int b = 0; b < K; ++b) row += m[static_cast<size_t>(a) * K + b] * mu[b];
        phi[a] += 2.0 * row;
      }
    for (const auto* t : triple_terms)
      for (int a = 0; a < K; ++a) {
        double acc = 0;
        for (int b = 0; b < K; ++b) {
          if (mu[b] == 0) continue;
          double row = 0;
          for (int c = 0; c < K; ++c) {
            if (mu[c] == 0) continue;
            row += triple_cell_value(*t, prob.spec, grid, a, b, c) * mu[c];
          }
          acc += mu[b] * row;
        }
        phi[a] += 3.0 * acc;
      }
    if (!prob.tilt.empty())
      for (int c = 0; c < K; ++c) phi[c] += prob.tilt[c];
    return phi;
  }

  double objective(const std::vector<double>& mu) const {
    const double e = energy(mu);
    const double p = problem_tilt(mu);
    if (prob.beta == kInf) return e + p;
    const double d = relative_entropy(mu, grid.weights);
    if (prob.beta > 0) return e + d / prob.beta + p;
    return prob.beta * (e + p) + d;
  }
};

}  // namespace detail

// Value of the free-energy objective at mu (sign convention by beta; see top
// of file).
inline double objective(const FreeEnergyProblem& problem, const GridMeasure& mu) {
  problem.validate();
  if (mu.masses.size() != static_cast<size_t>(problem.grid->cell_count()))
    throw DomainError("objective: measure not on the problem grid");
  return detail::MacroWorkspace(problem).objective(mu.masses);
}

// delta E / delta mu at mu (first variation), including the problem tilt.
inline std::vector<double> potential(const FreeEnergyProblem& problem,
                                     const GridMeasure& mu) {
  problem.validate();
  return detail::MacroWorkspace(problem).potential(mu.masses);
}

// Sup-norm residual of log(d mu/d mu0) + beta potential(mu) - const over the
// support; zero exactly at a Gibbs-form stationary point.
inline double stationarity_residual(const FreeEnergyProblem& problem,
                                    const GridMeasure& mu) {
  detail::MacroWorkspace ws(problem);
  const auto phi = ws.potential(mu.masses);
  const auto& w = problem.grid->weights;
  double mean = 0, total = 0;
  std::vector<double> g(mu.masses.size(), 0.0);
  for (size_t c = 0; c < mu.masses.size(); ++c) {
    if (mu.masses[c] <= 0 || w[c] <= 0) continue;
    g[c] = std::log(mu.masses[c] / w[c]) + problem.beta * phi[c];
    mean += mu.masses[c] * g[c];
    total += mu.masses[c];
  }
  mean /= total;
  double res = 0;
  for (size_t c = 0; c < mu.masses.size(); ++c)
    if (mu.masses[c] > 0 && w[c] > 0)
      res = std::max(res, std::fabs(g[c] - mean));
  return res;
}

struct FixedPointOptions {
  double damping = 0.5;
  double tolerance = 1e-9;
  int max_iterations = 10000;
};

// Damped self-consistency iteration for finite nonzero beta. For beta > 0 the
// objective is required to be nonincreasing across accepted iterates (the
// damping is halved whenever a step would increase it). For beta < 0 the
// iteration starts from a deterministically perturbed base measure so that a
// symmetry-broken branch can be reached, and collapse onto a single cell is
// reported as a stability failure rather than a minimizer.
inline SolverReport minimize_fixed_point(const FreeEnergyProblem& problem,
                                         const FixedPointOptions& opt = {}) {
  problem.validate();
  if (problem.beta == kInf)
    throw ConfigError("minimize_fixed_point needs finite beta");
  detail::MacroWorkspace ws(problem);
  const int K = ws.K;
  const auto& w = problem.grid->weights;

  std::vector<double> mu = w;
  if (problem.beta < 0) {
    // Mode-1 perturbation in cell index; decays below the bifurcation,
    // grows above it.
    double total = 0;
    for (int c = 0; c < K; ++c) {
      mu[c] = w[c] * (1.0 + 1e-4 * std::cos(kTwoPi * c / K));
      total += mu[c];
    }
    for (double& m : mu) m /= total;
  }

  SolverReport rep;
  double alpha = opt.damping;
  double obj = ws.objective(mu);
  std::vector<double> best = mu;
  double best_obj = obj;
  std::vector<double> target(K);

  for (int it = 1; it <= opt.max_iterations; ++it) {
    rep.iterations = it;
    const auto phi = ws.potential(mu);
    // Normalize(mu0 exp(-beta phi)) in log space.
    double lmax = -kInf;
    for (int c = 0; c < K; ++c) {
      target[c] = (w[c] > 0) ? std::log(w[c]) - problem.beta * phi[c] : -kInf;
      lmax = std::max(lmax, target[c]);
    }
    double total = 0;
    for (int c = 0; c < K; ++c) {
      target[c] = (target[c] == -kInf) ? 0.0 : std::exp(target[c] - lmax);
      total += target[c];
    }
    for (int c = 0; c < K; ++c) target[c] /= total;

    double residual = 0;
    for (int c = 0; c < K; ++c)
      residual = std::max(residual, std::fabs(target[c] - mu[c]));
    rep.residual = residual;
    if (residual < opt.tolerance) {
      rep.converged = true;
      obj = ws.objective(mu);
      if (obj <= best_obj) { best = mu; best_obj = obj; }
      break;
    }

    // Candidate step, with halving-on-increase for beta > 0.
    while (true) {
      std::vector<double> next(K);
      for (int c = 0; c < K; ++c)
        next[c] = (1.0 - alpha) * mu[c] + alpha * target[c];
      const double next_obj = ws.objective(next);
      if (problem.beta > 0 && next_obj > obj + 1e-14 * (1.0 + std::fabs(obj))) {
        if (alpha > 1e-6) {
          alpha *= 0.5;
          continue;
        }
        // Descent failed at the damping floor; for a PSD pair kernel this
        // cannot happen, so surface it instead of accepting silently.
        rep.message = "objective increased at the damping floor";
        rep.converged = false;
        rep.minimizer.grid = problem.grid;
        rep.minimizer.masses = best;
        rep.value = best_obj;
        rep.order_parameter = circle_order_parameter(*problem.grid, best);
        return rep;
      }
      mu = std::move(next);
      obj = next_obj;
      break;
    }
    if (obj <= best_obj) { best = mu; best_obj = obj; }

    if (!std::isfinite(obj)) {
      rep.diverged = true;
      rep.message = "objective became non-finite";
      break;
    }
    if (problem.beta < 0 && problem.spec.has_singular_kernel()) {
      double mmax = 0;
      for (double m : mu) mmax = std::max(mmax, m);
      if (mmax > 0.99) {
        rep.diverged = true;
        rep.message =
            "iterates collapse onto a single cell: the signed rate is "
            "unbounded below at this temperature (stability failure)";
        break;
      }
    }
  }

  rep.minimizer.grid = problem.grid;
  rep.minimizer.masses = best;
  rep.value = best_obj;
  rep.order_parameter = circle_order_parameter(*problem.grid, best);
  if (!rep.converged && !rep.diverged)
    rep.message = "iteration cap reached before the residual tolerance";
  return rep;
}

namespace detail {

// Cholesky-based PSD certificate for the total pair matrix (no order-3 terms).
inline bool psd_certificate(const MacroWorkspace& ws) {
  if (!ws.triple_terms.empty()) return false;
  const int K = ws.K;
  if (ws.pair_mats.empty()) return true;
  std::vector<double> m(static_cast<size_t>(K) * K, 0.0);
  double scale = 0;
  for (const auto& pm : ws.pair_mats)
    for (size_t i = 0; i < pm.size(); ++i) m[i] += pm[i];
  for (int c = 0; c < K; ++c) scale = std::max(scale, std::fabs(m[static_cast<size_t>(c) * K + c]));
  const double shift = 1e-9 * std::max(scale, 1.0);
  for (int c = 0; c < K; ++c) m[static_cast<size_t>(c) * K + c] += shift;
  // In-place Cholesky; failure of a pivot means an eigenvalue below -shift.
  for (int j = 0; j < K; ++j) {
    double d = m[static_cast<size_t>(j) * K + j];
    for (int k = 0; k < j; ++k) {
      const double l = m[static_cast<size_t>(j) * K + k];
      d -= l * l;
    }
    if (d <= 0) return false;
    const double dj = std::sqrt(d);
    m[static_cast<size_t>(j) * K + j] = dj;
    for (int i = j + 1; i < K; ++i) {
      double v = m[static_cast<size_t>(i) * K + j];
      for (int k = 0; k < j; ++k)
        v -= m[static_cast<size_t>(i) * K + k] * m[static_cast<size_t>(j) * K + k];
      m[static_cast<size_t>(i) * K + j] = v / dj;
    }
  }
  return true;
}

}  // namespace detail

struct FrankWolfeOptions {
  double gap_tolerance = 1e-6;
  long max_iterations = 5'000'000;
};

// Zero-temperature minimization of E over the simplex: move toward the vertex
// with the smallest potential, step 2/(t+2), stop at duality gap below the
// tolerance. Ties break toward the lowest cell index. The duality gap is a
// valid optimality certificate only when E is convex; the report carries the
// PSD certificate flag.
inline SolverReport minimize_zero_temperature(const FreeEnergyProblem& problem,
                                              const FrankWolfeOptions& opt = {}) {
  problem.validate();
  if (problem.beta != kInf)
    throw ConfigError("minimize_zero_temperature requires beta = inf");
  detail::MacroWorkspace ws(problem);
  const int K = ws.K;

  SolverReport rep;
  rep.convex_certified = detail::psd_certificate(ws);

  std::vector<double> mu = problem.grid->weights;
  std::vector<double> phi = ws.potential(mu);
  const bool incremental = ws.triple_terms.empty();

  // Constant (linear) part of phi, needed for the incremental update.
  std::vector<double> lin = ws.linear;
  if (!problem.tilt.empty())
    for (int c = 0; c < K; ++c) lin[c] += problem.tilt[c];

  std::vector<double> best = mu;
  double best_obj = ws.objective(mu);
  long it = 0;
  for (; it < opt.max_iterations; ++it) {
    int vertex = 0;
    for (int c = 1; c < K; ++c)
      if (phi[c] < phi[vertex]) vertex = c;
    double gap = -phi[vertex];
    for (int c = 0; c < K; ++c) gap += phi[c] * mu[c];
    rep.residual = gap;
    if (gap < opt.gap_tolerance) {
      rep.converged = true;
      break;
    }
    const double gamma = 2.0 / (static_cast<double>(it) + 2.0);
    for (int c = 0; c < K; ++c) mu[c] *= (1.0 - gamma);
    mu[vertex] += gamma;
    if (incremental) {
      // phi = lin + 2 M mu is affine in mu: blend and add the vertex column.
      for (int c = 0; c < K; ++c)
        phi[c] = (1.0 - gamma) * (phi[c] - lin[c]) + lin[c];
      for (const auto& m : ws.pair_mats)
        for (int c = 0; c < K; ++c)
          phi[c] += gamma * 2.0 * m[static_cast<size_t>(c) * K + vertex];
    } else {
      phi = ws.potential(mu);
    }
    // The objective is O(K^2); sample it rather than paying it every step.
    if ((it & 1023) == 0) {
      const double obj = ws.objective(mu);
      if (obj < best_obj) {
        best_obj = obj;
        best = mu;
      }
    }
  }
  rep.iterations = static_cast<int>(std::min<long>(it, INT32_MAX));
  const double final_obj = ws.objective(mu);
  if (final_obj < best_obj) {
    best_obj = final_obj;
    best = mu;
  }
  rep.minimizer.grid = problem.grid;
  rep.minimizer.masses = best;
  rep.value = best_obj;
  rep.order_parameter = circle_order_parameter(*problem.grid, best);
  if (!rep.converged) rep.message = "Frank-Wolfe iteration cap reached";
  if (!rep.convex_certified)
    rep.message += std::string(rep.message.empty() ? "" : "; ") +
                   "pair matrix not certified PSD: stationary point only";
  return rep;
}

// Legendre-Fenchel value f(Phi) = sup_mu (Phi(mu) - F_beta(mu)), i.e.
// -f(-Phi) = inf_mu (F_beta + Phi), computed by solving the tilted problem.
inline double dual_value(const FreeEnergyProblem& problem,
                         const std::vector<double>& u,
                         SolverReport* report = nullptr) {
  problem.validate();
  if (!(problem.beta > 0) || problem.beta == kInf)
    throw ConfigError("dual_value needs beta in (0, inf)");
  FreeEnergyProblem tilted_problem = problem;
  if (tilted_problem.tilt.empty())
    tilted_problem.tilt.assign(static_cast<size_t>(problem.grid->cell_count()), 0.0);
  if (u.size() != tilted_problem.tilt.size())
    throw ConfigError("dual_value: tilt size does not match the grid");
  for (size_t c = 0; c < u.size(); ++c) tilted_problem.tilt[c] -= u[c];
  SolverReport rep = minimize_fixed_point(tilted_problem);
  if (report) *report = rep;
  return -rep.value;
}

}  // namespace gibbslab
