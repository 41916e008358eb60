#pragma once

// Partition-function estimation, exact finite-space Gibbs laws over type
// vectors, the Gibbs variational identity as a literal finite-N identity,
// ball-rate checks against the macroscopic rate functional, recovery-sequence
// probes, and the negative-temperature stability certificates.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "gibbslab/interaction.hpp"
#include "gibbslab/measure.hpp"
#include "gibbslab/sampler.hpp"
#include "gibbslab/solver.hpp"
#include "gibbslab/stability.hpp"

namespace gibbslab {

// Occupation counts of a configuration over the k points of a finite space.
struct TypeVector {
  std::vector<int> counts;

  int total() const {
    int n = 0;
    for (int c : counts) n += c;
    return n;
  }
};

// Enumerates all type vectors with k entries summing to n.
inline std::vector<TypeVector> enumerate_types(int k, int n) {
  double expected = 1.0;
  for (int j = 1; j < k; ++j) expected *= static_cast<double>(n + j) / j;
  if (expected > 1e7)
    throw ConfigError("type-vector enumeration too large (> 1e7)");
  std::vector<TypeVector> out;
  std::vector<int> work(static_cast<size_t>(k), 0);
  std::function<void(int, int)> rec = [&](int pos, int left) {
    if (pos == k - 1) {
      work[pos] = left;
      out.push_back(TypeVector{work});
      return;
    }
    for (int c = 0; c <= left; ++c) {
      work[pos] = c;
      rec(pos + 1, left - c);
    }
  };
  rec(0, n);
  return out;
}

// A representative microstate of a type class (H is permutation symmetric).
inline Configuration representative(const TypeVector& type) {
  Configuration config;
  for (size_t a = 0; a < type.counts.size(); ++a)
    for (int c = 0; c < type.counts[a]; ++c)
      config.points.push_back(Point{static_cast<double>(a), 0.0, 0.0});
  return config;
}

// Exact Gibbs law over type vectors on a finite space:
//   P(type n) proportional to multinomial(N; n) prod_a p_a^{n_a} e^{-beta H(n)}.
struct FiniteLawResult {
  int n = 0;
  double beta = 0;
  std::vector<TypeVector> types;
  std::vector<double> prob;      // normalized probabilities
  std::vector<double> log_base;  // log of multinomial * prod p^n (base law)
  std::vector<double> energy;    // H per type (+inf possible)
  double log_z = 0;              // log Z_{N,beta}
};

inline FiniteLawResult exact_law_finite(const StateSpace& space,
                                        const HamiltonianSpec& spec, int n,
                                        double beta) {
  if (space.kind != SpaceKind::FiniteSet)
    throw ConfigError("exact_law_finite needs a finite space");
  spec.validate();
  const int k = space.finite_k;
  FiniteLawResult law;
  law.n = n;
  law.beta = beta;
  law.types = enumerate_types(k, n);

  const double log_n_fact = std::lgamma(n + 1.0);
  std::vector<double> log_weight;
  log_weight.reserve(law.types.size());
  double lmax = -kInf;
  for (const auto& type : law.types) {
    double lb = log_n_fact;
    bool zero = false;
    for (int a = 0; a < k; ++a) {
      lb -= std::lgamma(type.counts[a] + 1.0);
      if (type.counts[a] > 0) {
        if (space.finite_weights[a] == 0) { zero = true; break; }
        lb += type.counts[a] * std::log(space.finite_weights[a]);
      }
    }
    const double h = hamiltonian(spec, representative(type));
    law.energy.push_back(h);
    law.log_base.push_back(zero ? -kInf : lb);
    double lw;
    if (zero) {
      lw = -kInf;
    } else if (h == kInf) {
      if (beta > 0) lw = -kInf;         // zero Gibbs weight
      else if (beta < 0)
        throw StabilityError(
            "exact_law_finite: a type class has infinite weight at beta < 0; "
            "the Gibbs law does not exist");
      else lw = lb;                      // beta = 0: base law
    } else {
      lw = lb - beta * h;
    }
    log_weight.push_back(lw);
    lmax = std::max(lmax, lw);
  }
  if (lmax == -kInf)
    throw StabilityError("exact_law_finite: all type classes have zero weight");
  double total = 0;
  for (double lw : log_weight) total += std::exp(lw - lmax);
  law.log_z = lmax + std::log(total);
  law.prob.reserve(log_weight.size());
  for (double lw : log_weight)
    law.prob.push_back(lw == -kInf ? 0.0 : std::exp(lw - law.log_z));
  return law;
}

// --- partition function --------------------------------------------------

enum class PartitionMethod { ExactEnum, TensorQuadrature, ThermoIntegration };

inline std::string to_string(PartitionMethod m) {
  switch (m) {
    case PartitionMethod::ExactEnum: return "exact-enum";
    case PartitionMethod::TensorQuadrature: return "tensor-quadrature";
    case PartitionMethod::ThermoIntegration: return "thermo-integration";
  }
  return "?";
}

struct ThermoRung {
  double beta = 0;
  double mean_energy = 0;  // <H/N> at this rung
  double stderr_energy = 0;
};

struct PartitionEstimate {
  double value = 0;    // (1/N) log Z_{N, beta}
  double stderr_value = 0;
  PartitionMethod method = PartitionMethod::ExactEnum;
  bool diverged = false;
  std::string message;
  std::vector<ThermoRung> rungs;  // thermo-integration only
};

struct ThermoBudget {
  int rungs = 16;
  long sweeps = 4000;
  long burn_in = 1000;
  long thinning = 5;
  int chains = 2;
  std::uint64_t seed = 1;
  int workers = 1;
};

namespace detail {

inline PartitionEstimate log_partition_exact_enum(const StateSpace& space,
                                                  const HamiltonianSpec& spec,
                                                  int n, double beta) {
  PartitionEstimate est;
  est.method = PartitionMethod::ExactEnum;
  try {
    est.value = exact_law_finite(space, spec, n, beta).log_z / n;
  } catch (const StabilityError& e) {
    est.diverged = true;
    est.message = e.what();
    est.value = kInf;
  }
  return est;
}

inline PartitionEstimate log_partition_quadrature(const HamiltonianSpec& spec,
                                                  int n, double beta) {
  if (!spec.grid) throw ConfigError("tensor quadrature needs a grid");
  if (n > 3) throw ConfigError("tensor quadrature supports N <= 3");
  const QuadratureGrid& grid = *spec.grid;
  const int K = grid.cell_count();
  PartitionEstimate est;
  est.method = PartitionMethod::TensorQuadrature;

  std::vector<double> logw(K, -kInf);
  for (int c = 0; c < K; ++c)
    if (grid.weights[c] > 0) logw[c] = std::log(grid.weights[c]);

  double lmax = -kInf;
  std::vector<double> terms;
  Configuration config;
  config.points.assign(static_cast<size_t>(n), Point{});
  std::vector<int> idx(static_cast<size_t>(n), 0);
  const long tuples = static_cast<long>(std::pow(static_cast<double>(K), n));
  terms.reserve(static_cast<size_t>(tuples));
  for (long t = 0; t < tuples; ++t) {
    long rest = t;
    double lw = 0;
    for (int j = 0; j < n; ++j) {
      idx[j] = static_cast<int>(rest % K);
      rest /= K;
      lw += logw[idx[j]];
      config.points[j] = grid.nodes[idx[j]];
    }
    if (lw == -kInf) continue;
    const double h = hamiltonian(spec, config);
    double term;
    if (h == kInf) {
      if (beta > 0) continue;           // weight 0
      if (beta < 0) {                   // weight +inf
        est.diverged = true;
        est.message = "infinite Gibbs weight on the quadrature diagonal";
        est.value = kInf;
        return est;
      }
      term = lw;
    } else {
      term = lw - beta * h;
    }
    terms.push_back(term);
    lmax = std::max(lmax, term);
  }
  double total = 0;
  for (double t : terms) total += std::exp(t - lmax);
  est.value = (lmax + std::log(total)) / n;
  return est;
}

inline PartitionEstimate log_partition_thermo(const StateSpace& space,
                                              const HamiltonianSpec& spec,
                                              int n, double beta,
                                              const ThermoBudget& budget) {
  PartitionEstimate est;
  est.method = PartitionMethod::ThermoIntegration;
  const int rungs = std::max(budget.rungs, 16);
  // Ladder of beta values from 0 to beta inclusive.
  std::vector<double> ladder(static_cast<size_t>(rungs) + 1);
  for (int r = 0; r <= rungs; ++r)
    ladder[r] = beta * static_cast<double>(r) / rungs;

  est.rungs.resize(ladder.size());
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string fail_reason;
  std::mutex fail_mutex;
  auto work = [&]() {
    for (int r = next.fetch_add(1); r <= rungs; r = next.fetch_add(1)) {
      RunOptions opt;
      opt.n_particles = n;
      opt.sweeps = budget.sweeps;
      opt.burn_in = budget.burn_in;
      opt.thinning = budget.thinning;
      opt.chains = budget.chains;
      opt.seed = derive_seed(budget.seed, StreamId::ThermoRung, r);
      opt.workers = 1;
      try {
        RunResult res = run(space, spec, TemperatureSchedule::fixed(ladder[r]), opt);
        if (res.aborted) {
          std::lock_guard<std::mutex> lk(fail_mutex);
          failed = true;
          fail_reason = res.abort_reason;
          continue;
        }
        est.rungs[r] = ThermoRung{ladder[r], res.mean_energy, res.stderr_energy};
      } catch (const StabilityError& e) {
        std::lock_guard<std::mutex> lk(fail_mutex);
        failed = true;
        fail_reason = e.what();
      }
    }
  };
  const int workers = std::max(1, budget.workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failed) {
    est.diverged = true;
    est.message = fail_reason;
    est.value = beta < 0 ? kInf : -kInf;
    return est;
  }

  // (1/N) log Z_beta = - int_0^beta <H/N>_{b} db, trapezoid over the ladder.
  double integral = 0, var = 0;
  for (int r = 0; r < rungs; ++r) {
    const double db = ladder[r + 1] - ladder[r];
    integral += 0.5 * db * (est.rungs[r].mean_energy + est.rungs[r + 1].mean_energy);
  }
  for (int r = 0; r <= rungs; ++r) {
    const double coeff =
        (r == 0 ? 0.5 * (ladder[1] - ladder[0])
                : (r == rungs ? 0.5 * (ladder[rungs] - ladder[rungs - 1])
                              : 0.5 * (ladder[r + 1] - ladder[r - 1])));
    var += coeff * coeff * est.rungs[r].stderr_energy * est.rungs[r].stderr_energy;
  }
  est.value = -integral;
  est.stderr_value = std::sqrt(var);
  return est;
}

}  // namespace detail

// (1/N) log Z_{N,beta} by the requested method. beta = 0 returns exactly 0.
inline PartitionEstimate log_partition(const StateSpace& space,
                                       const HamiltonianSpec& spec, int n,
                                       double beta, PartitionMethod method,
                                       const ThermoBudget& budget = {}) {
  spec.validate();
  if (beta == 0.0) {
    PartitionEstimate est;
    est.method = method;
    est.value = 0.0;
    return est;
  }
  switch (method) {
    case PartitionMethod::ExactEnum:
      return detail::log_partition_exact_enum(space, spec, n, beta);
    case PartitionMethod::TensorQuadrature:
      return detail::log_partition_quadrature(spec, n, beta);
    case PartitionMethod::ThermoIntegration:
      return detail::log_partition_thermo(space, spec, n, beta, budget);
  }
  throw ConfigError("unknown partition method");
}

// --- Gibbs variational identity ------------------------------------------

struct GibbsIdentityReport {
  double mean_energy = 0;      // E^{(N)} of the Gibbs measure
  double mean_entropy = 0;     // D^{(N)} of the Gibbs measure
  double free_energy = 0;      // E^{(N)} + D^{(N)} / beta
  double log_z_term = 0;       // -(1/(N beta)) log Z
  double residual = 0;         // |free_energy - log_z_term|
};

// Computes both sides of inf F^{(N)} = -(1/(N beta)) log Z exactly (finite
// enumeration or tensor quadrature) and reports the residual.
inline GibbsIdentityReport gibbs_identity_check(const StateSpace& space,
                                                const HamiltonianSpec& spec,
                                                int n, double beta) {
  if (beta == 0) throw ConfigError("gibbs_identity_check needs beta != 0");
  GibbsIdentityReport rep;
  if (space.kind == SpaceKind::FiniteSet) {
    const FiniteLawResult law = exact_law_finite(space, spec, n, beta);
    double e = 0, d = 0;
    for (size_t t = 0; t < law.types.size(); ++t) {
      if (law.prob[t] <= 0) continue;
      e += law.prob[t] * law.energy[t];
      d += law.prob[t] * (std::log(law.prob[t]) - law.log_base[t]);
    }
    rep.mean_energy = e / n;
    rep.mean_entropy = d / n;
    rep.log_z_term = -law.log_z / (n * beta);
  } else {
    if (!spec.grid) throw ConfigError("gibbs_identity_check needs a grid");
    if (n > 3) throw ConfigError("gibbs_identity_check: N <= 3 off finite spaces");
    const QuadratureGrid& grid = *spec.grid;
    const int K = grid.cell_count();
    const PartitionEstimate z =
        detail::log_partition_quadrature(spec, n, beta);
    if (z.diverged)
      throw StabilityError("gibbs_identity_check: partition diverges");
    const double log_z = z.value * n;
    double e = 0, d = 0;
    Configuration config;
    config.points.assign(static_cast<size_t>(n), Point{});
    const long tuples = static_cast<long>(std::pow(static_cast<double>(K), n));
    for (long t = 0; t < tuples; ++t) {
      long rest = t;
      double lw = 0;
      for (int j = 0; j < n; ++j) {
        const int c = static_cast<int>(rest % K);
        rest /= K;
        lw += grid.weights[c] > 0 ? std::log(grid.weights[c]) : -kInf;
        config.points[j] = grid.nodes[c];
      }
      if (lw == -kInf) continue;
      const double h = hamiltonian(spec, config);
      if (h == kInf) continue;  // zero mass at beta > 0
      const double log_mass = lw - beta * h - log_z;
      const double mass = std::exp(log_mass);
      if (mass == 0) continue;
      e += mass * h;
      d += mass * (log_mass - lw);
    }
    rep.mean_energy = e / n;
    rep.mean_entropy = d / n;
    rep.log_z_term = -log_z / (n * beta);
  }
  rep.free_energy = rep.mean_energy + rep.mean_entropy / beta;
  rep.residual = std::fabs(rep.free_energy - rep.log_z_term);
  return rep;
}

// --- ball rates on finite spaces ------------------------------------------

// Closed half-space constraint sum_a coeffs[a] * mu_a >= threshold.
struct LinearConstraint {
  std::vector<double> coeffs;
  double threshold = 0;

  bool satisfied(const std::vector<double>& freq) const {
    double acc = 0;
    for (size_t a = 0; a < coeffs.size() && a < freq.size(); ++a)
      acc += coeffs[a] * freq[a];
    return acc >= threshold - 1e-12;
  }
};

struct MeasureEvent {
  std::vector<LinearConstraint> constraints;

  bool contains(const std::vector<double>& freq) const {
    for (const auto& c : constraints)
      if (!c.satisfied(freq)) return false;
    return true;
  }
};

struct LDPReport {
  std::string speed;  // "beta_N*N" (beta > 0) or "N" (beta < 0)
  std::vector<int> n_list;
  std::vector<double> empirical_rate;
  double target = 0;  // inf over the event of the normalized rate functional
  std::vector<double> residual;
  double tolerance = 0.15;
  bool pass = false;
};

namespace detail {

// Scans the k-simplex (k <= 3) for the infimum of the rate objective, total
// and restricted to the event. Returns {inf_total, inf_event}.
inline std::pair<double, double> scan_rate_inf(
    const MacroWorkspace& ws, const MeasureEvent& event, int k) {
  double inf_total = kInf, inf_event = kInf;
  auto consider = [&](const std::vector<double>& q) {
    const double v = ws.objective(q);
    inf_total = std::min(inf_total, v);
    if (event.contains(q)) inf_event = std::min(inf_event, v);
  };
  if (k == 1) {
    consider({1.0});
  } else if (k == 2) {
    const int steps = 400000;
    for (int s = 0; s <= steps; ++s) {
      const double q = static_cast<double>(s) / steps;
      consider({q, 1.0 - q});
    }
  } else if (k == 3) {
    const int steps = 1200;
    for (int i = 0; i <= steps; ++i)
      for (int j = 0; j <= steps - i; ++j) {
        const double a = static_cast<double>(i) / steps;
        const double b = static_cast<double>(j) / steps;
        consider({a, b, 1.0 - a - b});
      }
  } else {
    throw ConfigError("rate scans support k <= 3");
  }
  return {inf_total, inf_event};
}

}  // namespace detail

// Exact decay rate of Gamma_N(event) versus the macroscopic rate functional.
// beta > 0 uses speed beta_N * N against F_beta - inf F_beta; beta < 0 uses
// speed N against (beta E + D) - inf(beta E + D).
inline LDPReport ball_rate(const StateSpace& space, const HamiltonianSpec& spec,
                           const TemperatureSchedule& schedule,
                           const MeasureEvent& event,
                           const std::vector<int>& n_list) {
  if (space.kind != SpaceKind::FiniteSet)
    throw ConfigError("ball_rate needs a finite space");
  if (event.constraints.empty())
    throw DomainError("ball_rate: empty event");
  if (n_list.empty()) throw ConfigError("ball_rate: empty N list");
  const double beta_limit = schedule.limit();
  if (beta_limit == 0) throw ConfigError("ball_rate: beta must be nonzero");

  LDPReport rep;
  rep.speed = beta_limit > 0 ? "beta_N*N" : "N";

  const int k = space.finite_k;
  for (int n : n_list) {
    const double beta_n = schedule.beta_at(n);
    const FiniteLawResult law = exact_law_finite(space, spec, n, beta_n);
    double mass = 0;
    std::vector<double> freq(static_cast<size_t>(k));
    for (size_t t = 0; t < law.types.size(); ++t) {
      for (int a = 0; a < k; ++a)
        freq[a] = static_cast<double>(law.types[t].counts[a]) / n;
      if (event.contains(freq)) mass += law.prob[t];
    }
    const double speed = beta_limit > 0 ? beta_n * n : n;
    rep.n_list.push_back(n);
    rep.empirical_rate.push_back(mass > 0 ? -std::log(mass) / speed : kInf);
  }

  // Macroscopic target on the same finite space.
  FreeEnergyProblem prob;
  prob.spec = spec;
  prob.grid = std::make_shared<const QuadratureGrid>(build_grid(space, 2));
  prob.beta = beta_limit;
  detail::MacroWorkspace ws(prob);
  const auto [inf_total, inf_event] = detail::scan_rate_inf(ws, event, k);
  rep.target = inf_event - inf_total;

  for (double e : rep.empirical_rate) rep.residual.push_back(e - rep.target);
  const double last = rep.empirical_rate.back();
  if (std::fabs(rep.target) < 1e-9)
    rep.pass = std::fabs(last) < 1e-9;
  else
    rep.pass = std::isfinite(last) &&
               std::fabs(last - rep.target) <= rep.tolerance * std::fabs(rep.target);
  return rep;
}

// --- recovery sequences ----------------------------------------------------

struct GammaRecoveryRow {
  int n = 0;
  double mean_energy = 0;    // mean of H/N over the draws
  double stderr_energy = 0;
  double median_gap = 0;     // median |H/N - E(mu)|
  double probe_frequency = 0;  // fraction with H/N >= E(mu) - epsilon
};

struct GammaRecoveryReport {
  double target_energy = 0;  // E(mu) by quadrature
  bool recoverable = true;
  double epsilon = 0.05;
  std::vector<GammaRecoveryRow> rows;
};

// Draws configurations i.i.d. from mu (cell-first inverse transform) and
// tracks how H/N approaches E(mu) along the n-list.
inline GammaRecoveryReport gamma_recovery(const StateSpace& space,
                                          const HamiltonianSpec& spec,
                                          const GridMeasure& mu,
                                          const std::vector<int>& n_list,
                                          std::uint64_t seed, int draws = 100) {
  spec.validate();
  mu.validate();
  GammaRecoveryReport rep;
  rep.target_energy = macroscopic_energy(spec, *mu.grid, mu.masses);
  if (!std::isfinite(rep.target_energy)) {
    rep.recoverable = false;
    return rep;
  }

  // Cell-first sampler from the grid measure.
  std::vector<double> cdf(mu.masses.size());
  double acc = 0;
  for (size_t c = 0; c < mu.masses.size(); ++c) {
    acc += mu.masses[c];
    cdf[c] = acc;
  }
  for (size_t idx = 0; idx < n_list.size(); ++idx) {
    const int n = n_list[idx];
    RandomStream rng(derive_seed(seed, StreamId::Recovery, idx));
    std::vector<double> values;
    values.reserve(static_cast<size_t>(draws));
    for (int d = 0; d < draws; ++d) {
      Configuration config;
      config.points.reserve(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        size_t c = static_cast<size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (c >= cdf.size()) c = cdf.size() - 1;
        config.points.push_back(
            mu.grid->point_in_cell(static_cast<int>(c), rng.uniform(), rng.uniform()));
      }
      values.push_back(hamiltonian(spec, config) / n);
    }
    GammaRecoveryRow row;
    row.n = n;
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= values.size() > 1 ? static_cast<double>(values.size() - 1) *
                                   static_cast<double>(values.size())
                             : 1.0;
    row.mean_energy = mean;
    row.stderr_energy = std::sqrt(var);
    std::vector<double> gaps;
    gaps.reserve(values.size());
    int above = 0;
    for (double v : values) {
      gaps.push_back(std::fabs(v - rep.target_energy));
      if (v >= rep.target_energy - rep.epsilon) ++above;
    }
    std::sort(gaps.begin(), gaps.end());
    row.median_gap = gaps[gaps.size() / 2];
    row.probe_frequency = static_cast<double>(above) / static_cast<double>(values.size());
    rep.rows.push_back(row);
  }
  return rep;
}

// --- marginal L^p stability -------------------------------------------------

struct LpMarginalReport {
  double p = 2;
  std::vector<int> n_list;
  std::vector<double> norms;  // ||rho_2||_p per N
  double spread = 0;          // max norm / min norm
  bool pass = false;
  bool inconclusive = false;
};

// ||rho_2^{(N)}||_p on the grid per N; passes when the largest value stays
// within a factor 1.5 of the smallest (no growth trend).
inline LpMarginalReport lp_marginal_check(
    const std::vector<std::pair<int, const std::vector<SampleRecord>*>>& runs,
    const QuadratureGrid& grid, double p) {
  LpMarginalReport rep;
  rep.p = p;
  for (const auto& [n, samples] : runs) {
    rep.n_list.push_back(n);
    if (!samples || samples->size() < 10) {
      rep.inconclusive = true;
      rep.norms.push_back(0);
      continue;
    }
    const auto rho = marginal_density(*samples, 2, grid);
    const int K = grid.cell_count();
    double acc = 0;
    for (int a = 0; a < K; ++a)
      for (int b = 0; b < K; ++b) {
        const double w = grid.weights[a] * grid.weights[b];
        if (w > 0)
          acc += w * std::pow(rho[static_cast<size_t>(a) * K + b], p);
      }
    rep.norms.push_back(std::pow(acc, 1.0 / p));
  }
  if (!rep.inconclusive && !rep.norms.empty()) {
    double lo = rep.norms.front(), hi = rep.norms.front();
    for (double v : rep.norms) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    rep.spread = lo > 0 ? hi / lo : kInf;
    rep.pass = rep.spread <= 1.5;
  }
  return rep;
}

}  // namespace gibbslab
