#pragma once

// Metropolis sampling of the canonical ensemble e^{-beta_N H} mu0^{xN} / Z
// with single-particle proposals: uniform steps in a geodesic ball whose
// radius is adapted toward 30% acceptance during burn-in and frozen
// afterwards (freezing keeps the post-burn-in chain exactly reversible).
// Chains are fully independent, each on its own seed-derived random stream,
// so results do not depend on how chains are scheduled onto workers.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gibbslab/interaction.hpp"
#include "gibbslab/measure.hpp"
#include "gibbslab/rng.hpp"
#include "gibbslab/space.hpp"
#include "gibbslab/stability.hpp"

namespace gibbslab {

struct TemperatureSchedule {
  enum class Kind { Fixed, Proportional };
  Kind kind = Kind::Fixed;
  double value = 0;  // Fixed: beta; Proportional: c with beta_N = c N

  static TemperatureSchedule fixed(double beta) {
    return {Kind::Fixed, beta};
  }
  static TemperatureSchedule proportional(double c) {
    if (c <= 0) throw ConfigError("proportional schedule needs c > 0");
    return {Kind::Proportional, c};
  }

  double beta_at(int n) const {
    return kind == Kind::Fixed ? value : value * n;
  }
  double limit() const { return kind == Kind::Fixed ? value : kInf; }
};

struct ChainState {
  Configuration config;
  double energy = 0;          // cached H(config)
  long sweep = 0;
  double beta_n = 0;
  double proposal_radius = 0; // geodesic ball radius (ignored on finite sets)
  bool adapting = true;
  long proposals = 0;
  long accepts = 0;
  long window_proposals = 0;
  long window_accepts = 0;
  long sentinel_count = 0;    // +inf-weight events at beta < 0
};

struct ChainDiagnostics {
  std::vector<double> acceptance_per_window;  // windows of 100 sweeps
  std::vector<double> energy_trace;           // thinned H/N values
  double acceptance_rate = 0;                 // post-adaptation
  double tau_int = 1;                         // of the energy series
  double ess = 0;
  long sentinel_count = 0;
  bool aborted = false;
  std::string abort_reason;
};

namespace detail {

// Proposal: uniform in the geodesic ball of radius r around x. Returns
// nothing when the step leaves the space (interval boundary), which the
// caller treats as a rejected move; the proposal density stays symmetric.
inline std::optional<Point> propose(const StateSpace& space, const Point& x,
                                    double r, RandomStream& rng) {
  switch (space.kind) {
    case SpaceKind::Circle:
      return Point{wrap_angle(x[0] + rng.uniform(-r, r)), 0.0, 0.0};
    case SpaceKind::Torus2: {
      // Uniform in the disk of radius r.
      double a, b;
      do {
        a = rng.uniform(-r, r);
        b = rng.uniform(-r, r);
      } while (a * a + b * b > r * r);
      return Point{wrap_angle(x[0] + a), wrap_angle(x[1] + b), 0.0};
    }
    case SpaceKind::Sphere2: {
      // Uniform in the cap of geodesic radius r: height uniform in
      // [cos r, 1], azimuth uniform, rotated into the frame of x.
      const double zc = rng.uniform(std::cos(std::min(r, std::numbers::pi)), 1.0);
      const double az = rng.uniform(0.0, kTwoPi);
      const double s = std::sqrt(std::max(0.0, 1.0 - zc * zc));
      // Orthonormal basis (e1, e2, x).
      Point e1;
      if (std::fabs(x[0]) < 0.9) e1 = Point{1, 0, 0}; else e1 = Point{0, 1, 0};
      const double d = e1[0] * x[0] + e1[1] * x[1] + e1[2] * x[2];
      for (int k = 0; k < 3; ++k) e1[k] -= d * x[k];
      double n = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
      for (int k = 0; k < 3; ++k) e1[k] /= n;
      const Point e2{x[1] * e1[2] - x[2] * e1[1], x[2] * e1[0] - x[0] * e1[2],
                     x[0] * e1[1] - x[1] * e1[0]};
      Point y;
      for (int k = 0; k < 3; ++k)
        y[k] = zc * x[k] + s * (std::cos(az) * e1[k] + std::sin(az) * e2[k]);
      n = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
      for (int k = 0; k < 3; ++k) y[k] /= n;
      return y;
    }
    case SpaceKind::Interval: {
      const double y = x[0] + rng.uniform(-r, r);
      if (y < 0.0 || y > 1.0) return std::nullopt;
      return Point{y, 0.0, 0.0};
    }
    case SpaceKind::FiniteSet:
      return Point{static_cast<double>(rng.uniform_index(space.finite_k)), 0.0,
                   0.0};
  }
  return std::nullopt;
}

}  // namespace detail

// Number of consecutive +inf-weight proposals after which a negative
// temperature run aborts with a non-normalizable-ensemble diagnosis.
inline constexpr long kSentinelAbortThreshold = 10;

// Fresh chain with an i.i.d. base-measure configuration and cached energy.
// For beta < 0 the ensemble is first prechecked: a divergent pair
// exponential-moment bound means Z grows super-exponentially and the run is
// refused. For beta > 0 with singular kernels, zero-weight (coincident)
// initial draws are redrawn.
inline ChainState init_chain(const StateSpace& space, const HamiltonianSpec& spec,
                             int n, const TemperatureSchedule& schedule,
                             std::uint64_t seed) {
  if (n < 1) throw ConfigError("init_chain: need N >= 1");
  if (space.kind != spec.space.kind)
    throw ConfigError("init_chain: space does not match the Hamiltonian's");
  spec.validate();
  ChainState state;
  state.beta_n = schedule.beta_at(n);

  if (state.beta_n < 0) {
    const RefinementReport pre = pair_stability_precheck(spec, state.beta_n);
    if (pre.verdict == StabilityVerdict::Divergent)
      throw StabilityError(
          "stability precheck failed at beta = " + std::to_string(state.beta_n) +
          ": the pair exponential moment C = int int e^{-beta W} d mu0^2 "
          "diverges under grid refinement, so Z_N admits no C^N bound and the "
          "ensemble is not normalizable");
  }

  for (int attempt = 0; attempt < 100; ++attempt) {
    state.config.points = sample_base(space, derive_seed(seed, StreamId::BaseSampling, attempt), n);
    state.energy = hamiltonian(spec, state.config);
    if (state.energy < kInf || state.beta_n <= 0) break;
  }
  if (state.energy == kInf && state.beta_n > 0)
    throw StabilityError("could not draw a finite-energy initial configuration");

  state.proposal_radius = 0.5 * space.diameter();
  return state;
}

namespace detail {

// The circle rotor kernel sum_{j != i} cos(x - theta_j) collapses onto the
// running first harmonic (sum cos, sum sin), making pair deltas O(1). The
// fast path applies when every interaction term is a cosine pair kernel.
struct RotorCache {
  bool active = false;
  double pair_coefficient = 0;  // sum of cosine coefficients
  double sum_cos = 0, sum_sin = 0;
  std::vector<double> cos_i, sin_i;

  static bool eligible(const HamiltonianSpec& spec) {
    if (spec.space.kind != SpaceKind::Circle) return false;
    for (const auto& t : spec.terms) {
      if (t.order == 1) continue;
      if (t.order != 2 || t.form != KernelForm::Cosine) return false;
    }
    return true;
  }

  void rebuild(const HamiltonianSpec& spec, const Configuration& config) {
    active = true;
    pair_coefficient = 0;
    for (const auto& t : spec.terms)
      if (t.order == 2) pair_coefficient += t.coefficient;
    const int n = config.size();
    cos_i.resize(n);
    sin_i.resize(n);
    sum_cos = sum_sin = 0;
    for (int i = 0; i < n; ++i) {
      cos_i[i] = std::cos(config.points[i][0]);
      sin_i[i] = std::sin(config.points[i][0]);
      sum_cos += cos_i[i];
      sum_sin += sin_i[i];
    }
  }

  // Exact pair delta for x_i -> x_new (matches move_delta's cosine part).
  double pair_delta(int i, double cos_new, double sin_new, int n) const {
    return 2.0 * pair_coefficient / n *
           ((cos_new - cos_i[i]) * (sum_cos - cos_i[i]) +
            (sin_new - sin_i[i]) * (sum_sin - sin_i[i]));
  }

  void apply(int i, double cos_new, double sin_new) {
    sum_cos += cos_new - cos_i[i];
    sum_sin += sin_new - sin_i[i];
    cos_i[i] = cos_new;
    sin_i[i] = sin_new;
  }
};

}  // namespace detail

// One sweep = N single-particle Metropolis proposals (random particle scan).
// Returns the number of accepted proposals. +inf deltas are auto-rejected at
// beta >= 0 and auto-accepted-and-flagged at beta < 0 (instability sentinel).
inline int sweep(ChainState& state, const HamiltonianSpec& spec,
                 RandomStream& rng) {
  const int n = state.config.size();
  const double beta = state.beta_n;
  detail::RotorCache rotor;
  if (detail::RotorCache::eligible(spec)) rotor.rebuild(spec, state.config);
  int accepted = 0;
  for (int rep = 0; rep < n; ++rep) {
    const int i = static_cast<int>(rng.uniform_index(n));
    const auto proposal =
        detail::propose(spec.space, state.config.points[i],
                        state.proposal_radius, rng);
    ++state.proposals;
    ++state.window_proposals;
    if (!proposal) continue;  // stepped out of the space: reject
    double cos_new = 0, sin_new = 0;
    double delta;
    if (rotor.active) {
      cos_new = std::cos((*proposal)[0]);
      sin_new = std::sin((*proposal)[0]);
      delta = rotor.pair_delta(i, cos_new, sin_new, n);
      for (const auto& t : spec.terms)
        if (t.order == 1)
          delta += field_value(t, spec, *proposal) -
                   field_value(t, spec, state.config.points[i]);
      delta += tilt_value(spec, *proposal) -
               tilt_value(spec, state.config.points[i]);
    } else {
      delta = move_delta(spec, state.config, i, *proposal);
    }
    // Proposals are symmetric against the chart-uniform reference, so the
    // base measure enters through its density ratio.
    const double base_new = base_log_weight(spec.space, *proposal);
    const double base_old = base_log_weight(spec.space, state.config.points[i]);

    bool accept;
    if (base_new == -kInf) {
      accept = false;  // the target never charges zero-base points
    } else if (base_old == -kInf) {
      accept = true;
    } else if (beta == 0.0) {
      const double log_ratio = base_new - base_old;  // product base measure
      accept = log_ratio >= 0 || std::log(rng.uniform()) < log_ratio;
    } else if (delta == kInf) {
      accept = beta < 0;  // infinite weight: instability sentinel
      if (beta < 0) ++state.sentinel_count;
    } else if (delta == -kInf) {
      accept = beta > 0;
    } else {
      const double log_ratio = (base_new - base_old) - beta * delta;
      accept = log_ratio >= 0 || std::log(rng.uniform()) < log_ratio;
    }
    if (accept) {
      state.config.points[i] = *proposal;
      if (rotor.active) rotor.apply(i, cos_new, sin_new);
      state.energy = (delta == kInf || state.energy == kInf)
                         ? kInf
                         : (delta == -kInf ? hamiltonian(spec, state.config)
                                           : state.energy + delta);
      ++accepted;
      ++state.accepts;
      ++state.window_accepts;
    }
  }
  ++state.sweep;
  // Bound the drift of the incremental energy cache.
  if (state.sweep % 100 == 0) state.energy = hamiltonian(spec, state.config);
  return accepted;
}

struct RunOptions {
  int n_particles = 64;
  long sweeps = 10000;
  long burn_in = 2000;
  long thinning = 10;
  int chains = 1;
  std::uint64_t seed = 1;
  int workers = 1;
  double target_acceptance = 0.3;
};

struct SampleRecord {
  int chain = 0;
  long sweep = 0;
  Configuration config;
  double energy = 0;  // H(config)
};

struct RunResult {
  std::vector<SampleRecord> samples;  // ordered by (chain, sweep)
  std::vector<ChainDiagnostics> diagnostics;
  double mean_energy = 0;    // mean of H/N
  double stderr_energy = 0;  // batch-means standard error
  bool ess_warning = false;
  bool aborted = false;
  std::string abort_reason;
  double beta_n = 0;
};

namespace detail {

inline double autocorrelation_time(const std::vector<double>& series) {
  const size_t n = series.size();
  if (n < 8) return 1.0;
  double mean = 0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double v : series) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  if (var == 0) return 1.0;
  double tau = 1.0;
  for (size_t lag = 1; lag < n / 4; ++lag) {
    double acc = 0;
    for (size_t t = 0; t + lag < n; ++t)
      acc += (series[t] - mean) * (series[t + lag] - mean);
    const double rho = acc / (static_cast<double>(n - lag) * var);
    if (rho < 0.05) break;
    tau += 2.0 * rho;
  }
  return tau;
}

struct ChainOutput {
  std::vector<SampleRecord> samples;
  ChainDiagnostics diag;
};

inline ChainOutput run_single_chain(const StateSpace& space,
                                    const HamiltonianSpec& spec,
                                    const TemperatureSchedule& schedule,
                                    const RunOptions& opt, int chain_id) {
  const std::uint64_t chain_seed = derive_seed(opt.seed, StreamId::Chain, chain_id);
  ChainState state = init_chain(space, spec, opt.n_particles, schedule, chain_seed);
  state.adapting = opt.burn_in > 0;
  RandomStream rng(derive_seed(chain_seed, StreamId::Scratch));

  ChainOutput out;
  const double n_inv = 1.0 / opt.n_particles;
  const bool discrete = space.kind == SpaceKind::FiniteSet;

  for (long s = 1; s <= opt.sweeps; ++s) {
    sweep(state, spec, rng);

    if (state.beta_n < 0 && state.sentinel_count >= kSentinelAbortThreshold) {
      out.diag.aborted = true;
      out.diag.abort_reason =
          "negative-temperature run hit " + std::to_string(state.sentinel_count) +
          " infinite-weight moves: the exponential moment of the interaction "
          "is not integrable at this beta and the ensemble is unstable";
      break;
    }

    // Radius adaptation toward the target acceptance, burn-in only.
    if (state.adapting && !discrete) {
      if (s % 20 == 0 && state.window_proposals > 0) {
        const double rate = static_cast<double>(state.window_accepts) /
                            static_cast<double>(state.window_proposals);
        const double gain = 0.5 / (1.0 + s / 200.0);
        state.proposal_radius *= std::exp(gain * (rate - opt.target_acceptance));
        state.proposal_radius = std::clamp(state.proposal_radius,
                                           1e-4 * space.diameter(),
                                           space.diameter());
      }
    }
    if (s == opt.burn_in) {
      state.adapting = false;  // freeze: the remaining chain is reversible
      state.accepts = 0;
      state.proposals = 0;
    }

    if (s % 100 == 0 && state.window_proposals > 0) {
      out.diag.acceptance_per_window.push_back(
          static_cast<double>(state.window_accepts) /
          static_cast<double>(state.window_proposals));
      state.window_accepts = 0;
      state.window_proposals = 0;
    }

    if (s > opt.burn_in && (s - opt.burn_in) % opt.thinning == 0) {
      out.samples.push_back(SampleRecord{chain_id, s, state.config, state.energy});
      out.diag.energy_trace.push_back(state.energy * n_inv);
    }
  }

  out.diag.sentinel_count = state.sentinel_count;
  out.diag.acceptance_rate =
      state.proposals > 0
          ? static_cast<double>(state.accepts) / static_cast<double>(state.proposals)
          : 0.0;
  out.diag.tau_int = autocorrelation_time(out.diag.energy_trace);
  out.diag.ess = out.diag.energy_trace.empty()
                     ? 0.0
                     : static_cast<double>(out.diag.energy_trace.size()) /
                           out.diag.tau_int;
  return out;
}

}  // namespace detail

// Runs `chains` independent chains and merges them in chain order. The mean
// of H/N is reported with a batch-means standard error (16 batches per
// chain).
inline RunResult run(const StateSpace& space, const HamiltonianSpec& spec,
                     const TemperatureSchedule& schedule, const RunOptions& opt) {
  if (opt.sweeps <= opt.burn_in)
    throw ConfigError("run: sweeps must exceed burn_in");
  if (opt.thinning < 1 || opt.chains < 1) throw ConfigError("run: bad options");
  spec.validate();

  std::vector<detail::ChainOutput> outputs(opt.chains);
  const int workers = std::max(1, std::min(opt.workers, opt.chains));
  if (workers == 1) {
    for (int c = 0; c < opt.chains; ++c)
      outputs[c] = detail::run_single_chain(space, spec, schedule, opt, c);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int wkr = 0; wkr < workers; ++wkr)
      pool.emplace_back([&] {
        for (int c = next.fetch_add(1); c < opt.chains; c = next.fetch_add(1))
          outputs[c] = detail::run_single_chain(space, spec, schedule, opt, c);
      });
    for (auto& t : pool) t.join();
  }

  RunResult result;
  result.beta_n = schedule.beta_at(opt.n_particles);
  std::vector<double> batch_means;
  for (int c = 0; c < opt.chains; ++c) {
    auto& out = outputs[c];
    if (out.diag.aborted) {
      result.aborted = true;
      result.abort_reason = out.diag.abort_reason;
    }
    const auto& trace = out.diag.energy_trace;
    const size_t nb = 16;
    if (trace.size() >= 2 * nb) {
      const size_t len = trace.size() / nb;
      for (size_t b = 0; b < nb; ++b) {
        double m = 0;
        for (size_t t = b * len; t < (b + 1) * len; ++t) m += trace[t];
        batch_means.push_back(m / static_cast<double>(len));
      }
    } else if (!trace.empty()) {
      for (double v : trace) batch_means.push_back(v);
    }
    result.diagnostics.push_back(std::move(out.diag));
    for (auto& s : out.samples) result.samples.push_back(std::move(s));
  }

  double mean = 0;
  for (double b : batch_means) mean += b;
  if (!batch_means.empty()) mean /= static_cast<double>(batch_means.size());
  double var = 0;
  for (double b : batch_means) var += (b - mean) * (b - mean);
  if (batch_means.size() > 1)
    var /= static_cast<double>(batch_means.size() - 1) *
           static_cast<double>(batch_means.size());
  result.mean_energy = mean;
  result.stderr_energy = std::sqrt(var);

  double total_ess = 0;
  for (const auto& d : result.diagnostics) total_ess += d.ess;
  result.ess_warning = total_ess < 10;
  return result;
}

// Density of the j-th marginal with respect to mu0^{x j}, histogrammed on
// grid cells. j = 2 uses deterministic stride pairs (i, i+k mod N); under
// exchangeability any fixed subset pattern is unbiased.
inline std::vector<double> marginal_density(const std::vector<SampleRecord>& samples,
                                            int j, const QuadratureGrid& grid) {
  if (j != 1 && j != 2) throw ConfigError("marginal_density supports j in {1,2}");
  if (samples.empty()) throw DomainError("marginal_density: no samples");
  const int K = grid.cell_count();

  if (j == 1) {
    std::vector<double> count(K, 0.0);
    double total = 0;
    for (const auto& s : samples)
      for (const Point& p : s.config.points) {
        count[grid.cell_of(p)] += 1.0;
        total += 1.0;
      }
    std::vector<double> density(K, 0.0);
    for (int c = 0; c < K; ++c)
      if (grid.weights[c] > 0) density[c] = count[c] / total / grid.weights[c];
    return density;
  }

  static constexpr int kStrides[] = {1, 5, 17, 53};
  std::vector<double> count(static_cast<size_t>(K) * K, 0.0);
  double total = 0;
  for (const auto& s : samples) {
    const int n = s.config.size();
    for (int stride : kStrides) {
      if (stride >= n) continue;
      for (int i = 0; i < n; ++i) {
        const int a = grid.cell_of(s.config.points[i]);
        const int b = grid.cell_of(s.config.points[(i + stride) % n]);
        count[static_cast<size_t>(a) * K + b] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total == 0) throw DomainError("marginal_density: N too small for pairs");
  std::vector<double> density(static_cast<size_t>(K) * K, 0.0);
  for (int a = 0; a < K; ++a)
    for (int b = 0; b < K; ++b) {
      const double w = grid.weights[a] * grid.weights[b];
      if (w > 0)
        density[static_cast<size_t>(a) * K + b] =
            count[static_cast<size_t>(a) * K + b] / total / w;
    }
  return density;
}

// Mean over samples of |(1/N) sum_i e^{i theta_i}| (circle only): the
// standard finite-size magnetization of the first harmonic.
inline double sampler_order_parameter(const std::vector<SampleRecord>& samples) {
  if (samples.empty()) return 0;
  double acc = 0;
  for (const auto& s : samples) {
    double a = 0, b = 0;
    for (const Point& p : s.config.points) {
      a += std::cos(p[0]);
      b += std::sin(p[0]);
    }
    acc += std::sqrt(a * a + b * b) / s.config.size();
  }
  return acc / static_cast<double>(samples.size());
}

}  // namespace gibbslab
