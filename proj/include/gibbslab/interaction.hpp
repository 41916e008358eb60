#pragma once

// Finite-order mean-field Hamiltonians on compact spaces.
//
//   H(x_1..x_N) = sum_m N^{-(m-1)} sum_{I distinct} W_m(x_{i_1},..,x_{i_m})
//                 + sum_i u(x_i)
//
// where the inner sum runs over ordered multi-indices with pairwise distinct
// entries and u is an optional per-particle tilt tabulated on a grid.
// Singular kernels (LogDistance, Riesz) take the value +inf at coincident
// points; +inf is absorbing in sums.

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "gibbslab/errors.hpp"
#include "gibbslab/space.hpp"

namespace gibbslab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class KernelForm {
  Constant,      // W = c, any order
  Cosine,        // W(x,y) = cos(x - y), circle only
  Gaussian,      // W(x,y) = exp(-d(x,y)^2 / (2 sigma^2))
  LogDistance,   // W(x,y) = -log d(x,y), +inf on the diagonal
  Riesz,         // W(x,y) = d(x,y)^{-s}, s > 0, +inf on the diagonal
  Tabulated,     // W(x,y) from a cell x cell table, symmetrized
  ExternalField, // W(x) from a per-cell table, order 1
};

inline std::string to_string(KernelForm f) {
  switch (f) {
    case KernelForm::Constant: return "constant";
    case KernelForm::Cosine: return "cosine";
    case KernelForm::Gaussian: return "gaussian";
    case KernelForm::LogDistance: return "log-distance";
    case KernelForm::Riesz: return "riesz";
    case KernelForm::Tabulated: return "tabulated";
    case KernelForm::ExternalField: return "external-field";
  }
  return "?";
}

// One term of the Hamiltonian. Distance-based forms of order 3 act as the
// mean of the three pairwise evaluations, which keeps them symmetric and
// lower semi-continuous. `truncation` caps the kernel at min(W, R); the
// default +inf leaves it untouched. Increasing continuous truncations of a
// lower semi-continuous kernel are the standard approximation device, and
// the cap is exposed for diagnostics of that kind.
struct KernelTerm {
  KernelForm form = KernelForm::Constant;
  int order = 2;
  double coefficient = 1.0;
  double parameter = 0.0;     // Constant value, Gaussian bandwidth, Riesz s
  double truncation = std::numeric_limits<double>::infinity();
  std::vector<double> table;  // Tabulated (K*K) or ExternalField (K)

  // Singular form: +inf at coincident points (before any truncation cap).
  // Truncated singular kernels are bounded but keep the diagonal cell
  // averaging, so min(W, R) quadratures stay below the full-kernel ones.
  bool singular() const {
    return form == KernelForm::LogDistance || form == KernelForm::Riesz;
  }
};

// Copy of a kernel capped at level R: W_R = min(W, R).
inline KernelTerm truncated(const KernelTerm& term, double level) {
  KernelTerm t = term;
  t.truncation = std::min(t.truncation, level);
  return t;
}

inline KernelTerm constant_kernel(double value, int order = 2) {
  KernelTerm t;
  t.form = KernelForm::Constant;
  t.order = order;
  t.parameter = value;
  return t;
}

inline KernelTerm cosine_kernel(double coefficient = 1.0, int order = 2) {
  KernelTerm t;
  t.form = KernelForm::Cosine;
  t.coefficient = coefficient;
  t.order = order;
  return t;
}

inline KernelTerm gaussian_kernel(double bandwidth, double coefficient = 1.0,
                                  int order = 2) {
  if (bandwidth <= 0) throw ConfigError("gaussian kernel needs bandwidth > 0");
  KernelTerm t;
  t.form = KernelForm::Gaussian;
  t.parameter = bandwidth;
  t.coefficient = coefficient;
  t.order = order;
  return t;
}

inline KernelTerm log_distance_kernel(double coefficient = 1.0) {
  KernelTerm t;
  t.form = KernelForm::LogDistance;
  t.coefficient = coefficient;
  return t;
}

inline KernelTerm riesz_kernel(double exponent, double coefficient = 1.0) {
  if (exponent <= 0) throw ConfigError("riesz kernel needs exponent > 0");
  KernelTerm t;
  t.form = KernelForm::Riesz;
  t.parameter = exponent;
  t.coefficient = coefficient;
  return t;
}

inline KernelTerm tabulated_kernel(std::vector<double> values, int cells,
                                   double coefficient = 1.0) {
  if (static_cast<int>(values.size()) != cells * cells)
    throw ConfigError("tabulated kernel table must be cells x cells");
  KernelTerm t;
  t.form = KernelForm::Tabulated;
  // Coefficient is applied first, then the table is symmetrized.
  for (double& v : values) v *= coefficient;
  t.coefficient = 1.0;
  t.table.resize(values.size());
  for (int a = 0; a < cells; ++a)
    for (int b = 0; b < cells; ++b)
      t.table[static_cast<size_t>(a) * cells + b] =
          0.5 * (values[static_cast<size_t>(a) * cells + b] +
                 values[static_cast<size_t>(b) * cells + a]);
  return t;
}

inline KernelTerm external_field(std::vector<double> values,
                                 double coefficient = 1.0) {
  KernelTerm t;
  t.form = KernelForm::ExternalField;
  t.order = 1;
  t.coefficient = 1.0;
  for (double& v : values) v *= coefficient;
  t.table = std::move(values);
  return t;
}

// A microstate: an ordered list of N points.
struct Configuration {
  std::vector<Point> points;

  int size() const { return static_cast<int>(points.size()); }

  void validate(const StateSpace& space) const {
    if (points.empty()) throw DomainError("configuration must have N >= 1");
    for (const Point& p : points) space.require_contains(p, "configuration");
  }
};

struct HamiltonianSpec {
  StateSpace space;
  std::vector<KernelTerm> terms;
  // Grid backing Tabulated / ExternalField tables and the tilt. May be null
  // when only closed-form kernels and no tilt are used.
  std::shared_ptr<const QuadratureGrid> grid;
  std::vector<double> tilt;  // per-cell values of u; empty = no tilt

  int max_order() const {
    int m = tilt.empty() ? 0 : 1;
    for (const auto& t : terms) m = std::max(m, t.order);
    return m;
  }

  bool has_singular_kernel() const {
    for (const auto& t : terms)
      if (t.singular()) return true;
    return false;
  }

  void validate() const {
    for (const auto& t : terms) {
      if (t.order < 1 || t.order > 3)
        throw ConfigError("kernel order must be 1, 2 or 3");
      if (t.singular() && t.coefficient <= 0)
        throw ConfigError("singular kernels must have a positive coefficient "
                          "(attraction is modeled by beta < 0)");
      if (t.form == KernelForm::Cosine && space.kind != SpaceKind::Circle)
        throw ConfigError("cosine kernel is defined on the circle only");
      if (t.form == KernelForm::ExternalField && t.order != 1)
        throw ConfigError("external field must have order 1");
      if (t.form == KernelForm::Tabulated && t.order != 2)
        throw ConfigError("tabulated kernels must have order 2");
      if ((t.form == KernelForm::Tabulated ||
           t.form == KernelForm::ExternalField)) {
        if (!grid) throw ConfigError("tabulated terms need a grid");
        const size_t k = static_cast<size_t>(grid->cell_count());
        const size_t want = t.form == KernelForm::Tabulated ? k * k : k;
        if (t.table.size() != want)
          throw ConfigError("kernel table size does not match the grid");
      }
    }
    if (!tilt.empty()) {
      if (!grid) throw ConfigError("tilt needs a grid");
      if (tilt.size() != static_cast<size_t>(grid->cell_count()))
        throw ConfigError("tilt size does not match the grid");
    }
  }
};

// --- kernel evaluation -------------------------------------------------

inline double field_value(const KernelTerm& t, const HamiltonianSpec& spec,
                          const Point& x) {
  switch (t.form) {
    case KernelForm::Constant: return t.coefficient * t.parameter;
    case KernelForm::ExternalField: return t.table[spec.grid->cell_of(x)];
    default:
      throw ConfigError("order-1 kernels must be Constant or ExternalField");
  }
}

inline double pair_value(const KernelTerm& t, const HamiltonianSpec& spec,
                         const Point& x, const Point& y) {
  double w = 0;
  switch (t.form) {
    case KernelForm::Constant:
      w = t.coefficient * t.parameter;
      break;
    case KernelForm::Cosine:
      w = t.coefficient * std::cos(x[0] - y[0]);
      break;
    case KernelForm::Gaussian: {
      const double d = spec.space.distance(x, y);
      const double s = t.parameter;
      w = t.coefficient * std::exp(-d * d / (2.0 * s * s));
      break;
    }
    case KernelForm::LogDistance: {
      const double d = spec.space.distance(x, y);
      w = d <= 0.0 ? (t.coefficient > 0 ? kInf : -kInf)
                   : t.coefficient * -std::log(d);
      break;
    }
    case KernelForm::Riesz: {
      const double d = spec.space.distance(x, y);
      w = d <= 0.0 ? (t.coefficient > 0 ? kInf : -kInf)
                   : t.coefficient * std::pow(d, -t.parameter);
      break;
    }
    case KernelForm::Tabulated: {
      const int K = spec.grid->cell_count();
      w = t.table[static_cast<size_t>(spec.grid->cell_of(x)) * K +
                  spec.grid->cell_of(y)];
      break;
    }
    case KernelForm::ExternalField:
      throw ConfigError("external field has order 1");
  }
  return std::min(w, t.truncation);
}

// Order-3 value: constant, or the mean of the three pairwise evaluations.
inline double triple_value(const KernelTerm& t, const HamiltonianSpec& spec,
                           const Point& x, const Point& y, const Point& z) {
  if (t.form == KernelForm::Constant) return t.coefficient * t.parameter;
  const double a = pair_value(t, spec, x, y);
  const double b = pair_value(t, spec, y, z);
  const double c = pair_value(t, spec, x, z);
  return (a + b + c) / 3.0;
}

inline double tilt_value(const HamiltonianSpec& spec, const Point& x) {
  if (spec.tilt.empty()) return 0.0;
  return spec.tilt[spec.grid->cell_of(x)];
}

// --- microscopic energy ------------------------------------------------

namespace detail {

// Order-independent summation: the result depends only on the multiset of
// values, which makes the Hamiltonian exactly permutation symmetric.
inline double sorted_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

}  // namespace detail

// Full O(N^max_order) evaluation. Returns +inf if any distinct-index term is
// +inf (coincident points under a singular kernel).
inline double hamiltonian(const HamiltonianSpec& spec, const Configuration& config) {
  config.validate(spec.space);
  const int n = config.size();
  const auto& x = config.points;
  double total = 0.0;
  std::vector<double> values;
  for (const auto& t : spec.terms) {
    values.clear();
    double acc = 0.0;
    switch (t.order) {
      case 1:
        for (int i = 0; i < n; ++i) values.push_back(field_value(t, spec, x[i]));
        acc = detail::sorted_sum(values);
        break;
      case 2:
        // Ordered distinct pairs = 2x the upper triangle (W symmetric).
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j) {
            const double w = pair_value(t, spec, x[i], x[j]);
            if (w == kInf) return kInf;
            values.push_back(w);
          }
        acc = 2.0 * detail::sorted_sum(values) / n;
        break;
      case 3:
        // Ordered distinct triples = 6x the strict upper triangle.
        for (int i = 0; i < n; ++i)
          for (int j = i + 1; j < n; ++j)
            for (int k = j + 1; k < n; ++k) {
              const double w = triple_value(t, spec, x[i], x[j], x[k]);
              if (w == kInf) return kInf;
              values.push_back(w);
            }
        acc = 6.0 * detail::sorted_sum(values) / (static_cast<double>(n) * n);
        break;
      default:
        throw ConfigError("kernel order must be 1, 2 or 3");
    }
    total += acc;
  }
  values.clear();
  for (int i = 0; i < n; ++i) values.push_back(tilt_value(spec, x[i]));
  return total + detail::sorted_sum(values);
}

// H(config with x_i <- x_new) - H(config), without re-evaluating terms that
// do not involve particle i. Singular hits short-circuit to +-inf termwise,
// so inf - inf never arises.
inline double move_delta(const HamiltonianSpec& spec, const Configuration& config,
                         int i, const Point& x_new) {
  const int n = config.size();
  if (i < 0 || i >= n) throw DomainError("move_delta: index out of range");
  spec.space.require_contains(x_new, "move_delta");
  const auto& x = config.points;
  const Point x_old = x[i];

  bool inf_new = false, inf_old = false;
  double delta = 0.0;
  for (const auto& t : spec.terms) {
    switch (t.order) {
      case 1: {
        delta += field_value(t, spec, x_new) - field_value(t, spec, x_old);
        break;
      }
      case 2: {
        double acc_new = 0.0, acc_old = 0.0;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          const double wn = pair_value(t, spec, x_new, x[j]);
          const double wo = pair_value(t, spec, x_old, x[j]);
          if (wn == kInf) inf_new = true; else acc_new += wn;
          if (wo == kInf) inf_old = true; else acc_old += wo;
        }
        delta += 2.0 * (acc_new - acc_old) / n;
        break;
      }
      case 3: {
        double acc_new = 0.0, acc_old = 0.0;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          for (int k = j + 1; k < n; ++k) {
            if (k == i) continue;
            const double wn = triple_value(t, spec, x_new, x[j], x[k]);
            const double wo = triple_value(t, spec, x_old, x[j], x[k]);
            if (wn == kInf) inf_new = true; else acc_new += wn;
            if (wo == kInf) inf_old = true; else acc_old += wo;
          }
        }
        delta += 6.0 * (acc_new - acc_old) / (static_cast<double>(n) * n);
        break;
      }
      default:
        throw ConfigError("kernel order must be 1, 2 or 3");
    }
  }
  delta += tilt_value(spec, x_new) - tilt_value(spec, x_old);
  if (inf_new) return kInf;
  if (inf_old) return -kInf;
  return delta;
}

// --- grid quadrature of kernels ----------------------------------------

// W at a pair of cells, with the diagonal of singular kernels replaced by the
// average over 25 stratified sub-sample pairs inside the cell (staggered so
// the two sub-points never coincide).
inline double cell_pair_value(const KernelTerm& t, const HamiltonianSpec& spec,
                              const QuadratureGrid& grid, int c1, int c2) {
  if (c1 != c2 || !t.singular())
    return pair_value(t, spec, grid.nodes[c1], grid.nodes[c2]);
  if (grid.space.kind == SpaceKind::FiniteSet)
    return pair_value(t, spec, grid.nodes[c1], grid.nodes[c2]);  // atom: +inf
  double acc = 0.0;
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) {
      const Point p = grid.point_in_cell(c1, (a + 0.3) / 5.0, (b + 0.3) / 5.0);
      const Point q = grid.point_in_cell(c1, (b + 0.7) / 5.0, (a + 0.7) / 5.0);
      acc += pair_value(t, spec, p, q);
    }
  return acc / 25.0;
}

// Dense K x K matrix of cell_pair_value; the quadratic form behind pair
// energies and potentials.
inline std::vector<double> pair_matrix(const KernelTerm& t,
                                       const HamiltonianSpec& spec,
                                       const QuadratureGrid& grid) {
  const int K = grid.cell_count();
  std::vector<double> m(static_cast<size_t>(K) * K);
  for (int a = 0; a < K; ++a) {
    for (int b = a; b < K; ++b) {
      const double w = cell_pair_value(t, spec, grid, a, b);
      m[static_cast<size_t>(a) * K + b] = w;
      m[static_cast<size_t>(b) * K + a] = w;
    }
  }
  return m;
}

inline double triple_cell_value(const KernelTerm& t, const HamiltonianSpec& spec,
                                const QuadratureGrid& grid, int c1, int c2, int c3) {
  if (t.form == KernelForm::Constant) return t.coefficient * t.parameter;
  const double a = cell_pair_value(t, spec, grid, c1, c2);
  const double b = cell_pair_value(t, spec, grid, c2, c3);
  const double c = cell_pair_value(t, spec, grid, c1, c3);
  return (a + b + c) / 3.0;
}

// int W_m d mu^{tensor m} for one term, by tensor quadrature on mu's grid.
inline double term_energy(const KernelTerm& t, const HamiltonianSpec& spec,
                          const QuadratureGrid& grid,
                          const std::vector<double>& mu) {
  const int K = grid.cell_count();
  double acc = 0.0;
  switch (t.order) {
    case 1:
      for (int c = 0; c < K; ++c)
        if (mu[c] > 0) acc += field_value(t, spec, grid.nodes[c]) * mu[c];
      return acc;
    case 2: {
      for (int a = 0; a < K; ++a) {
        if (mu[a] == 0) continue;
        double row = 0.0;
        for (int b = 0; b < K; ++b) {
          if (mu[b] == 0) continue;
          const double w = cell_pair_value(t, spec, grid, a, b);
          if (w == kInf) return kInf;
          row += w * mu[b];
        }
        acc += mu[a] * row;
      }
      return acc;
    }
    case 3: {
      for (int a = 0; a < K; ++a) {
        if (mu[a] == 0) continue;
        for (int b = 0; b < K; ++b) {
          if (mu[b] == 0) continue;
          double row = 0.0;
          for (int c = 0; c < K; ++c) {
            if (mu[c] == 0) continue;
            const double w = triple_cell_value(t, spec, grid, a, b, c);
            if (w == kInf) return kInf;
            row += w * mu[c];
          }
          acc += mu[a] * mu[b] * row;
        }
      }
      return acc;
    }
    default:
      throw ConfigError("kernel order must be 1, 2 or 3");
  }
}

inline double tilt_energy(const HamiltonianSpec& spec, const std::vector<double>& mu) {
  if (spec.tilt.empty()) return 0.0;
  double acc = 0.0;
  for (size_t c = 0; c < mu.size(); ++c) acc += spec.tilt[c] * mu[c];
  return acc;
}

// Macroscopic energy E(mu) = sum_m int W_m d mu^{tensor m} + int u d mu.
inline double macroscopic_energy(const HamiltonianSpec& spec,
                                 const QuadratureGrid& grid,
                                 const std::vector<double>& mu) {
  if (mu.size() != static_cast<size_t>(grid.cell_count()))
    throw DomainError("measure does not live on the given grid");
  double total = 0.0;
  for (const auto& t : spec.terms) {
    const double e = term_energy(t, spec, grid, mu);
    if (e == kInf) return kInf;
    total += e;
  }
  return total + tilt_energy(spec, mu);
}

// Mean energy of the product measure mu^{tensor N}, in closed form: an
// order-m term contributes (N-1)...(N-m+1)/N^{m-1} * int W_m d mu^{tensor m};
// field terms and the tilt contribute exactly.
inline double product_mean_energy(const HamiltonianSpec& spec,
                                  const QuadratureGrid& grid,
                                  const std::vector<double>& mu, int n) {
  if (n < spec.max_order())
    throw ConfigError("product_mean_energy: N smaller than the maximal order");
  double total = 0.0;
  for (const auto& t : spec.terms) {
    double prefactor = 1.0;
    for (int j = 1; j < t.order; ++j) prefactor *= static_cast<double>(n - j) / n;
    const double e = term_energy(t, spec, grid, mu);
    if (e == kInf) return kInf;
    total += prefactor * e;
  }
  return total + tilt_energy(spec, mu);
}

// Adds the per-particle tilt sum_i u(x_i); at the macroscopic level this is
// the linear functional mu -> int u d mu.
inline HamiltonianSpec tilted(const HamiltonianSpec& spec,
                              const std::vector<double>& u) {
  if (!spec.grid) throw ConfigError("tilted: spec has no grid for the tilt");
  if (u.size() != static_cast<size_t>(spec.grid->cell_count()))
    throw ConfigError("tilted: tilt size does not match the grid");
  for (double v : u)
    if (!std::isfinite(v)) throw ConfigError("tilted: tilt must be finite");
  HamiltonianSpec out = spec;
  if (out.tilt.empty()) {
    out.tilt = u;
  } else {
    for (size_t c = 0; c < u.size(); ++c) out.tilt[c] += u[c];
  }
  return out;
}

}  // namespace gibbslab
