#pragma once

// Compact state spaces with geodesic metrics, base probability measures and
// midpoint quadrature grids. Supported spaces: the circle of circumference
// 2*pi, the flat 2-torus (product of two such circles), the unit 2-sphere,
// the interval [0,1], and finite point sets with the discrete metric.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "gibbslab/errors.hpp"
#include "gibbslab/rng.hpp"

namespace gibbslab {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// A point of any supported space. Interpretation by space kind:
//   Circle:    p[0] = angle in [0, 2*pi)
//   Torus2:    p[0], p[1] = angles in [0, 2*pi)
//   Sphere2:   (p[0], p[1], p[2]) = unit vector in R^3
//   Interval:  p[0] in [0, 1]
//   FiniteSet: p[0] = integer point index in [0, k)
using Point = std::array<double, 3>;

enum class SpaceKind { Circle, Torus2, Sphere2, Interval, FiniteSet };

inline std::string to_string(SpaceKind k) {
  switch (k) {
    case SpaceKind::Circle: return "circle";
    case SpaceKind::Torus2: return "torus2";
    case SpaceKind::Sphere2: return "sphere2";
    case SpaceKind::Interval: return "interval";
    case SpaceKind::FiniteSet: return "finite";
  }
  return "?";
}

inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a;
}

inline double circle_arc(double a, double b) {
  double d = std::fabs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, kTwoPi - d);
}

struct StateSpace {
  SpaceKind kind = SpaceKind::Circle;
  int finite_k = 0;                    // FiniteSet only
  std::vector<double> finite_weights;  // FiniteSet base masses (normalized)
  // Optional density of the base measure relative to uniform, tabulated on
  // grid cells at build time. Empty = uniform.
  std::function<double(const Point&)> base_density;

  static StateSpace circle() { return StateSpace{SpaceKind::Circle}; }
  static StateSpace torus2() { return StateSpace{SpaceKind::Torus2}; }
  static StateSpace sphere2() { return StateSpace{SpaceKind::Sphere2}; }
  static StateSpace interval() { return StateSpace{SpaceKind::Interval}; }

  static StateSpace finite_set(int k, std::vector<double> weights = {}) {
    if (k < 1) throw ConfigError("finite set needs k >= 1");
    StateSpace s;
    s.kind = SpaceKind::FiniteSet;
    s.finite_k = k;
    if (weights.empty()) weights.assign(static_cast<size_t>(k), 1.0);
    if (static_cast<int>(weights.size()) != k)
      throw ConfigError("finite set weights length != k");
    double total = 0;
    for (double w : weights) {
      if (w < 0) throw ConfigError("finite set weights must be >= 0");
      total += w;
    }
    if (total <= 0) throw ConfigError("finite set weights sum to zero");
    for (double& w : weights) w /= total;
    s.finite_weights = std::move(weights);
    return s;
  }

  int dim() const {
    switch (kind) {
      case SpaceKind::Circle: return 1;
      case SpaceKind::Torus2: return 2;
      case SpaceKind::Sphere2: return 2;  // parameter dimension (z, azimuth)
      case SpaceKind::Interval: return 1;
      case SpaceKind::FiniteSet: return 0;
    }
    return 0;
  }

  double diameter() const {
    switch (kind) {
      case SpaceKind::Circle: return std::numbers::pi;
      case SpaceKind::Torus2: return std::numbers::sqrt2 * std::numbers::pi;
      case SpaceKind::Sphere2: return std::numbers::pi;
      case SpaceKind::Interval: return 1.0;
      case SpaceKind::FiniteSet: return 1.0;
    }
    return 0.0;
  }

  bool contains(const Point& p) const {
    switch (kind) {
      case SpaceKind::Circle: return std::isfinite(p[0]);
      case SpaceKind::Torus2: return std::isfinite(p[0]) && std::isfinite(p[1]);
      case SpaceKind::Sphere2: {
        const double n2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        return std::fabs(n2 - 1.0) < 1e-9;
      }
      case SpaceKind::Interval: return p[0] >= 0.0 && p[0] <= 1.0;
      case SpaceKind::FiniteSet: {
        const double r = std::round(p[0]);
        return r == p[0] && r >= 0 && r < finite_k;
      }
    }
    return false;
  }

  void require_contains(const Point& p, const char* who) const {
    if (!contains(p))
      throw DomainError(std::string(who) + ": point outside " + to_string(kind));
  }

  // Geodesic distance.
  double distance(const Point& x, const Point& y) const {
    switch (kind) {
      case SpaceKind::Circle:
        return circle_arc(x[0], y[0]);
      case SpaceKind::Torus2: {
        const double d0 = circle_arc(x[0], y[0]);
        const double d1 = circle_arc(x[1], y[1]);
        return std::sqrt(d0 * d0 + d1 * d1);
      }
      case SpaceKind::Sphere2: {
        const double dot = x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
        const double cx = x[1] * y[2] - x[2] * y[1];
        const double cy = x[2] * y[0] - x[0] * y[2];
        const double cz = x[0] * y[1] - x[1] * y[0];
        const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
        return std::atan2(cross, dot);
      }
      case SpaceKind::Interval:
        return std::fabs(x[0] - y[0]);
      case SpaceKind::FiniteSet:
        return x[0] == y[0] ? 0.0 : 1.0;
    }
    return 0.0;
  }
};

inline double distance(const StateSpace& space, const Point& x, const Point& y) {
  space.require_contains(x, "distance");
  space.require_contains(y, "distance");
  return space.distance(x, y);
}

// Log-density of the base measure against the chart-uniform reference
// (atom log-mass on finite sets). Enters Metropolis ratios whenever the base
// measure is not uniform.
inline double base_log_weight(const StateSpace& space, const Point& p) {
  if (space.kind == SpaceKind::FiniteSet) {
    const double w = space.finite_weights[static_cast<size_t>(p[0])];
    return w > 0 ? std::log(w) : -std::numeric_limits<double>::infinity();
  }
  if (space.base_density) {
    const double d = space.base_density(p);
    return d > 0 ? std::log(d) : -std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

inline Point sphere_point(double z, double azimuth) {
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Point{r * std::cos(azimuth), r * std::sin(azimuth), z};
}

// Midpoint-quadrature grid over a state space. Cells are uniform in the
// parameter chart (angles; z-bands x azimuth sectors on the sphere, which are
// equal-area), nodes sit at cell centers, and weights are the base-measure
// masses of the cells, normalized to sum to 1.
struct QuadratureGrid {
  StateSpace space;
  int resolution = 0;          // cells per dimension
  std::vector<Point> nodes;    // cell centers
  std::vector<double> weights; // mu0-masses, sum to 1

  int cell_count() const { return static_cast<int>(nodes.size()); }

  // Width of a cell in each parameter coordinate.
  std::array<double, 2> cell_width() const {
    switch (space.kind) {
      case SpaceKind::Circle: return {kTwoPi / resolution, 0.0};
      case SpaceKind::Torus2: return {kTwoPi / resolution, kTwoPi / resolution};
      case SpaceKind::Sphere2: return {2.0 / resolution, kTwoPi / resolution};
      case SpaceKind::Interval: return {1.0 / resolution, 0.0};
      case SpaceKind::FiniteSet: return {0.0, 0.0};
    }
    return {0.0, 0.0};
  }

  // Index of the cell containing p (the node nearest to p in the chart).
  int cell_of(const Point& p) const {
    switch (space.kind) {
      case SpaceKind::Circle: {
        int c = static_cast<int>(wrap_angle(p[0]) / kTwoPi * resolution);
        return std::min(c, resolution - 1);
      }
      case SpaceKind::Torus2: {
        int c0 = std::min(static_cast<int>(wrap_angle(p[0]) / kTwoPi * resolution),
                          resolution - 1);
        int c1 = std::min(static_cast<int>(wrap_angle(p[1]) / kTwoPi * resolution),
                          resolution - 1);
        return c0 * resolution + c1;
      }
      case SpaceKind::Sphere2: {
        const double z = std::clamp(p[2], -1.0, 1.0);
        int band = std::min(static_cast<int>((z + 1.0) / 2.0 * resolution),
                            resolution - 1);
        double az = wrap_angle(std::atan2(p[1], p[0]));
        int sect = std::min(static_cast<int>(az / kTwoPi * resolution),
                            resolution - 1);
        return band * resolution + sect;
      }
      case SpaceKind::Interval: {
        int c = static_cast<int>(std::clamp(p[0], 0.0, 1.0) * resolution);
        return std::min(c, resolution - 1);
      }
      case SpaceKind::FiniteSet:
        return static_cast<int>(p[0]);
    }
    return 0;
  }

  // Maps a fraction in [0,1)^2 to a point inside cell c (chart-uniform).
  Point point_in_cell(int c, double f0, double f1) const {
    switch (space.kind) {
      case SpaceKind::Circle:
        return Point{(c + f0) * kTwoPi / resolution, 0.0, 0.0};
      case SpaceKind::Torus2: {
        const int c0 = c / resolution, c1 = c % resolution;
        return Point{(c0 + f0) * kTwoPi / resolution,
                     (c1 + f1) * kTwoPi / resolution, 0.0};
      }
      case SpaceKind::Sphere2: {
        const int band = c / resolution, sect = c % resolution;
        const double z = -1.0 + (band + f0) * 2.0 / resolution;
        const double az = (sect + f1) * kTwoPi / resolution;
        return sphere_point(z, az);
      }
      case SpaceKind::Interval:
        return Point{(c + f0) / resolution, 0.0, 0.0};
      case SpaceKind::FiniteSet:
        return Point{static_cast<double>(c), 0.0, 0.0};
    }
    return Point{0, 0, 0};
  }
};

inline QuadratureGrid build_grid(const StateSpace& space, int resolution) {
  QuadratureGrid g;
  g.space = space;
  if (space.kind == SpaceKind::FiniteSet) {
    g.resolution = space.finite_k;
    g.nodes.reserve(space.finite_k);
    for (int a = 0; a < space.finite_k; ++a)
      g.nodes.push_back(Point{static_cast<double>(a), 0.0, 0.0});
    g.weights = space.finite_weights;
    return g;
  }
  if (resolution < 2) throw ConfigError("grid resolution must be >= 2");
  g.resolution = resolution;
  const int cells = (space.dim() == 2) ? resolution * resolution : resolution;
  g.nodes.reserve(cells);
  g.weights.reserve(cells);
  double total = 0.0;
  for (int c = 0; c < cells; ++c) {
    const Point node = g.point_in_cell(c, 0.5, 0.5);
    // Chart-uniform cells have equal reference volume (equal-area bands on
    // the sphere), so midpoint quadrature reduces to density at the node.
    double w = space.base_density ? space.base_density(node) : 1.0;
    if (w < 0 || !std::isfinite(w))
      throw ConfigError("base density must be finite and >= 0");
    g.nodes.push_back(node);
    g.weights.push_back(w);
    total += w;
  }
  if (total <= 0) throw ConfigError("base density vanishes on the whole grid");
  for (double& w : g.weights) w /= total;
  return g;
}

// n i.i.d. draws from the base measure. Uniform base measures are sampled in
// closed form; tabulated densities are sampled cell-first on `density_grid`
// (falling back to a 4096-cell internal grid in 1D, 128^2 in 2D).
inline std::vector<Point> sample_base(const StateSpace& space,
                                      std::uint64_t seed, std::int64_t n,
                                      const QuadratureGrid* density_grid = nullptr) {
  if (n < 1) throw ConfigError("sample_base: n must be >= 1");
  RandomStream rng(derive_seed(seed, StreamId::BaseSampling));
  std::vector<Point> out;
  out.reserve(static_cast<size_t>(n));

  if (space.kind == SpaceKind::FiniteSet) {
    // Inverse CDF over atoms.
    std::vector<double> cdf(space.finite_weights.size());
    double acc = 0;
    for (size_t a = 0; a < cdf.size(); ++a) {
      acc += space.finite_weights[a];
      cdf[a] = acc;
    }
    for (std::int64_t i = 0; i < n; ++i) {
      const double u = rng.uniform();
      size_t a = 0;
      while (a + 1 < cdf.size() && u > cdf[a]) ++a;
      out.push_back(Point{static_cast<double>(a), 0.0, 0.0});
    }
    return out;
  }

  if (!space.base_density) {
    for (std::int64_t i = 0; i < n; ++i) {
      switch (space.kind) {
        case SpaceKind::Circle:
          out.push_back(Point{rng.uniform(0.0, kTwoPi), 0.0, 0.0});
          break;
        case SpaceKind::Torus2:
          out.push_back(
              Point{rng.uniform(0.0, kTwoPi), rng.uniform(0.0, kTwoPi), 0.0});
          break;
        case SpaceKind::Sphere2:
          // Uniform area: z uniform in [-1,1], azimuth uniform.
          out.push_back(sphere_point(rng.uniform(-1.0, 1.0),
                                     rng.uniform(0.0, kTwoPi)));
          break;
        case SpaceKind::Interval:
          out.push_back(Point{rng.uniform(), 0.0, 0.0});
          break;
        case SpaceKind::FiniteSet:
          break;
      }
    }
    return out;
  }

  // Tabulated density: pick a cell by mass, then uniform within the cell.
  QuadratureGrid local;
  if (!density_grid) {
    local = build_grid(space, space.dim() == 2 ? 128 : 4096);
    density_grid = &local;
  }
  std::vector<double> cdf(density_grid->weights.size());
  double acc = 0;
  for (size_t c = 0; c < cdf.size(); ++c) {
    acc += density_grid->weights[c];
    cdf[c] = acc;
  }
  for (std::int64_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    size_t c = static_cast<size_t>(
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    if (c >= cdf.size()) c = cdf.size() - 1;
    out.push_back(density_grid->point_in_cell(static_cast<int>(c),
                                              rng.uniform(), rng.uniform()));
  }
  return out;
}

// Mass the base measure puts within distance R of x, from the grid.
inline double ball_mass(const QuadratureGrid& grid, const Point& x, double radius) {
  double m = 0;
  for (int c = 0; c < grid.cell_count(); ++c)
    if (grid.space.distance(x, grid.nodes[c]) <= radius) m += grid.weights[c];
  return m;
}

struct FrostmanReport {
  double exponent = 0;
  std::vector<double> radii;
  std::vector<double> max_ratio;  // max over nodes of mu0(B_R)/R^t, per radius
  double worst_ratio = 0;
  bool pass = false;
};

// Scans mu0(B_R(x))/R^t over grid nodes and a decreasing list of radii.
// Passes when the ratio shows no growth trend: the smallest-radius ratio must
// stay within a factor 10 of the largest-radius ratio.
inline FrostmanReport frostman_check(const StateSpace& space,
                                     const QuadratureGrid& grid, double t,
                                     const std::vector<double>& radii) {
  if (radii.empty()) throw ConfigError("frostman_check: empty radii list");
  if (t <= 0) throw ConfigError("frostman_check: exponent must be > 0");
  for (size_t i = 0; i + 1 < radii.size(); ++i)
    if (radii[i + 1] >= radii[i])
      throw ConfigError("frostman_check: radii must be decreasing");

  FrostmanReport rep;
  rep.exponent = t;
  rep.radii = radii;
  for (double R : radii) {
    if (R <= 0) throw ConfigError("frostman_check: radii must be positive");
    double worst = 0;
    for (const Point& x : grid.nodes)
      worst = std::max(worst, ball_mass(grid, x, R) / std::pow(R, t));
    rep.max_ratio.push_back(worst);
    rep.worst_ratio = std::max(rep.worst_ratio, worst);
  }
  rep.pass = rep.max_ratio.back() <= 10.0 * rep.max_ratio.front();
  return rep;
}

}  // namespace gibbslab
