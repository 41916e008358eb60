#pragma once

// CSV and JSON output helpers. CSVs are UTF-8 with a header row and '.'
// decimals; doubles round-trip through %.17g so reruns produce identical
// bytes.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gibbslab/errors.hpp"
#include "gibbslab/measure.hpp"
#include "gibbslab/sampler.hpp"
#include "gibbslab/space.hpp"

namespace gibbslab {

using Json = nlohmann::json;

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  out << body;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 64-bit FNV-1a over the canonical (sorted-key) JSON dump.
inline std::string config_hash(const Json& config) {
  const std::string dump = config.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

// Number of chart coordinates written per point.
inline int coord_count(const StateSpace& space) {
  switch (space.kind) {
    case SpaceKind::Circle:
    case SpaceKind::Interval:
    case SpaceKind::FiniteSet: return 1;
    case SpaceKind::Torus2: return 2;
    case SpaceKind::Sphere2: return 3;
  }
  return 3;
}

inline std::string grid_csv(const QuadratureGrid& grid) {
  std::ostringstream out;
  const int nc = coord_count(grid.space);
  out << "cell";
  for (int d = 0; d < nc; ++d) out << ",c" << d;
  out << ",weight\n";
  for (int c = 0; c < grid.cell_count(); ++c) {
    out << c;
    for (int d = 0; d < nc; ++d) out << ',' << format_double(grid.nodes[c][d]);
    out << ',' << format_double(grid.weights[c]) << '\n';
  }
  return out.str();
}

inline std::string measure_csv(const GridMeasure& mu) {
  std::ostringstream out;
  out << "cell,mass\n";
  for (size_t c = 0; c < mu.masses.size(); ++c)
    out << c << ',' << format_double(mu.masses[c]) << '\n';
  return out.str();
}

inline GridMeasure measure_from_csv(std::shared_ptr<const QuadratureGrid> grid,
                                    const std::string& body) {
  GridMeasure mu;
  mu.masses.assign(static_cast<size_t>(grid->cell_count()), 0.0);
  std::istringstream in(body);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("measure CSV: malformed line: " + line);
    const size_t cell = std::stoul(line.substr(0, comma));
    if (cell >= mu.masses.size())
      throw ConfigError("measure CSV: cell index out of range");
    mu.masses[cell] = std::stod(line.substr(comma + 1));
  }
  mu.grid = std::move(grid);
  mu.validate();
  return mu;
}

// Trace rows: sweep, chain, energy, acceptance rate of the enclosing
// 100-sweep window.
inline std::string trace_csv(const RunResult& result) {
  std::ostringstream out;
  out << "sweep,chain,energy,acceptance_rate\n";
  for (const auto& s : result.samples) {
    const auto& diag = result.diagnostics[s.chain];
    const size_t window = static_cast<size_t>((s.sweep - 1) / 100);
    const double acc = window < diag.acceptance_per_window.size()
                           ? diag.acceptance_per_window[window]
                           : diag.acceptance_rate;
    out << s.sweep << ',' << s.chain << ',' << format_double(s.energy) << ','
        << format_double(acc) << '\n';
  }
  return out.str();
}

inline std::string samples_csv(const RunResult& result, const StateSpace& space) {
  std::ostringstream out;
  const int nc = coord_count(space);
  out << "sweep,chain,particle";
  for (int d = 0; d < nc; ++d) out << ",c" << d;
  out << '\n';
  for (const auto& s : result.samples)
    for (int i = 0; i < s.config.size(); ++i) {
      out << s.sweep << ',' << s.chain << ',' << i;
      for (int d = 0; d < nc; ++d)
        out << ',' << format_double(s.config.points[i][d]);
      out << '\n';
    }
  return out.str();
}

inline Json diagnostics_json(const RunResult& result) {
  Json chains = Json::array();
  for (const auto& d : result.diagnostics) {
    chains.push_back({{"acceptance_rate", d.acceptance_rate},
                      {"tau_int", d.tau_int},
                      {"ess", d.ess},
                      {"sentinel_count", d.sentinel_count},
                      {"aborted", d.aborted},
                      {"abort_reason", d.abort_reason}});
  }
  return Json{{"mean_energy", result.mean_energy},
              {"stderr_energy", result.stderr_energy},
              {"beta_N", result.beta_n},
              {"ess_warning", result.ess_warning},
              {"aborted", result.aborted},
              {"abort_reason", result.abort_reason},
              {"chains", chains}};
}

}  // namespace gibbslab
