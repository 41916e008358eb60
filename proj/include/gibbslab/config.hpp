#pragma once

// Experiment configuration: a JSON file validated against a strict schema
// (unknown keys are errors) and resolved into library objects. The published
// schema lives in docs/config.schema.json.

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "gibbslab/io.hpp"
#include "gibbslab/ldp.hpp"
#include "gibbslab/solver.hpp"

namespace gibbslab {

namespace detail {

inline void check_keys(const Json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

inline double require_number(const Json& obj, const std::string& key,
                             const std::string& where) {
  if (!obj.contains(key))
    throw ConfigError("missing required key '" + key + "' in " + where);
  if (!obj[key].is_number())
    throw ConfigError("'" + key + "' in " + where + " must be a number");
  return obj[key].get<double>();
}

inline std::vector<std::pair<int, double>> parse_indexed_csv(const std::string& body,
                                                             const char* what) {
  std::vector<std::pair<int, double>> rows;
  std::istringstream in(body);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError(std::string(what) + ": malformed line: " + line);
    rows.push_back({std::stoi(line.substr(0, comma)),
                    std::stod(line.substr(comma + 1))});
  }
  return rows;
}

}  // namespace detail

struct ExperimentConfig {
  Json raw;
  std::filesystem::path base_dir;

  StateSpace space;
  int grid_resolution = 64;
  std::shared_ptr<const QuadratureGrid> grid;
  HamiltonianSpec hamiltonian;
  TemperatureSchedule schedule = TemperatureSchedule::fixed(1.0);
  RunOptions run_options;
  std::vector<int> n_list;

  std::vector<double> beta_scan;
  FixedPointOptions fixed_point_options;
  FrankWolfeOptions frank_wolfe_options;

  std::string suite;
  Json verify_params = Json::object();

  double scan_beta_target = 1.0;
  ThermoBudget thermo;

  std::filesystem::path output_dir = "out";
};

namespace detail {

inline StateSpace parse_space(const Json& j) {
  check_keys(j, {"kind", "k", "weights", "density_csv"}, "space");
  if (!j.contains("kind")) throw ConfigError("space needs a 'kind'");
  const std::string kind = j["kind"].get<std::string>();
  if (kind == "circle") return StateSpace::circle();
  if (kind == "torus2") return StateSpace::torus2();
  if (kind == "sphere2") return StateSpace::sphere2();
  if (kind == "interval") return StateSpace::interval();
  if (kind == "finite") {
    const int k = static_cast<int>(require_number(j, "k", "space"));
    std::vector<double> weights;
    if (j.contains("weights")) weights = j["weights"].get<std::vector<double>>();
    return StateSpace::finite_set(k, weights);
  }
  throw ConfigError("unknown space kind: " + kind);
}

inline KernelTerm parse_kernel(const Json& j, const StateSpace& space,
                               const QuadratureGrid& grid,
                               const std::filesystem::path& base_dir) {
  check_keys(j,
             {"form", "order", "coefficient", "value", "bandwidth", "exponent",
              "table_csv", "values"},
             "kernel");
  if (!j.contains("form")) throw ConfigError("kernel needs a 'form'");
  const std::string form = j["form"].get<std::string>();
  const double coeff = j.value("coefficient", 1.0);
  const int order = j.value("order", 2);

  if (form == "constant") {
    return constant_kernel(require_number(j, "value", "constant kernel"), order);
  }
  if (form == "cosine") return cosine_kernel(coeff, order);
  if (form == "gaussian")
    return gaussian_kernel(require_number(j, "bandwidth", "gaussian kernel"),
                           coeff, order);
  if (form == "log-distance") return log_distance_kernel(coeff);
  if (form == "riesz")
    return riesz_kernel(require_number(j, "exponent", "riesz kernel"), coeff);

  const int cells = grid.cell_count();
  if (form == "tabulated") {
    std::vector<double> values;
    if (j.contains("values")) {
      values = j["values"].get<std::vector<double>>();
    } else if (j.contains("table_csv")) {
      values.assign(static_cast<size_t>(cells) * cells, 0.0);
      const auto body =
          read_text_file(base_dir / j["table_csv"].get<std::string>());
      std::istringstream in(body);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
          throw ConfigError("tabulated kernel CSV: malformed line: " + line);
        const int row = std::stoi(line.substr(0, c1));
        const int col = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
        if (row < 0 || row >= cells || col < 0 || col >= cells)
          throw ConfigError("tabulated kernel CSV: index out of range");
        values[static_cast<size_t>(row) * cells + col] =
            std::stod(line.substr(c2 + 1));
      }
    } else {
      throw ConfigError("tabulated kernel needs 'values' or 'table_csv'");
    }
    return tabulated_kernel(std::move(values), cells, coeff);
  }
  if (form == "external-field") {
    std::vector<double> values;
    if (j.contains("values")) {
      values = j["values"].get<std::vector<double>>();
    } else if (j.contains("table_csv")) {
      values.assign(static_cast<size_t>(cells), 0.0);
      for (const auto& [cell, v] : parse_indexed_csv(
               read_text_file(base_dir / j["table_csv"].get<std::string>()),
               "external field CSV")) {
        if (cell < 0 || cell >= cells)
          throw ConfigError("external field CSV: index out of range");
        values[static_cast<size_t>(cell)] = v;
      }
    } else {
      throw ConfigError("external field needs 'values' or 'table_csv'");
    }
    if (static_cast<int>(values.size()) != cells)
      throw ConfigError("external field values do not match the grid");
    return external_field(std::move(values), coeff);
  }
  throw ConfigError("unknown kernel form: " + form);
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j,
                                     const std::filesystem::path& base_dir) {
  detail::check_keys(j,
                     {"space", "grid", "hamiltonian", "schedule", "run",
                      "solver", "verify", "scan", "output", "seed"},
                     "config");
  ExperimentConfig cfg;
  cfg.raw = j;
  cfg.base_dir = base_dir;

  if (!j.contains("space")) throw ConfigError("config needs a 'space' block");
  cfg.space = detail::parse_space(j["space"]);

  if (j.contains("grid")) {
    detail::check_keys(j["grid"], {"resolution"}, "grid");
    cfg.grid_resolution =
        static_cast<int>(detail::require_number(j["grid"], "resolution", "grid"));
  }

  // Tabulated base densities ride on a uniform grid of the same layout.
  if (j["space"].contains("density_csv")) {
    auto plain = std::make_shared<const QuadratureGrid>(
        build_grid(cfg.space, cfg.grid_resolution));
    auto values = std::make_shared<std::vector<double>>(
        static_cast<size_t>(plain->cell_count()), 1.0);
    for (const auto& [cell, v] : detail::parse_indexed_csv(
             read_text_file(base_dir /
                            j["space"]["density_csv"].get<std::string>()),
             "density CSV")) {
      if (cell < 0 || cell >= plain->cell_count())
        throw ConfigError("density CSV: index out of range");
      (*values)[static_cast<size_t>(cell)] = v;
    }
    cfg.space.base_density = [plain, values](const Point& p) {
      return (*values)[static_cast<size_t>(plain->cell_of(p))];
    };
  }

  cfg.grid = std::make_shared<const QuadratureGrid>(
      build_grid(cfg.space, cfg.grid_resolution));

  cfg.hamiltonian.space = cfg.space;
  cfg.hamiltonian.grid = cfg.grid;
  if (j.contains("hamiltonian")) {
    detail::check_keys(j["hamiltonian"], {"kernels"}, "hamiltonian");
    for (const auto& kj : j["hamiltonian"].value("kernels", Json::array()))
      cfg.hamiltonian.terms.push_back(
          detail::parse_kernel(kj, cfg.space, *cfg.grid, base_dir));
  }
  cfg.hamiltonian.validate();

  if (j.contains("schedule")) {
    detail::check_keys(j["schedule"], {"kind", "beta", "c"}, "schedule");
    const std::string kind = j["schedule"].value("kind", "fixed");
    if (kind == "fixed")
      cfg.schedule = TemperatureSchedule::fixed(
          detail::require_number(j["schedule"], "beta", "schedule"));
    else if (kind == "proportional")
      cfg.schedule = TemperatureSchedule::proportional(
          detail::require_number(j["schedule"], "c", "schedule"));
    else
      throw ConfigError("unknown schedule kind: " + kind);
  }

  if (j.contains("run")) {
    const auto& r = j["run"];
    detail::check_keys(
        r, {"n_particles", "n_list", "sweeps", "burn_in", "thinning", "chains"},
        "run");
    cfg.run_options.n_particles = r.value("n_particles", 64);
    cfg.run_options.sweeps = r.value("sweeps", 10000L);
    cfg.run_options.burn_in = r.value("burn_in", cfg.run_options.sweeps / 5);
    cfg.run_options.thinning = r.value("thinning", 10L);
    cfg.run_options.chains = r.value("chains", 1);
    if (r.contains("n_list")) cfg.n_list = r["n_list"].get<std::vector<int>>();
    if (cfg.run_options.sweeps <= cfg.run_options.burn_in)
      throw ConfigError("run: sweeps must exceed burn_in");
  }

  if (j.contains("solver")) {
    const auto& s = j["solver"];
    detail::check_keys(
        s, {"beta_scan", "tolerance", "max_iterations", "damping", "gap_tolerance"},
        "solver");
    if (s.contains("beta_scan")) {
      for (const auto& b : s["beta_scan"]) {
        if (b.is_string() && (b == "inf" || b == "+inf"))
          cfg.beta_scan.push_back(kInf);
        else
          cfg.beta_scan.push_back(b.get<double>());
      }
    }
    cfg.fixed_point_options.tolerance = s.value("tolerance", 1e-9);
    cfg.fixed_point_options.max_iterations = s.value("max_iterations", 10000);
    cfg.fixed_point_options.damping = s.value("damping", 0.5);
    cfg.frank_wolfe_options.gap_tolerance = s.value("gap_tolerance", 1e-6);
  }

  if (j.contains("verify")) {
    detail::check_keys(j["verify"],
                       {"suite", "n", "beta", "n_list", "betas", "threshold",
                        "draws", "pairs", "resolution"},
                       "verify");
    if (!j["verify"].contains("suite"))
      throw ConfigError("verify needs a 'suite'");
    cfg.suite = j["verify"]["suite"].get<std::string>();
    cfg.verify_params = j["verify"];
  }

  if (j.contains("scan")) {
    const auto& s = j["scan"];
    detail::check_keys(s, {"beta", "rungs", "sweeps", "burn_in", "thinning", "chains"},
                       "scan");
    cfg.scan_beta_target = detail::require_number(s, "beta", "scan");
    cfg.thermo.rungs = s.value("rungs", 16);
    cfg.thermo.sweeps = s.value("sweeps", 4000L);
    cfg.thermo.burn_in = s.value("burn_in", cfg.thermo.sweeps / 4);
    cfg.thermo.thinning = s.value("thinning", 5L);
    cfg.thermo.chains = s.value("chains", 2);
  }

  if (j.contains("output")) cfg.output_dir = j["output"].get<std::string>();
  if (j.contains("seed")) cfg.run_options.seed = j["seed"].get<std::uint64_t>();
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j, path.parent_path());
}

}  // namespace gibbslab
