// Copyright 2026 The pirm-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Command-line front end: argument/config resolution and command dispatch.
//
// Precedence: command-line flags > config file > built-in defaults. The
// built-ins are the reference study: mu = (1, 2), N = 24, lambda = 10,
// p in {1,2,3,4,6,12,24} and the four (sigma, delta) in {0.1, 1}^2.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pirm/config.hpp"
#include "pirm/experiments.hpp"
#include "pirm/io.hpp"
#include "pirm/sem.hpp"
#include "pirm/svg.hpp"

namespace pirm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown by parse_args for --help; carries the rendered help text.
class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Command { sweep_partitions, sweep_lambda, sem, all };

inline Command parse_command(const std::string& s) {
  if (s == "sweep-partitions") return Command::sweep_partitions;
  if (s == "sweep-lambda") return Command::sweep_lambda;
  if (s == "sem") return Command::sem;
  if (s == "all") return Command::all;
  throw UsageError("unknown command '" + s + "'");
}

struct RunManifest {
  Command command = Command::all;
  std::optional<std::filesystem::path> config_path;
  std::map<std::string, std::string> overrides;  // flag name -> raw value
  std::filesystem::path output_dir = "results";
  bool emit_svg = false;
  std::uint64_t seed = 0;

  std::vector<ScenarioConfig> partition_scenarios;
  ScenarioConfig lambda_scenario;
  std::vector<double> lambda_grid;
  sem::SemScenario sem;
};

namespace detail {

inline double to_real(const std::string& s, const std::string& what) {
  try {
    return io::detail::parse_real(s, what);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline std::uint64_t to_unsigned(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!s.empty() && s.front() == '-') throw std::invalid_argument("negative");
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw UsageError("bad " + what + " value '" + s + "'");
  return v;
}

inline std::vector<double> to_reals(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const auto& part : io::detail::split(s, ',')) out.push_back(to_real(config::detail::trim(part), what));
  return out;
}

inline std::vector<std::size_t> to_counts(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& part : io::detail::split(s, ',')) {
    const auto v = to_unsigned(config::detail::trim(part), "partition count");
    if (v == 0) throw UsageError("partition counts must be >= 1");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// "lo:hi:count", log-spaced.
inline std::vector<double> to_lambda_grid(const std::string& s) {
  const auto parts = io::detail::split(s, ':');
  if (parts.size() != 3) throw UsageError("lambda grid must be lo:hi:count, got '" + s + "'");
  const double lo = to_real(parts[0], "lambda grid lo");
  const double hi = to_real(parts[1], "lambda grid hi");
  const auto count = to_unsigned(parts[2], "lambda grid count");
  try {
    return log_space(lo, hi, static_cast<std::size_t>(count));
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("lambda grid: ") + e.what());
  }
}

// Settings shared by every GMM scenario.
struct Common {
  double mu1 = 1.0;
  double mu2 = 2.0;
  std::size_t n_envs = 24;
  double lambda = 10.0;
  std::vector<std::size_t> partitions = default_partition_counts();
  FairnessMode fairness_mode = FairnessMode::assigned;
  SolveOptions solve{};
};

inline void apply_common(Common& c, const std::string& key, const std::string& value) {
  if (key == "mu1") c.mu1 = to_real(value, key);
  else if (key == "mu2") c.mu2 = to_real(value, key);
  else if (key == "n_envs" || key == "n-envs") c.n_envs = static_cast<std::size_t>(to_unsigned(value, key));
  else if (key == "lambda") c.lambda = to_real(value, key);
  else if (key == "partitions" || key == "n-parts") c.partitions = to_counts(value);
  else if (key == "fairness_mode" || key == "fairness-mode") {
    try {
      c.fairness_mode = parse_fairness_mode(value);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  } else if (key == "grid_points") c.solve.grid_points = static_cast<std::size_t>(to_unsigned(value, key));
  else if (key == "refine_tol") c.solve.refine_tol = to_real(value, key);
  else throw UsageError("unknown setting '" + key + "'");
}

inline ScenarioConfig make_scenario(const Common& c, double sigma, double delta, std::string label) {
  ScenarioConfig s;
  s.label = std::move(label);
  s.mu1 = c.mu1;
  s.mu2 = c.mu2;
  s.sigma = sigma;
  s.delta = delta;
  s.n_envs = c.n_envs;
  s.lambda = c.lambda;
  s.partition_counts = c.partitions;
  s.fairness_mode = c.fairness_mode;
  s.solve_options = c.solve;
  return s;
}

struct SigmaDelta {
  double sigma;
  double delta;
  std::string label;
};

inline SigmaDelta read_sigma_delta(const config::Section& sec, SigmaDelta base) {
  for (const auto& [k, v] : sec.values) {
    if (k == "sigma") base.sigma = to_real(v, k);
    else if (k == "delta") base.delta = to_real(v, k);
    else throw UsageError("unknown key '" + k + "' in [" + sec.kind + "] section");
  }
  base.label = sec.name;
  return base;
}

inline void validate_scenario(const ScenarioConfig& s) {
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

}  // namespace detail

// Builds a manifest from argv (argv[0] is the program name).
inline RunManifest parse_args(int argc, const char* const* argv) {
  CLI::App app{"Partial invariant risk minimization experiments", "pirm-lab"};
  std::string command;
  std::string config_path;
  std::string out_dir = "results";
  bool svg = false;
  std::map<std::string, std::string> flags;

  app.add_option("command", command, "sweep-partitions | sweep-lambda | sem | all")->required();
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--svg", svg, "also write SVG plots");
  const std::vector<std::pair<std::string, std::string>> value_flags = {
      {"--sigma", "class standard deviation"},
      {"--delta", "per-environment shift"},
      {"--mu1", "class-1 mean of environment 0"},
      {"--mu2", "class-2 mean of environment 0"},
      {"--n-envs", "number of environments"},
      {"--lambda", "IRMv1 penalty weight"},
      {"--lambda-grid", "lambda sweep grid lo:hi:count (log spaced)"},
      {"--partitions,--n-parts", "comma separated partition counts"},
      {"--fairness-mode", "assigned | per-threshold-global"},
      {"--seed", "SEM random seed"},
  };
  for (const auto& [name, help] : value_flags) {
    const std::string key = name.substr(2, name.find(',') == std::string::npos ? std::string::npos
                                                                              : name.find(',') - 2);
    app.add_option_function<std::string>(
        name, [&flags, key](const std::string& v) { flags[key] = v; }, help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunManifest m;
  m.command = parse_command(command);
  m.overrides = flags;
  m.output_dir = out_dir;
  m.emit_svg = svg;

  detail::Common common;
  std::vector<detail::SigmaDelta> base_scenarios = {
      {0.1, 0.1, ""}, {1.0, 0.1, ""}, {0.1, 1.0, ""}, {1.0, 1.0, ""}};
  detail::SigmaDelta lambda_base{0.1, 0.1, ""};
  std::optional<std::string> grid_text;

  if (!config_path.empty()) {
    m.config_path = config_path;
    config::KeyValueConfig cfg;
    try {
      cfg = config::load_config(config_path);
    } catch (const config::ConfigError& e) {
      throw UsageError(e.what());
    }
    for (const auto& [k, v] : cfg.globals.values) {
      if (k == "lambda_grid") grid_text = v;
      else if (k == "seed") m.seed = detail::to_unsigned(v, k);
      else detail::apply_common(common, k, v);
    }
    if (const auto secs = cfg.sections_of("scenario"); !secs.empty()) {
      base_scenarios.clear();
      for (const auto* s : secs) base_scenarios.push_back(detail::read_sigma_delta(*s, {1.0, 0.1, ""}));
    }
    for (const auto& sec : cfg.sections) {
      if (sec.kind == "scenario") continue;
      if (sec.kind == "lambda-sweep") {
        lambda_base = detail::read_sigma_delta(sec, lambda_base);
      } else if (sec.kind == "sem") {
        for (const auto& [k, v] : sec.values) {
          if (k == "sigma_e") m.sem.sigma_e = detail::to_reals(v, k);
          else if (k == "f") {
            const auto f = detail::to_reals(v, k);
            if (f.size() != sem::kNumE) throw UsageError("[sem] f needs exactly 3 values");
            std::copy(f.begin(), f.end(), m.sem.f_values.begin());
          } else if (k == "n_samples") {
            m.sem.n_samples = static_cast<std::size_t>(detail::to_unsigned(v, k));
          } else {
            throw UsageError("unknown key '" + k + "' in [sem] section");
          }
        }
      } else {
        throw UsageError("unknown section [" + sec.kind + "]");
      }
    }
  }

  std::optional<double> sigma_flag, delta_flag;
  for (const auto& [k, v] : flags) {
    if (k == "sigma") sigma_flag = detail::to_real(v, k);
    else if (k == "delta") delta_flag = detail::to_real(v, k);
    else if (k == "lambda-grid") grid_text = v;
    else if (k == "seed") m.seed = detail::to_unsigned(v, k);
    else detail::apply_common(common, k, v);
  }
  m.sem.seed = m.seed;
  m.lambda_grid = grid_text ? detail::to_lambda_grid(*grid_text) : default_lambda_grid();

  auto resolve = [&](detail::SigmaDelta sd) {
    if (sigma_flag) sd.sigma = *sigma_flag;
    if (delta_flag) sd.delta = *delta_flag;
    if (sigma_flag || delta_flag || sd.label.empty()) sd.label = scenario_label(sd.sigma, sd.delta);
    return detail::make_scenario(common, sd.sigma, sd.delta, sd.label);
  };
  std::set<std::pair<double, double>> seen;
  for (const auto& sd : base_scenarios) {
    ScenarioConfig s = resolve(sd);
    if (!seen.emplace(s.sigma, s.delta).second) continue;
    detail::validate_scenario(s);
    m.partition_scenarios.push_back(std::move(s));
  }
  m.lambda_scenario = resolve(lambda_base);
  detail::validate_scenario(m.lambda_scenario);
  try {
    m.sem.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return m;
}

inline std::vector<SweepRecord> partition_records(const RunManifest& m) {
  std::vector<SweepRecord> all;
  for (const auto& s : m.partition_scenarios) {
    auto recs = run_partition_sweep(s);
    all.insert(all.end(), recs.begin(), recs.end());
  }
  return all;
}

inline std::vector<SweepRecord> lambda_records(const RunManifest& m) {
  return run_lambda_sweep(m.lambda_scenario, m.lambda_grid);
}

inline void report_written(std::ostream& log, const std::filesystem::path& p) {
  log << "wrote " << p.string() << '\n';
}

// Executes the manifest. Returns the process exit code.
inline int run(const RunManifest& m, std::ostream& log, std::ostream& err) {
  try {
    std::filesystem::create_directories(m.output_dir);
    const bool all = m.command == Command::all;
    if (all || m.command == Command::sweep_partitions) {
      const auto recs = partition_records(m);
      const auto path = m.output_dir / "partition_sweep.csv";
      io::write_csv(recs, path);
      report_written(log, path);
      if (m.emit_svg) {
        for (const auto& p : svg::write_svg_plots(recs, m.output_dir, svg::SweepKind::partitions)) {
          report_written(log, p);
        }
      }
    }
    if (all || m.command == Command::sweep_lambda) {
      const auto recs = lambda_records(m);
      const auto path = m.output_dir / "lambda_sweep.csv";
      io::write_csv(recs, path);
      report_written(log, path);
      if (m.emit_svg) {
        for (const auto& p : svg::write_svg_plots(recs, m.output_dir, svg::SweepKind::lambda)) {
          report_written(log, p);
        }
      }
    }
    if (all || m.command == Command::sem) {
      const auto report = sem::run_sem_experiment(m.sem);
      const auto cells = m.output_dir / "sem_cells.csv";
      const auto summary = m.output_dir / "sem_summary.csv";
      io::write_text_file(cells, io::sem_cells_csv(report));
      report_written(log, cells);
      io::write_text_file(summary, io::sem_summary_csv(report));
      report_written(log, summary);
    }
  } catch (const std::exception& e) {
    err << "pirm-lab: error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

inline int main_entry(int argc, const char* const* argv, std::ostream& log, std::ostream& err) {
  RunManifest m;
  try {
    m = parse_args(argc, argv);
  } catch (const HelpRequested& h) {
    log << h.what();
    return kExitOk;
  } catch (const UsageError& e) {
    err << "pirm-lab: usage error: " << e.what() << '\n'
        << "run 'pirm-lab --help' for usage\n";
    return kExitUsage;
  }
  return run(m, log, err);
}

}  // namespace pirm::cli
