// Copyright 2026 The PRMPPI Authors
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


#include "prmppi/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include <json.hpp>

namespace prmppi::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "environment",     "controller",      "preset",
      "trials",          "seed",            "output",
      "workers",         "timing",          "log.steps",
      "log.beliefs",     "delta",           "samples",
      "rollouts",        "horizon",         "penalty",
      "particles",       "svgd.step_size",  "svgd.iterations",
      "ukf.process_noise", "oracle.rollout_factor", "parallel_batches",
  };
  return keys;
}

// Keys that locate or schedule a run without changing its results.
bool is_plumbing(const std::string& key) {
  return key == "output" || key == "workers";
}

void flatten(const json& node, const std::string& prefix, FlatConfig& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      flatten(value, prefix.empty() ? key : prefix + "." + key, out);
    }
    return;
  }
  if (prefix.empty()) throw ConfigError("configuration must be a JSON object");
  out[prefix] = node.dump();
}

class Reader {
 public:
  explicit Reader(const FlatConfig& config) : config_(config) {}

  bool has(const std::string& key) const { return config_.count(key) > 0; }

  json raw(const std::string& key) const {
    try {
      return json::parse(config_.at(key));
    } catch (const json::exception&) {
      throw ConfigError("configuration key " + key + " is not valid JSON");
    }
  }

  std::string str(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json v = raw(key);
    if (!v.is_string()) throw ConfigError(key + " must be a string");
    return v.get<std::string>();
  }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json v = raw(key);
    if (!v.is_number()) throw ConfigError(key + " must be a number");
    return v.get<double>();
  }

  long long integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const json v = raw(key);
    if (v.is_number_integer()) return v.get<long long>();
    if (v.is_number_float() && v.get<double>() == std::floor(v.get<double>())) {
      return static_cast<long long>(v.get<double>());
    }
    throw ConfigError(key + " must be an integer");
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json v = raw(key);
    if (!v.is_boolean()) throw ConfigError(key + " must be true or false");
    return v.get<bool>();
  }

 private:
  const FlatConfig& config_;
};

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json metric_json(const MetricSummary& m) {
  return {{"mean", m.mean}, {"std", m.stddev}, {"count", m.count}};
}

std::string fmt(double v) { return format_number(v); }

std::string short_fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string pm(const json& metric) {
  if (!metric.is_object() || metric["mean"].is_null()) return "-";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f +- %.3f", metric["mean"].get<double>(),
                metric["std"].get<double>());
  return buf;
}

}  // namespace

FlatConfig parse_config_text(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") +
                      e.what());
  }
  FlatConfig out;
  flatten(doc, "", out);
  return out;
}

FlatConfig load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open configuration file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string quote(std::string_view text) { return json(text).dump(); }

void set_value(FlatConfig& config, const std::string& key,
               const std::string& json_value) {
  config[key] = json_value;
}

void apply_override(FlatConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw UsageError("override '" + std::string(assignment) +
                     "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string value(assignment.substr(eq + 1));
  json parsed = json::parse(value, nullptr, false);
  config[key] = parsed.is_discarded() ? quote(value) : parsed.dump();
}

ResolvedRun resolve(const FlatConfig& config) {
  for (const auto& [key, value] : config) {
    if (key.rfind("env.", 0) != 0 && !known_keys().count(key)) {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
  }
  const Reader r(config);
  ResolvedRun out;
  RunConfig& run = out.run;
  run.environment = r.str("environment", "");
  if (run.environment.empty()) {
    throw ConfigError("no environment given (key 'environment' or --env)");
  }
  run.controller = r.str("controller", run.controller);
  run.preset = r.str("preset", run.preset);
  if (run.preset != "desk" && run.preset != "full") {
    throw ConfigError("preset must be 'desk' or 'full'");
  }
  const bool full = run.preset == "full";
  const long long trials = r.integer("trials", full ? 100 : 20);
  if (trials < 1) throw ConfigError("trials must be at least 1");
  run.trials = static_cast<int>(trials);
  const long long seed = r.integer("seed", 0);
  if (seed < 0) throw ConfigError("seed must be non-negative");
  run.seed = static_cast<std::uint64_t>(seed);
  run.output_dir = r.str("output", run.output_dir.string());
  run.workers = static_cast<int>(r.integer("workers", 0));
  if (run.workers < 0) throw ConfigError("workers must be non-negative");
  run.timing = r.boolean("timing", false);
  run.log_steps = r.boolean("log.steps", true);
  run.log_beliefs = r.boolean("log.beliefs", true);
  for (const auto& [key, value] : config) {
    if (key.rfind("env.", 0) == 0) {
      run.env_overrides[key.substr(4)] = r.number(key, 0.0);
    }
  }

  out.env = make_environment(run.environment, run.env_overrides);
  ControllerSpec& spec = out.spec;
  spec = default_controller(out.env, parse_variant(run.controller));
  ControllerConfig& mpc = spec.mpc;
  mpc.delta = r.number("delta", mpc.delta);
  if (!(mpc.delta > 0 && mpc.delta < 1)) {
    throw ConfigError("delta must lie in (0, 1)");
  }
  // One above the minimum keeps the conformal rank below P, which is how
  // the sample-count ablation pairs delta with P (0.1 -> 10, 0.05 -> 20).
  mpc.samples = static_cast<int>(
      r.integer("samples", minimum_samples(mpc.delta) + 1));
  mpc.rollouts = static_cast<int>(r.integer("rollouts", full ? 500 : 200));
  mpc.horizon = static_cast<int>(r.integer("horizon", mpc.horizon));
  mpc.penalty = r.number("penalty", mpc.penalty);
  mpc.parallel_batches = r.boolean("parallel_batches", false);
  spec.particles = static_cast<int>(r.integer("particles", spec.particles));
  spec.svgd.step_size = r.number("svgd.step_size", spec.svgd.step_size);
  spec.svgd.iterations =
      static_cast<int>(r.integer("svgd.iterations", spec.svgd.iterations));
  spec.ukf_process_noise = r.number("ukf.process_noise", spec.ukf_process_noise);
  spec.oracle_rollout_factor = static_cast<int>(
      r.integer("oracle.rollout_factor", spec.oracle_rollout_factor));
  try {
    spec.validate(out.env);
  } catch (const InsufficientSamples& e) {
    throw InsufficientSamples(
        std::string("too few parameter samples for the conformal bound: ") +
        e.what());
  }

  FlatConfig& eff = out.config;
  eff = config;
  eff["environment"] = quote(run.environment);
  eff["controller"] = quote(run.controller);
  eff["preset"] = quote(run.preset);
  eff["trials"] = std::to_string(run.trials);
  eff["seed"] = std::to_string(run.seed);
  eff["delta"] = json(mpc.delta).dump();
  eff["samples"] = std::to_string(mpc.samples);
  eff["rollouts"] = std::to_string(mpc.rollouts);
  eff["horizon"] = std::to_string(mpc.horizon);
  eff["penalty"] = json(mpc.penalty).dump();
  eff["particles"] = std::to_string(spec.particles);
  eff["svgd.step_size"] = json(spec.svgd.step_size).dump();
  eff["svgd.iterations"] = std::to_string(spec.svgd.iterations);
  for (const auto& key : {"output", "workers"}) eff.erase(key);
  return out;
}

void write_file_atomic(const fs::path& path, std::string_view content) {
  const fs::path tmp =
      path.string() + ".tmp" + std::to_string(static_cast<long>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::system_error(errno, std::generic_category(),
                                      "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::system_error(errno, std::generic_category(),
                                      "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string summary_json(const ResolvedRun& run,
                         const BenchmarkResult& result) {
  const BenchmarkSummary& s = result.summary;
  json doc;
  doc["environment"] = s.environment;
  doc["controller"] = s.controller;
  doc["trials"] = s.trials;
  doc["base_seed"] = run.run.seed;
  json cfg = json::object();
  for (const auto& [key, value] : run.config) {
    if (!is_plumbing(key)) cfg[key] = json::parse(value);
  }
  doc["config"] = cfg;

  json metrics;
  metrics["RMSE"] = metric_json(s.rmse);
  metrics["SR"] = {{"successes", s.successes}, {"trials", s.trials}};
  if (s.pa) metrics["PA"] = metric_json(*s.pa);
  doc["metrics"] = metrics;

  json laps = json::array();
  for (std::size_t i = 0; i < s.lap_rmse.size(); ++i) {
    json lap = {{"lap", i + 1}, {"rmse", metric_json(s.lap_rmse[i])}};
    if (i < s.lap_pa.size()) lap["pa"] = metric_json(s.lap_pa[i]);
    laps.push_back(lap);
  }
  doc["laps"] = laps;
  doc["fallback_steps"] = s.fallback_steps;
  doc["failed_trials"] = s.failed_trials;
  if (run.run.timing) {
    MetricSummary ms = s.step_time;
    ms.mean *= 1e3;
    ms.stddev *= 1e3;
    doc["step_time_ms"] = metric_json(ms);
  }

  json records = json::array();
  for (const auto& r : result.records) {
    json rec;
    rec["seed"] = r.seed;
    rec["true_params"] = vector_json(r.true_params);
    rec["rmse"] = r.rmse;
    rec["lap_rmse"] = r.lap_rmse;
    rec["success"] = r.success;
    rec["violations"] = r.violations;
    rec["min_margin"] = r.min_margin;
    if (estimates_parameters(run.spec.variant)) {
      rec["pa"] = r.pa_trace;
      rec["final_estimate"] = vector_json(r.final_estimate);
    }
    rec["nominal_steps"] = r.nominal_steps;
    rec["robust_steps"] = r.robust_steps;
    rec["belief_updates"] = r.belief_updates;
    if (run.run.timing) rec["step_time_ms"] = 1e3 * r.step_time.mean;
    if (!r.error.empty()) rec["error"] = r.error;
    records.push_back(rec);
  }
  doc["records"] = records;
  return doc.dump(2) + "\n";
}

std::string trial_csv(const Environment& env, const TrialRecord& record,
                      bool timing) {
  std::ostringstream out;
  const int nx = env.model->nx(), nu = env.model->nu();
  out << "lap,step";
  for (int i = 0; i < nx; ++i) out << ",x" << i;
  for (int i = 0; i < nu; ++i) out << ",u" << i;
  out << ",h,branch,candidate,R_nominal,R_robust";
  if (timing) out << ",t_sampling,t_rollout,t_update,t_check,t_step";
  out << '\n';
  for (const auto& s : record.steps) {
    out << s.lap << ',' << s.step;
    for (int i = 0; i < nx; ++i) out << ',' << fmt(s.state(i));
    for (int i = 0; i < nu; ++i) out << ',' << fmt(s.control(i));
    out << ',' << fmt(s.margin) << ',' << to_string(s.branch) << ','
        << s.candidate << ',' << fmt(s.robustness_nominal) << ','
        << fmt(s.robustness_robust);
    if (timing) {
      out << ',' << fmt(s.timing.sampling) << ',' << fmt(s.timing.rollout)
          << ',' << fmt(s.timing.update) << ',' << fmt(s.timing.check) << ','
          << fmt(s.wall_time);
    }
    out << '\n';
  }
  return out.str();
}

int cmd_validate(const FlatConfig& config, std::ostream& out,
                 std::ostream& err) {
  try {
    const ResolvedRun run = resolve(config);
    out << "ok: " << run.run.environment << " / " << run.run.controller
        << ", delta " << short_fmt(run.spec.mpc.delta) << ", P "
        << run.spec.mpc.samples << ", M " << run.spec.mpc.rollouts << ", K "
        << run.spec.mpc.horizon << ", " << run.run.trials << " trials\n";
    return 0;
  } catch (const std::exception& e) {
    err << "validation error: " << e.what() << '\n';
    return 2;
  }
}

int cmd_run(const FlatConfig& config, std::ostream& out, std::ostream& err) {
  ResolvedRun run;
  try {
    run = resolve(config);
  } catch (const std::exception& e) {
    err << "validation error: " << e.what() << '\n';
    return 2;
  }
  const fs::path dir = run.run.output_dir;
  try {
    fs::create_directories(dir);
  } catch (const std::exception& e) {
    err << "cannot create output directory: " << e.what() << '\n';
    return 3;
  }
  RunOptions options;
  options.keep_steps = run.run.log_steps;
  options.keep_snapshots = run.run.log_beliefs;
  const BenchmarkResult result = run_benchmark(
      run.env, run.spec, run.run.trials, run.run.seed, run.run.workers, options);
  try {
    for (const auto& r : result.records) {
      const std::string seed = std::to_string(r.seed);
      if (run.run.log_steps) {
        write_file_atomic(dir / ("trial_" + seed + ".csv"),
                          trial_csv(run.env, r, run.run.timing));
      }
      for (std::size_t i = 0; i < r.belief_snapshots.size(); ++i) {
        write_file_atomic(
            dir / ("belief_" + seed + "_lap" + std::to_string(i) + ".csv"),
            r.belief_snapshots[i]);
      }
    }
    write_file_atomic(dir / "summary.json", summary_json(run, result));
  } catch (const std::exception& e) {
    err << "I/O error: " << e.what() << '\n';
    return 3;
  }
  const BenchmarkSummary& s = result.summary;
  out << s.environment << " / " << s.controller << ": RMSE "
      << short_fmt(s.rmse.mean) << " +- " << short_fmt(s.rmse.stddev) << ", SR "
      << s.successes << "/" << s.trials;
  if (s.pa) {
    out << ", PA " << short_fmt(s.pa->mean) << " +- " << short_fmt(s.pa->stddev);
  }
  out << ", fallback steps " << s.fallback_steps << '\n';
  for (const auto& r : result.records) {
    if (!r.error.empty()) {
      out << "  trial " << r.seed << " aborted: " << r.error << '\n';
    }
  }
  return 0;
}

std::string cmd_table(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::is_regular_file(dir / "summary.json")) files.push_back(dir / "summary.json");
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (entry.path().filename() == "summary.json" &&
          entry.path() != dir / "summary.json") {
        files.push_back(entry.path());
      }
    }
  }
  if (files.empty()) throw UsageError("no summary.json found under " + dir.string());
  std::sort(files.begin(), files.end());

  struct Row {
    std::string env, controller, rmse, sr, pa;
  };
  std::vector<Row> rows;
  for (const auto& f : files) {
    std::ifstream in(f);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("cannot parse " + f.string() + ": " + e.what());
    }
    const json& m = doc["metrics"];
    Row row{doc.value("environment", "?"), doc.value("controller", "?"),
            pm(m["RMSE"]),
            std::to_string(m["SR"].value("successes", 0)) + "/" +
                std::to_string(m["SR"].value("trials", 0)),
            m.contains("PA") ? pm(m["PA"]) : "-"};
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.env < b.env;
  });
  const std::vector<std::string> head = {"Environment", "Method", "RMSE", "SR",
                                         "PA (%)"};
  std::vector<std::size_t> width(head.size());
  for (std::size_t i = 0; i < head.size(); ++i) width[i] = head[i].size();
  for (const auto& r : rows) {
    const std::string cells[] = {r.env, r.controller, r.rmse, r.sr, r.pa};
    for (std::size_t i = 0; i < head.size(); ++i) {
      width[i] = std::max(width[i], cells[i].size());
    }
  }
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      out << (i ? " | " : "") << std::left << std::setw(static_cast<int>(width[i]))
          << cells[i];
    }
    out << '\n';
  };
  line(head);
  std::vector<std::string> rule;
  for (auto w : width) rule.push_back(std::string(w, '-'));
  line(rule);
  for (const auto& r : rows) line({r.env, r.controller, r.rmse, r.sr, r.pa});
  return out.str();
}

}  // namespace prmppi::cli
