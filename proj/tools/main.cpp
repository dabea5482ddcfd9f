#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "evobo/config.hpp"
#include "evobo/errors.hpp"
#include "evobo/metrics_trace.hpp"
#include "evobo/orchestrator.hpp"
#include "evobo/trace_io.hpp"

namespace fs = std::filesystem;
using namespace evobo;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> budget;
  std::optional<int> warm_up;
  std::optional<std::string> mode;
  std::optional<double> theta;
  std::optional<int> count_threshold;
  bool adaptive = false;
  std::optional<double> sigma;
  std::optional<double> confidence;
  std::optional<std::string> generator;
  std::optional<int> per_cluster;
  bool exclude_true = false;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Run seed");
  cmd->add_option("--budget", o.budget, "Number of rounds T");
  cmd->add_option("--warm-up", o.warm_up, "Warm-up rounds");
  cmd->add_option("--mode", o.mode, "full | greedy | static-evolution");
  cmd->add_option("--theta", o.theta, "Anomaly score threshold");
  cmd->add_option("--count-threshold", o.count_threshold, "Anomaly count threshold");
  cmd->add_flag("--adaptive", o.adaptive, "Adaptive anomaly threshold");
  cmd->add_option("--sigma", o.sigma, "Observation noise standard deviation");
  cmd->add_option("--confidence", o.confidence, "MAP mass threshold for exploit/refine");
  cmd->add_option("--generator", o.generator, "scripted | llm");
  cmd->add_option("--hypotheses-per-cluster", o.per_cluster, "Synthetic world size per cluster");
  cmd->add_flag("--exclude-true", o.exclude_true, "Leave the true principle out of the initial set");
}

RunConfig load(const std::string& path, const Overrides& o) {
  RunConfig c = path.empty() ? RunConfig{} : load_run_config(path);
  if (o.seed) c.seed = *o.seed;
  if (o.budget) c.budget = *o.budget;
  if (o.warm_up) c.warm_up_rounds = *o.warm_up;
  if (o.mode) c.mode = run_mode_from_string(*o.mode);
  if (o.theta) c.anomaly.theta = *o.theta;
  if (o.count_threshold) c.anomaly.count_threshold = *o.count_threshold;
  if (o.adaptive) c.anomaly.adaptive = true;
  if (o.sigma) c.obs_noise_variance = *o.sigma * *o.sigma;
  if (o.confidence) c.confidence_threshold = *o.confidence;
  if (o.generator) c.generator = *o.generator;
  if (o.per_cluster) c.world.hypotheses_per_cluster = *o.per_cluster;
  if (o.exclude_true) c.initial.include_true = false;
  validate(c);
  return c;
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void apply_axis(RunConfig& c, const std::string& axis, const std::string& value) {
  try {
    if (axis == "theta") {
      c.anomaly.theta = std::stod(value);
    } else if (axis == "count_threshold") {
      c.anomaly.count_threshold = std::stoi(value);
    } else if (axis == "sigma") {
      const double s = std::stod(value);
      c.obs_noise_variance = s * s;
    } else if (axis == "warm_up") {
      c.warm_up_rounds = std::stoi(value);
    } else if (axis == "mode") {
      c.mode = run_mode_from_string(value);
    } else {
      throw ValidationError("unknown sweep axis '" + axis + "'");
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ValidationError*>(&e)) throw;
    throw ValidationError("sweep value '" + value + "' is not valid for axis '" + axis + "'");
  }
  validate(c);
}

int cmd_run(const std::string& config_path, const Overrides& o, const std::string& out, std::string summary_path) {
  const RunConfig c = load(config_path, o);
  const Trace trace = run(c);
  write_trace(trace, out);
  if (summary_path.empty()) summary_path = out + ".summary.json";
  if (trace.rounds.empty()) {
    write_file(summary_path, nlohmann::json{{"config_hash", trace.header.config_hash},
                                            {"truncation_note", trace.truncation_note},
                                            {"errors", trace.errors}}
                                 .dump(2) +
                                 "\n");
    std::cerr << "run produced no rounds: " << trace.truncation_note << "\n";
    return 1;
  }
  const MetricReport m = compute_metrics(trace, std::nullopt, static_cast<std::size_t>(c.budget));
  write_file(summary_path, summary_json(trace, m).dump(2) + "\n");
  std::cout << "rounds " << m.rounds << (trace.truncated ? " (truncated: " + trace.truncation_note + ")" : "") << "\n"
            << "SQ " << fmt(m.sq_percent) << "%  AUOC " << fmt(m.auoc_percent) << "%  APD " << fmt(m.apd) << "\n"
            << "final MAP " << m.final_map << " mass " << fmt(m.final_map_mass) << "  working set "
            << m.working_set_size << "\n";
  return trace.errors.empty() ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const Overrides& o, const std::string& axis,
              const std::string& values_arg, const std::string& seeds_arg, int jobs, const std::string& out_dir) {
  const RunConfig base = load(config_path, o);
  const auto values = split_list(values_arg);
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(seeds_arg)) seeds.push_back(std::stoull(s));
  if (values.empty()) throw ValidationError("sweep needs at least one value");
  if (seeds.empty()) throw ValidationError("sweep needs at least one seed");

  struct Job {
    std::size_t value_index;
    RunConfig config;
    std::string path;
    std::optional<MetricReport> report;
    std::string error;
  };
  std::vector<Job> work;
  fs::create_directories(out_dir);
  for (std::size_t v = 0; v < values.size(); ++v) {
    for (auto seed : seeds) {
      RunConfig c = base;
      c.seed = seed;
      apply_axis(c, axis, values[v]);
      work.push_back({v, c, (fs::path(out_dir) / (axis + "-" + values[v] + "-seed" + std::to_string(seed) + ".jsonl")).string(),
                      std::nullopt, {}});
    }
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      try {
        const Trace t = run(work[i].config);
        write_trace(t, work[i].path);
        if (!t.errors.empty()) work[i].error = t.errors.front();
        if (!t.rounds.empty()) {
          work[i].report = compute_metrics(t, std::nullopt, static_cast<std::size_t>(work[i].config.budget));
        }
      } catch (const std::exception& e) {
        work[i].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < std::max(1, jobs); ++j) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  int status = 0;
  std::string csv = "axis,value,runs,median_sq,median_auoc,median_apd,median_augmentations,median_regret_c,median_final_map_mass\n";
  for (std::size_t v = 0; v < values.size(); ++v) {
    std::vector<double> sq, au, ap, aug, rc, mm;
    int runs = 0;
    for (const auto& j : work) {
      if (j.value_index != v) continue;
      if (!j.error.empty()) {
        std::cerr << j.path << ": " << j.error << "\n";
        status = 1;
      }
      if (!j.report) continue;
      ++runs;
      sq.push_back(j.report->sq_percent);
      au.push_back(j.report->auoc_percent);
      if (j.report->apd) ap.push_back(*j.report->apd);
      aug.push_back(j.report->augmentations);
      rc.push_back(j.report->regret.coefficient);
      mm.push_back(j.report->final_map_mass);
    }
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s,%s,%d,%.6g,%.6g,%.6g,%.6g,%.6g,%.6g\n", axis.c_str(), values[v].c_str(), runs,
                  median(sq), median(au), median(ap), median(aug), median(rc), median(mm));
    csv += buf;
  }
  write_file((fs::path(out_dir) / "aggregate.csv").string(), csv);
  std::cout << csv;
  return status;
}

int cmd_replay(const std::string& path) {
  const LoadedTrace lt = read_trace(path);
  const ReplayReport rep = replay(lt.trace);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  bool ok = rep.ok;
  if (!lt.digest_present) {
    std::cerr << "trace footer missing\n";
    ok = false;
  } else if (!lt.digest_ok) {
    std::cerr << "trace digest mismatch: file was modified after it was written\n";
    ok = false;
  }
  if (rep.first_divergent_round) std::cerr << "first divergent round: " << *rep.first_divergent_round << "\n";
  std::cout << rep.message << " (max abs error " << rep.max_abs_error << ")\n";
  return ok ? 0 : 1;
}

std::optional<double> preset(const std::string& name) {
  if (name.empty()) return std::nullopt;
  if (name == "nanohelix") return kMuRefNanohelix;
  if (name == "biomolecular") return kMuRefBioMolecular;
  if (name == "superconductor") return kMuRefSuperconductor;
  if (name == "transition-metal") return kMuRefTransitionMetal;
  throw ValidationError("unknown mu_ref preset '" + name + "'");
}

int cmd_metrics(const std::string& path, std::optional<double> mu_ref, const std::string& preset_name,
                const std::string& out) {
  const LoadedTrace lt = read_trace(path);
  if (!mu_ref) mu_ref = preset(preset_name);
  const MetricReport m = compute_metrics(lt.trace, mu_ref);
  const std::string doc = to_json(m).dump(2) + "\n";
  if (out.empty()) {
    std::cout << doc;
  } else {
    write_file(out, doc);
  }
  return 0;
}

int cmd_export(const std::string& path, const std::string& out) {
  const LoadedTrace lt = read_trace(path);
  const std::string csv = series_csv(compute_metrics(lt.trace));
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_file(out, csv);
  }
  return 0;
}

int cmd_verify(const std::string& path) {
  const LoadedTrace lt = read_trace(path);
  std::vector<std::string> problems;
  if (!lt.digest_present) problems.push_back("footer missing");
  if (lt.digest_present && !lt.digest_ok) problems.push_back("digest mismatch");
  for (std::size_t i = 0; i < lt.trace.rounds.size(); ++i) {
    const auto& r = lt.trace.rounds[i];
    const std::string where = "round " + std::to_string(r.round) + ": ";
    if (r.round != static_cast<int>(i)) problems.push_back(where + "out of sequence");
    if (r.beliefs.round != r.round) problems.push_back(where + "belief snapshot round mismatch");
    if (r.observation.round != r.round || r.observation.hypothesis_id != r.selected) {
      problems.push_back(where + "observation does not match the selection");
    }
    double total = 0.0;
    for (double m : r.beliefs.masses) total += m;
    if (std::abs(total - 1.0) > 1e-9) problems.push_back(where + "masses do not sum to one");
  }
  for (const auto& p : problems) std::cerr << p << "\n";
  std::cout << (problems.empty() ? "trace ok" : "trace invalid") << " (" << lt.trace.rounds.size() << " rounds)\n";
  return problems.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Principle-evolving Bayesian optimization engine"};
  app.require_subcommand(1);

  std::string config_path, out, summary, trace_path, axis, values, seeds = "0", preset_name, out_dir = "sweep";
  std::optional<double> mu_ref;
  int jobs = 1;
  Overrides o;

  auto* run_cmd = app.add_subcommand("run", "Run one experiment");
  run_cmd->add_option("-c,--config", config_path, "JSON config file");
  run_cmd->add_option("-o,--out", out, "Trace output (JSONL)")->default_val("trace.jsonl");
  run_cmd->add_option("--summary", summary, "Summary JSON output");
  add_override_flags(run_cmd, o);

  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one axis over values and seeds");
  sweep_cmd->add_option("-c,--config", config_path, "JSON config file");
  sweep_cmd->add_option("--axis", axis, "theta | count_threshold | sigma | warm_up | mode")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated values")->required();
  sweep_cmd->add_option("--seeds", seeds, "Comma-separated seeds");
  sweep_cmd->add_option("--jobs", jobs, "Concurrent runs");
  sweep_cmd->add_option("-o,--out-dir", out_dir, "Output directory");
  add_override_flags(sweep_cmd, o);

  auto* replay_cmd = app.add_subcommand("replay", "Recompute belief snapshots from a trace");
  replay_cmd->add_option("trace", trace_path, "Trace file")->required();

  auto* metrics_cmd = app.add_subcommand("metrics", "Compute metrics for a trace");
  metrics_cmd->add_option("trace", trace_path, "Trace file")->required();
  metrics_cmd->add_option("--mu-ref", mu_ref, "Reference value (default: the trace's v*)");
  metrics_cmd->add_option("--preset", preset_name, "nanohelix | biomolecular | superconductor | transition-metal");
  metrics_cmd->add_option("-o,--out", out, "Output JSON");

  auto* export_cmd = app.add_subcommand("export", "Export per-round series as CSV");
  export_cmd->add_option("trace", trace_path, "Trace file")->required();
  export_cmd->add_option("-o,--out", out, "Output CSV");

  auto* verify_cmd = app.add_subcommand("verify", "Check trace integrity and structure");
  verify_cmd->add_option("trace", trace_path, "Trace file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return cmd_run(config_path, o, out, summary);
    if (*sweep_cmd) return cmd_sweep(config_path, o, axis, values, seeds, jobs, out_dir);
    if (*replay_cmd) return cmd_replay(trace_path);
    if (*metrics_cmd) return cmd_metrics(trace_path, mu_ref, preset_name, out);
    if (*export_cmd) return cmd_export(trace_path, out);
    if (*verify_cmd) return cmd_verify(trace_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
