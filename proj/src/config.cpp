#include "evobo/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "evobo/errors.hpp"
#include "evobo/random.hpp"

namespace evobo {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ValidationError("config field '" + where + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) {
      throw ValidationError("config field '" + (where.empty() ? k : where + "." + k) + "' is not recognized");
    }
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config field '" + (where.empty() ? std::string(key) : where + "." + key) +
                          "' has the wrong type");
  }
}

void fail(const std::string& field, const std::string& why) {
  throw ValidationError("config field '" + field + "' " + why);
}

}  // namespace

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::full: return "full";
    case RunMode::greedy: return "greedy";
    case RunMode::static_evolution: return "static";
  }
  return "full";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "full") return RunMode::full;
  if (s == "greedy" || s == "greedy-only") return RunMode::greedy;
  if (s == "static" || s == "static-evolution") return RunMode::static_evolution;
  throw ValidationError("unknown mode '" + s + "' (expected full, greedy, static)");
}

void validate(const RunConfig& c) {
  if (c.budget < 1) fail("budget", "must be at least 1");
  if (c.warm_up_rounds < 0) fail("warm_up_rounds", "must be non-negative");
  if (c.warm_up_rounds >= c.budget && !(c.budget == 1 && c.warm_up_rounds == 1)) {
    fail("warm_up_rounds", "must be smaller than budget");
  }
  if (!(c.anomaly.theta > 0.0 && c.anomaly.theta < 1.0)) fail("anomaly.theta", "must lie in (0, 1)");
  if (c.anomaly.count_threshold < 1) fail("anomaly.count_threshold", "must be at least 1");
  if (c.anomaly.window_rounds < 1) fail("anomaly.window_rounds", "must be at least 1");
  if (!(c.anomaly.percentile > 0.0 && c.anomaly.percentile < 1.0)) fail("anomaly.percentile", "must lie in (0, 1)");
  if (!(c.anomaly.floor > 0.0 && c.anomaly.floor < 1.0)) fail("anomaly.floor", "must lie in (0, 1)");
  if (!(c.obs_noise_variance > 0.0)) fail("obs_noise_variance", "must be positive");
  if (!(c.confidence_threshold > 0.0 && c.confidence_threshold < 1.0)) {
    fail("confidence_threshold", "must lie in (0, 1)");
  }
  if (c.bald_samples < 1) fail("bald_samples", "must be at least 1");
  if (!(c.epsilon_floor > 0.0)) fail("epsilon_floor", "must be positive");
  if (c.proposals_per_round < 1) fail("proposals_per_round", "must be at least 1");
  if (c.anomaly_payload < 1) fail("anomaly_payload", "must be at least 1");
  if (c.generator != "scripted" && c.generator != "llm") fail("generator", "must be 'scripted' or 'llm'");
  if (c.embedder != "deterministic-hash" && c.embedder != "external-service") {
    fail("embedder", "must be 'deterministic-hash' or 'external-service'");
  }
  if (c.embedding_dimension < 2) fail("embedding_dimension", "must be at least 2");
  if (c.embedding_dimension != c.world.dimension) fail("embedding_dimension", "must equal world.dimension");
  if (c.generator == "llm" && (c.llm.endpoint.empty() || c.llm.model.empty())) {
    fail("llm", "needs endpoint and model");
  }
  if (c.embedder == "external-service" && (c.embedding_service.endpoint.empty() || c.embedding_service.model.empty())) {
    fail("embedding_service", "needs endpoint and model");
  }
  if (c.world.clusters < 2) fail("world.clusters", "must be at least 2");
  if (c.world.hypotheses_per_cluster < 1) fail("world.hypotheses_per_cluster", "must be at least 1");
  if (!(c.world.noise_std >= 0.0)) fail("world.noise_std", "must be non-negative");
  if (c.initial.source != "latent" && c.initial.source != "texts") fail("initial.source", "must be 'latent' or 'texts'");
  if (c.initial.source == "texts" && c.initial.texts.empty()) fail("initial.texts", "must be nonempty");
  if (c.initial.source == "latent" && !c.initial.include_true && c.world.clusters < 2) {
    fail("initial.include_true", "leaves no initial principle");
  }
  if (c.gp.grid_points < 2) fail("gp.grid_points", "must be at least 2");
  if (!(c.gp.grid_low > 0.0 && c.gp.grid_high > c.gp.grid_low)) fail("gp.grid_low", "must be positive and below gp.grid_high");
}

json to_json(const RunConfig& c) {
  json world = {{"clusters", c.world.clusters},
                {"hypotheses_per_cluster", c.world.hypotheses_per_cluster},
                {"gain", c.world.gain},
                {"base", c.world.base},
                {"noise_std", c.world.noise_std},
                {"dimension", c.world.dimension},
                {"failure_outcome", c.world.failure_outcome},
                {"min_member_alignment", c.world.min_member_alignment},
                {"max_center_dot", c.world.max_center_dot}};
  if (!c.world_seed_from_run) world["seed"] = c.world.seed;
  if (c.world.true_index) world["true_index"] = *c.world.true_index;
  return {
      {"budget", c.budget},
      {"warm_up_rounds", c.warm_up_rounds},
      {"anomaly",
       {{"theta", c.anomaly.theta},
        {"count_threshold", c.anomaly.count_threshold},
        {"adaptive", c.anomaly.adaptive},
        {"window_rounds", c.anomaly.window_rounds},
        {"percentile", c.anomaly.percentile},
        {"floor", c.anomaly.floor}}},
      {"obs_noise_variance", c.obs_noise_variance},
      {"confidence_threshold", c.confidence_threshold},
      {"bald_samples", c.bald_samples},
      {"epsilon_floor", c.epsilon_floor},
      {"proposals_per_round", c.proposals_per_round},
      {"anomaly_payload", c.anomaly_payload},
      {"seed", c.seed},
      {"mode", to_string(c.mode)},
      {"generator", c.generator},
      {"llm",
       {{"endpoint", c.llm.endpoint},
        {"path", c.llm.path},
        {"model", c.llm.model},
        {"temperature", c.llm.temperature},
        {"context_messages", c.llm.context_messages},
        {"api_key_env", c.llm.api_key_env},
        {"max_attempts", c.llm.max_attempts}}},
      {"embedder", c.embedder},
      {"embedding_dimension", c.embedding_dimension},
      {"embedding_service",
       {{"endpoint", c.embedding_service.endpoint},
        {"path", c.embedding_service.path},
        {"model", c.embedding_service.model},
        {"api_key_env", c.embedding_service.api_key_env},
        {"max_attempts", c.embedding_service.max_attempts}}},
      {"world", world},
      {"initial", {{"source", c.initial.source}, {"include_true", c.initial.include_true}, {"texts", c.initial.texts}}},
      {"gp",
       {{"grid_points", c.gp.grid_points},
        {"grid_low", c.gp.grid_low},
        {"grid_high", c.gp.grid_high},
        {"full_grid_max_n", c.gp.full_grid_max_n}}},
      {"task", c.task},
      {"task_description", c.task_description},
  };
}

RunConfig run_config_from_json(const json& doc) {
  RunConfig c;
  check_keys(doc, "",
             {"budget", "warm_up_rounds", "anomaly", "obs_noise_variance", "confidence_threshold", "bald_samples",
              "epsilon_floor", "proposals_per_round", "anomaly_payload", "seed", "mode", "generator", "llm",
              "embedder", "embedding_dimension", "embedding_service", "world", "initial", "gp", "task",
              "task_description"});
  read(doc, "budget", c.budget, "");
  read(doc, "warm_up_rounds", c.warm_up_rounds, "");
  read(doc, "obs_noise_variance", c.obs_noise_variance, "");
  read(doc, "confidence_threshold", c.confidence_threshold, "");
  read(doc, "bald_samples", c.bald_samples, "");
  read(doc, "epsilon_floor", c.epsilon_floor, "");
  read(doc, "proposals_per_round", c.proposals_per_round, "");
  read(doc, "anomaly_payload", c.anomaly_payload, "");
  read(doc, "seed", c.seed, "");
  read(doc, "generator", c.generator, "");
  read(doc, "embedder", c.embedder, "");
  read(doc, "embedding_dimension", c.embedding_dimension, "");
  read(doc, "task", c.task, "");
  read(doc, "task_description", c.task_description, "");
  if (doc.contains("mode")) {
    std::string m;
    read(doc, "mode", m, "");
    c.mode = run_mode_from_string(m);
  }
  if (doc.contains("anomaly")) {
    const auto& a = doc.at("anomaly");
    check_keys(a, "anomaly", {"theta", "count_threshold", "adaptive", "window_rounds", "percentile", "floor"});
    read(a, "theta", c.anomaly.theta, "anomaly");
    read(a, "count_threshold", c.anomaly.count_threshold, "anomaly");
    read(a, "adaptive", c.anomaly.adaptive, "anomaly");
    read(a, "window_rounds", c.anomaly.window_rounds, "anomaly");
    read(a, "percentile", c.anomaly.percentile, "anomaly");
    read(a, "floor", c.anomaly.floor, "anomaly");
  }
  if (doc.contains("llm")) {
    const auto& l = doc.at("llm");
    check_keys(l, "llm", {"endpoint", "path", "model", "temperature", "context_messages", "api_key_env", "max_attempts"});
    read(l, "endpoint", c.llm.endpoint, "llm");
    read(l, "path", c.llm.path, "llm");
    read(l, "model", c.llm.model, "llm");
    read(l, "temperature", c.llm.temperature, "llm");
    read(l, "context_messages", c.llm.context_messages, "llm");
    read(l, "api_key_env", c.llm.api_key_env, "llm");
    read(l, "max_attempts", c.llm.max_attempts, "llm");
  }
  if (doc.contains("embedding_service")) {
    const auto& e = doc.at("embedding_service");
    check_keys(e, "embedding_service", {"endpoint", "path", "model", "api_key_env", "max_attempts"});
    read(e, "endpoint", c.embedding_service.endpoint, "embedding_service");
    read(e, "path", c.embedding_service.path, "embedding_service");
    read(e, "model", c.embedding_service.model, "embedding_service");
    read(e, "api_key_env", c.embedding_service.api_key_env, "embedding_service");
    read(e, "max_attempts", c.embedding_service.max_attempts, "embedding_service");
  }
  if (doc.contains("world")) {
    const auto& w = doc.at("world");
    check_keys(w, "world",
               {"clusters", "hypotheses_per_cluster", "gain", "base", "noise_std", "dimension", "seed", "true_index",
                "failure_outcome", "min_member_alignment", "max_center_dot"});
    read(w, "clusters", c.world.clusters, "world");
    read(w, "hypotheses_per_cluster", c.world.hypotheses_per_cluster, "world");
    read(w, "gain", c.world.gain, "world");
    read(w, "base", c.world.base, "world");
    read(w, "noise_std", c.world.noise_std, "world");
    read(w, "dimension", c.world.dimension, "world");
    read(w, "failure_outcome", c.world.failure_outcome, "world");
    read(w, "min_member_alignment", c.world.min_member_alignment, "world");
    read(w, "max_center_dot", c.world.max_center_dot, "world");
    if (w.contains("seed") && !w.at("seed").is_null()) {
      read(w, "seed", c.world.seed, "world");
      c.world_seed_from_run = false;
    }
    if (w.contains("true_index") && !w.at("true_index").is_null()) {
      int t = 0;
      read(w, "true_index", t, "world");
      c.world.true_index = t;
    }
  }
  if (doc.contains("initial")) {
    const auto& i = doc.at("initial");
    check_keys(i, "initial", {"source", "include_true", "texts"});
    read(i, "source", c.initial.source, "initial");
    read(i, "include_true", c.initial.include_true, "initial");
    read(i, "texts", c.initial.texts, "initial");
  }
  if (doc.contains("gp")) {
    const auto& g = doc.at("gp");
    check_keys(g, "gp", {"grid_points", "grid_low", "grid_high", "full_grid_max_n"});
    read(g, "grid_points", c.gp.grid_points, "gp");
    read(g, "grid_low", c.gp.grid_low, "gp");
    read(g, "grid_high", c.gp.grid_high, "gp");
    read(g, "full_grid_max_n", c.gp.full_grid_max_n, "gp");
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ValidationError("config file '" + path + "' is not valid JSON");
  return run_config_from_json(doc);
}

WorldSpec effective_world_spec(const RunConfig& c) {
  WorldSpec w = c.world;
  if (c.world_seed_from_run) w.seed = derive_seed(c.seed, "world");
  w.dimension = c.world.dimension;
  return w;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string config_hash(const RunConfig& c) { return hex64(fnv1a64(to_json(c).dump())); }

}  // namespace evobo
