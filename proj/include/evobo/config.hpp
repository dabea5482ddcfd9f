#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evobo/anomaly.hpp"
#include "evobo/environment.hpp"
#include "evobo/generation.hpp"
#include "evobo/gp_expert.hpp"
#include "evobo/semantic_space.hpp"

namespace evobo {

// full: IDS selection with augmentation. greedy: "Greedy Only" ablation,
// mixture-mean selection. static: "Static Evolution", no augmentation.
enum class RunMode { full, greedy, static_evolution };

std::string to_string(RunMode mode);
RunMode run_mode_from_string(const std::string& s);

struct InitialPrinciples {
  // "latent": the world's latent library; "texts": explicit statements.
  std::string source = "latent";
  bool include_true = true;
  std::vector<std::string> texts;
};

struct RunConfig {
  int budget = 24;
  int warm_up_rounds = 5;
  ThresholdPolicy anomaly;
  double obs_noise_variance = 0.0025;
  double confidence_threshold = 0.5;
  int bald_samples = 64;
  double epsilon_floor = 1e-9;
  int proposals_per_round = 3;
  int anomaly_payload = 5;  // top records handed to the principle generator
  std::uint64_t seed = 0;
  RunMode mode = RunMode::full;

  std::string generator = "scripted";  // scripted | llm
  ChatConfig llm;
  std::string embedder = "deterministic-hash";  // deterministic-hash | external-service
  std::size_t embedding_dimension = 64;
  ServiceEmbedderConfig embedding_service;

  WorldSpec world;
  bool world_seed_from_run = true;  // world.seed derived from seed when true
  InitialPrinciples initial;
  FitOptions gp;

  std::string task = "Maximize the measured outcome of a synthetic discovery task.";
  std::string task_description =
      "Return {\"hypotheses\": [...]} naming candidate configurations to test next.";
};

// Throws ValidationError naming the offending field.
void validate(const RunConfig& config);

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path);

// World spec with the seed resolved.
WorldSpec effective_world_spec(const RunConfig& config);

std::string hex64(std::uint64_t v);
std::string config_hash(const RunConfig& config);

}  // namespace evobo
