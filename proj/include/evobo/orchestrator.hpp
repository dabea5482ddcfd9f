#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "evobo/anomaly.hpp"
#include "evobo/beliefs.hpp"
#include "evobo/config.hpp"
#include "evobo/environment.hpp"
#include "evobo/generation.hpp"
#include "evobo/ids_selection.hpp"

namespace evobo {

struct RoundTrace {
  int round = 0;
  DirectiveTag principle_directive = DirectiveTag::Silent;
  DirectiveTag hypothesis_directive = DirectiveTag::ExploreHypotheses;
  std::string map_before;  // MAP of the previous posterior, used for anomaly scoring
  AnomalySet anomalies;
  std::optional<Principle> principle_added;
  std::string augmentation_note;  // why nothing was added, when applicable
  BeliefState beliefs;
  std::string map_after;  // MAP of this round's snapshot
  std::vector<std::string> proposed;
  SelectionPhase phase = SelectionPhase::warm_up;
  std::vector<CandidateScore> scores;
  std::string selected;
  std::string selected_text;
  Observation observation;
  std::map<std::string, KernelParams> hyperparameters;  // after the round's refit
};

struct TraceHeader {
  nlohmann::json config;
  std::string config_hash;
  nlohmann::json world_spec;
  std::string world_hash;
  std::vector<Principle> initial_principles;
  double v_star = 0.0;
  std::string best_hypothesis;
  std::string true_principle_id;
  UnitVector true_center;
};

struct Trace {
  TraceHeader header;
  std::vector<RoundTrace> rounds;
  bool truncated = false;
  std::string truncation_note;
  std::vector<std::string> errors;
};

struct DirectivePair {
  DirectiveTag principle_facing = DirectiveTag::Silent;
  DirectiveTag hypothesis_facing = DirectiveTag::ExploreHypotheses;
};

// Principle side: anomalies trigger refine (confident MAP) or discover;
// otherwise diversify during warm-up or when fewer than two principles are
// active, else stay silent. Hypothesis side: exploit once past warm-up
// with a confident MAP, else explore.
DirectivePair guidance_for_round(const BeliefState& beliefs, const AnomalySet& anomalies,
                                 double confidence_threshold, int round, int warm_up_rounds,
                                 std::size_t working_set_size);

struct Backends {
  std::shared_ptr<Generator> generator;
  std::shared_ptr<Embedder> embedder;
};

// Scripted generator plus a world-preseeded memo over the configured embedder.
Backends make_backends(const RunConfig& config, std::shared_ptr<const SyntheticWorld> world);

std::vector<Principle> initial_principles(const RunConfig& config, const SyntheticWorld& world,
                                          Embedder& embedder);

Trace run(const RunConfig& config, const SyntheticWorld& world, const Backends& backends);

// Builds the world and default backends from the config.
Trace run(const RunConfig& config);

// Recomputes every belief snapshot from the trace's own observations and
// principle additions.
struct ReplayReport {
  bool ok = true;
  std::optional<int> first_divergent_round;
  double max_abs_error = 0.0;
  std::vector<std::string> warnings;
  std::string message;
};

ReplayReport replay(const Trace& trace, double tolerance = 1e-12);

}  // namespace evobo
