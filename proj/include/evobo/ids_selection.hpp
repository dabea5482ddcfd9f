#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evobo/beliefs.hpp"
#include "evobo/hypothesis.hpp"
#include "evobo/random.hpp"

namespace evobo {

enum class SelectionPhase { warm_up, ids };

inline SelectionPhase phase_for_round(int round, int warm_up_rounds) {
  return round < warm_up_rounds ? SelectionPhase::warm_up : SelectionPhase::ids;
}

// How the post-warm-up choice is made. greedy is the "Greedy Only" ablation:
// argmax of the posterior-mixture mean with no information term.
enum class SelectionRule { ids, greedy };

std::string to_string(SelectionPhase phase);

// Per-principle predictive moments for every pool member, aligned with
// beliefs.ids (columns) and the pool order (rows).
struct PredictionTable {
  std::vector<std::string> principle_ids;
  std::vector<std::vector<Prediction>> rows;
};

PredictionTable predict_pool(std::span<const Hypothesis> pool, const PrincipleRegistry& registry,
                             const ExpertBank& experts, const BeliefState& beliefs);

struct CandidateScore {
  std::string hypothesis_id;
  double regret = 0.0;     // Delta, clamped >= 0
  double info_gain = 0.0;  // I, clamped >= 0
  double ratio = 0.0;      // Psi = Delta^2 / (I + eps)
  double mixture_mean = 0.0;
  double variance_sum = 0.0;  // unweighted sum of predictive variances
  std::vector<Prediction> per_principle;
};

struct SelectionConfig {
  double obs_noise_variance = 0.0025;
  int samples = 64;  // M
  double epsilon_floor = 1e-9;
  std::uint64_t seed = 0;
  int round = 0;
  SelectionRule rule = SelectionRule::ids;
};

struct Selection {
  std::string hypothesis_id;
  std::vector<CandidateScore> scores;  // pool order
};

// Delta(h) = sum_P p(P) v*(P) - sum_P p(P) mu_P(h), with v*(P) the max
// predictive mean over the pool. Negative values clamp to zero.
double expected_regret(std::size_t candidate, const PredictionTable& table, const BeliefState& beliefs);

// BALD Monte-Carlo estimate of the expected entropy drop from one
// observation of the candidate; returned unclamped.
double info_gain_bald_raw(std::span<const Prediction> per_principle, const BeliefState& beliefs,
                          double obs_noise_variance, int samples, Engine& rng);

double info_gain_bald(std::span<const Prediction> per_principle, const BeliefState& beliefs,
                      double obs_noise_variance, int samples, Engine& rng);

// Independent per-candidate BALD stream: (run seed, round, candidate id).
Engine bald_stream(std::uint64_t seed, int round, const std::string& hypothesis_id);

Selection select(std::span<const Hypothesis> pool, const PrincipleRegistry& registry,
                 const ExpertBank& experts, const BeliefState& beliefs, SelectionPhase phase,
                 const SelectionConfig& config);

// Scores a pool from a precomputed prediction table.
Selection select_from_table(std::span<const Hypothesis> pool, const PredictionTable& table,
                            const BeliefState& beliefs, SelectionPhase phase, const SelectionConfig& config);

}  // namespace evobo
