#pragma once

#include <span>
#include <string>
#include <vector>

#include "evobo/beliefs.hpp"
#include "evobo/gp_expert.hpp"

namespace evobo {

struct AnomalyRecord {
  std::string hypothesis_id;
  double score = 0.0;
  double residual = 0.0;
  double predictive_variance = 0.0;
  int round = 0;
};

struct AnomalySet {
  std::vector<AnomalyRecord> records;  // score > threshold, descending
  double threshold_used = 0.0;
  bool triggered = false;
};

// S = 1 - exp(-sqrt(r^2 / (var + obs_noise))), bounded in [0, 1).
double anomaly_score(double y, double mean, double variance, double obs_noise_variance);

// P(S > theta) for a standard-normal residual scaled by the total variance:
// S > theta  <=>  |z| > -ln(1 - theta).
double score_exceedance_probability(double theta);

struct ThresholdPolicy {
  double theta = 0.8;
  int count_threshold = 3;
  bool adaptive = false;
  int window_rounds = 10;
  double percentile = 0.9;
  double floor = 0.5;
};

// Scores every observation under the MAP principle's expert.
std::vector<AnomalyRecord> score_history(std::span<const Observation> history, const GpExpert& map_expert,
                                         const Principle& map_principle, double obs_noise_variance);

// Fixed-threshold detection.
AnomalySet detect(std::span<const Observation> history, const GpExpert& map_expert,
                  const Principle& map_principle, double theta, int count_threshold,
                  double obs_noise_variance);

// Policy-driven detection. The adaptive mode sets theta to the configured
// percentile of scores from the trailing window of rounds before
// current_round, floored.
AnomalySet detect(std::span<const Observation> history, const GpExpert& map_expert,
                  const Principle& map_principle, const ThresholdPolicy& policy,
                  double obs_noise_variance, int current_round);

}  // namespace evobo
