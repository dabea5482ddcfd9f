#include "evobo/anomaly.hpp"

#include <algorithm>
#include <cmath>

#include "evobo/errors.hpp"

namespace evobo {
namespace {

AnomalySet flag(std::vector<AnomalyRecord> scored, double theta, int count_threshold) {
  if (!(theta > 0.0 && theta < 1.0)) throw ValidationError("anomaly threshold must lie in (0, 1)");
  if (count_threshold < 1) throw ValidationError("anomaly count threshold must be positive");
  AnomalySet out;
  out.threshold_used = theta;
  for (auto& r : scored) {
    if (r.score > theta) out.records.push_back(std::move(r));
  }
  std::sort(out.records.begin(), out.records.end(), [](const AnomalyRecord& a, const AnomalyRecord& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.hypothesis_id < b.hypothesis_id;
  });
  out.triggered = static_cast<int>(out.records.size()) >= count_threshold;
  return out;
}

double percentile_of(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

double anomaly_score(double y, double mean, double variance, double obs_noise_variance) {
  const double total = variance + obs_noise_variance;
  if (!(total > 0.0)) throw ValidationError("anomaly_score: total variance must be positive");
  const double r = y - mean;
  return 1.0 - std::exp(-std::sqrt(r * r / total));
}

double score_exceedance_probability(double theta) {
  const double z = -std::log(1.0 - theta);
  return std::erfc(z / std::sqrt(2.0));
}

std::vector<AnomalyRecord> score_history(std::span<const Observation> history, const GpExpert& map_expert,
                                         const Principle& map_principle, double obs_noise_variance) {
  std::vector<AnomalyRecord> out;
  out.reserve(history.size());
  for (const auto& obs : history) {
    const Prediction p = map_expert.predict(pair_features(obs.embedding, map_principle.embedding));
    out.push_back({obs.hypothesis_id, anomaly_score(obs.y, p.mean, p.variance, obs_noise_variance),
                   obs.y - p.mean, p.variance, obs.round});
  }
  return out;
}

AnomalySet detect(std::span<const Observation> history, const GpExpert& map_expert,
                  const Principle& map_principle, double theta, int count_threshold,
                  double obs_noise_variance) {
  return flag(score_history(history, map_expert, map_principle, obs_noise_variance), theta,
              count_threshold);
}

AnomalySet detect(std::span<const Observation> history, const GpExpert& map_expert,
                  const Principle& map_principle, const ThresholdPolicy& policy,
                  double obs_noise_variance, int current_round) {
  auto scored = score_history(history, map_expert, map_principle, obs_noise_variance);
  double theta = policy.theta;
  if (policy.adaptive) {
    std::vector<double> window;
    for (const auto& r : scored) {
      if (r.round >= current_round - policy.window_rounds) window.push_back(r.score);
    }
    theta = window.empty() ? policy.theta
                           : std::max(policy.floor, percentile_of(std::move(window), policy.percentile));
    theta = std::min(theta, std::nextafter(1.0, 0.0));
  }
  return flag(std::move(scored), theta, policy.count_threshold);
}

}  // namespace evobo
