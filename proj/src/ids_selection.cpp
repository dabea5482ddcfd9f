#include "evobo/ids_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evobo/errors.hpp"

namespace evobo {

std::string to_string(SelectionPhase phase) {
  return phase == SelectionPhase::warm_up ? "warm-up" : "ids";
}

PredictionTable predict_pool(std::span<const Hypothesis> pool, const PrincipleRegistry& registry,
                             const ExpertBank& experts, const BeliefState& beliefs) {
  PredictionTable t;
  t.principle_ids = beliefs.ids;
  t.rows.reserve(pool.size());
  std::vector<const Principle*> principles;
  std::vector<const GpExpert*> models;
  for (const auto& id : beliefs.ids) {
    principles.push_back(&registry.at(id));
    models.push_back(&experts.at(id));
  }
  for (const auto& h : pool) {
    std::vector<Prediction> row;
    row.reserve(principles.size());
    for (std::size_t j = 0; j < principles.size(); ++j) {
      row.push_back(models[j]->predict(pair_features(h.embedding, principles[j]->embedding)));
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

double expected_regret(std::size_t candidate, const PredictionTable& table, const BeliefState& beliefs) {
  if (table.rows.empty()) throw ValidationError("expected_regret: empty pool");
  if (candidate >= table.rows.size()) throw ValidationError("expected_regret: candidate not in pool");
  const std::size_t np = beliefs.masses.size();
  double best_mix = 0.0;
  for (std::size_t j = 0; j < np; ++j) {
    double vstar = -std::numeric_limits<double>::infinity();
    for (const auto& row : table.rows) vstar = std::max(vstar, row[j].mean);
    best_mix += beliefs.masses[j] * vstar;
  }
  double mix = 0.0;
  for (std::size_t j = 0; j < np; ++j) mix += beliefs.masses[j] * table.rows[candidate][j].mean;
  return std::max(best_mix - mix, 0.0);
}

double info_gain_bald_raw(std::span<const Prediction> per_principle, const BeliefState& beliefs,
                          double obs_noise_variance, int samples, Engine& rng) {
  if (samples < 1) throw ValidationError("BALD needs at least one sample");
  const std::size_t np = beliefs.masses.size();
  if (per_principle.size() != np) throw ValidationError("BALD: prediction/belief size mismatch");
  const double h0 = beliefs.entropy;

  std::vector<double> total_var(np);
  std::vector<double> cdf(np);
  double acc = 0.0;
  for (std::size_t j = 0; j < np; ++j) {
    total_var[j] = per_principle[j].variance + obs_noise_variance;
    acc += beliefs.masses[j];
    cdf[j] = acc;
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> n01;
  std::vector<double> logw(np);
  double mean_h = 0.0;
  for (int m = 0; m < samples; ++m) {
    const double u = unif(rng) * acc;
    std::size_t k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    k = std::min(k, np - 1);
    const double y = per_principle[k].mean + std::sqrt(total_var[k]) * n01(rng);

    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < np; ++j) {
      logw[j] = beliefs.log_masses[j] + normal_log_density(y, per_principle[j].mean, total_var[j]);
      top = std::max(top, logw[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < np; ++j) z += std::exp(logw[j] - top);
    const double lz = top + std::log(z);
    double h = 0.0;
    for (std::size_t j = 0; j < np; ++j) {
      const double lp = logw[j] - lz;
      if (std::isfinite(lp)) h -= std::exp(lp) * lp;
    }
    mean_h += (std::max(h, 0.0) - mean_h) / static_cast<double>(m + 1);
  }
  return h0 - mean_h;
}

double info_gain_bald(std::span<const Prediction> per_principle, const BeliefState& beliefs,
                      double obs_noise_variance, int samples, Engine& rng) {
  return std::max(info_gain_bald_raw(per_principle, beliefs, obs_noise_variance, samples, rng), 0.0);
}

Engine bald_stream(std::uint64_t seed, int round, const std::string& hypothesis_id) {
  return Engine(derive_seed(seed, "bald", static_cast<std::uint64_t>(round), fnv1a64(hypothesis_id)));
}

Selection select_from_table(std::span<const Hypothesis> pool, const PredictionTable& table,
                            const BeliefState& beliefs, SelectionPhase phase, const SelectionConfig& config) {
  if (pool.empty()) throw ValidationError("select: empty candidate pool");
  Selection out;
  out.scores.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    CandidateScore s;
    s.hypothesis_id = pool[i].id;
    s.per_principle = table.rows[i];
    for (std::size_t j = 0; j < beliefs.masses.size(); ++j) {
      s.mixture_mean += beliefs.masses[j] * s.per_principle[j].mean;
      s.variance_sum += s.per_principle[j].variance;
    }
    s.regret = expected_regret(i, table, beliefs);
    Engine rng = bald_stream(config.seed, config.round, pool[i].id);
    s.info_gain = info_gain_bald(s.per_principle, beliefs, config.obs_noise_variance, config.samples, rng);
    s.ratio = s.regret * s.regret / (s.info_gain + config.epsilon_floor);
    out.scores.push_back(std::move(s));
  }

  // Primary key per rule; ties go to the lexicographically smallest id.
  const auto key = [&](const CandidateScore& s) {
    if (phase == SelectionPhase::warm_up) return -s.variance_sum;
    if (config.rule == SelectionRule::greedy) return -s.mixture_mean;
    return s.ratio;
  };
  const CandidateScore* best = &out.scores.front();
  for (const auto& s : out.scores) {
    const double a = key(s);
    const double b = key(*best);
    if (a < b || (a == b && s.hypothesis_id < best->hypothesis_id)) best = &s;
  }
  out.hypothesis_id = best->hypothesis_id;
  return out;
}

Selection select(std::span<const Hypothesis> pool, const PrincipleRegistry& registry,
                 const ExpertBank& experts, const BeliefState& beliefs, SelectionPhase phase,
                 const SelectionConfig& config) {
  if (pool.empty()) throw ValidationError("select: empty candidate pool");
  return select_from_table(pool, predict_pool(pool, registry, experts, beliefs), beliefs, phase, config);
}

}  // namespace evobo
