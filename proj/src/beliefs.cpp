#include "evobo/beliefs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "evobo/errors.hpp"

namespace evobo {

std::string to_string(PrincipleOrigin origin) {
  switch (origin) {
    case PrincipleOrigin::initial: return "initial";
    case PrincipleOrigin::diversify: return "diversify";
    case PrincipleOrigin::refine: return "refine";
    case PrincipleOrigin::discover: return "discover";
  }
  return "initial";
}

PrincipleOrigin principle_origin_from_string(const std::string& s) {
  if (s == "initial") return PrincipleOrigin::initial;
  if (s == "diversify") return PrincipleOrigin::diversify;
  if (s == "refine") return PrincipleOrigin::refine;
  if (s == "discover") return PrincipleOrigin::discover;
  throw ValidationError("unknown principle origin '" + s + "'");
}

void PrincipleRegistry::add(Principle p) {
  if (p.id.empty()) throw ValidationError("principle id must be nonempty");
  if (p.text.empty()) throw ValidationError("principle text must be nonempty");
  if (!(p.prior_weight > 0.0) || !std::isfinite(p.prior_weight)) {
    throw ValidationError("principle prior weight must be positive");
  }
  if (contains(p.id)) throw ValidationError("duplicate principle id '" + p.id + "'");
  index_.emplace(p.id, principles_.size());
  principles_.push_back(std::move(p));
}

const Principle& PrincipleRegistry::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw ValidationError("unknown principle '" + id + "'");
  return principles_[it->second];
}

std::vector<double> PrincipleRegistry::log_prior() const {
  double total = 0.0;
  for (const auto& p : principles_) total += p.prior_weight;
  std::vector<double> out;
  out.reserve(principles_.size());
  for (const auto& p : principles_) out.push_back(std::log(p.prior_weight / total));
  return out;
}

double BeliefState::mass_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return masses[i];
  }
  throw ValidationError("principle '" + id + "' not in belief state");
}

double BeliefState::log_mass_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return log_masses[i];
  }
  throw ValidationError("principle '" + id + "' not in belief state");
}

std::vector<TrainingPoint> training_set(const Principle& p, std::span<const Observation> history) {
  std::vector<TrainingPoint> out;
  out.reserve(history.size());
  for (const auto& obs : history) out.push_back({pair_features(obs.embedding, p.embedding), obs.y});
  return out;
}

void ExpertBank::fit(const Principle& p, std::span<const Observation> history) {
  FitOptions opts = options_;
  if (auto it = experts_.find(p.id); it != experts_.end() && it->second.size() > 0) {
    opts.warm_start = it->second.params();
  }
  const auto data = training_set(p, history);
  experts_.insert_or_assign(p.id, GpExpert::fit(data, opts));
}

void ExpertBank::refit_all(const PrincipleRegistry& registry, std::span<const Observation> history) {
  for (const auto& p : registry.principles()) fit(p, history);
}

const GpExpert& ExpertBank::at(const std::string& principle_id) const {
  auto it = experts_.find(principle_id);
  if (it == experts_.end()) throw ValidationError("no expert fitted for principle '" + principle_id + "'");
  return it->second;
}

double entropy_of(std::span<const double> masses) {
  double h = 0.0;
  for (double p : masses) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

BeliefState normalize_log_masses(std::vector<std::string> ids, std::vector<double> log_unnorm,
                                 std::vector<double> log_prior, int round) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : log_unnorm) {
    if (std::isnan(v)) throw DegeneratePosteriorError("posterior log-mass is NaN");
    top = std::max(top, v);
  }
  if (!std::isfinite(top)) {
    throw DegeneratePosteriorError("all posterior log-masses are -inf (likelihood underflow)");
  }
  double sum = 0.0;
  for (double v : log_unnorm) sum += std::exp(v - top);
  const double lse = top + std::log(sum);

  BeliefState b;
  b.round = round;
  b.ids = std::move(ids);
  b.log_prior = std::move(log_prior);
  b.log_masses.reserve(log_unnorm.size());
  b.masses.reserve(log_unnorm.size());
  for (double v : log_unnorm) {
    b.log_masses.push_back(v - lse);
    b.masses.push_back(std::exp(v - lse));
  }
  b.entropy = entropy_of(b.masses);
  return b;
}

BeliefState update_posterior(const PrincipleRegistry& registry, const ExpertBank& experts,
                             std::span<const Observation> history, double obs_noise_variance,
                             int round) {
  if (registry.empty()) throw ValidationError("update_posterior: empty working set");
  if (!(obs_noise_variance > 0.0)) throw ValidationError("obs_noise_variance must be positive");
  std::vector<double> log_prior = registry.log_prior();
  std::vector<std::string> ids;
  std::vector<double> log_unnorm;
  ids.reserve(registry.size());
  log_unnorm.reserve(registry.size());
  for (std::size_t i = 0; i < registry.size(); ++i) {
    const Principle& p = registry.principles()[i];
    const GpExpert& expert = experts.at(p.id);
    // Neumaier-compensated sum keeps the total insensitive to history order.
    double sum = log_prior[i];
    double comp = 0.0;
    for (const auto& obs : history) {
      const double term =
          log_likelihood_of(expert, pair_features(obs.embedding, p.embedding), obs.y, obs_noise_variance);
      const double t = sum + term;
      comp += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
      sum = t;
    }
    ids.push_back(p.id);
    log_unnorm.push_back(sum + comp);
  }
  return normalize_log_masses(std::move(ids), std::move(log_unnorm), std::move(log_prior), round);
}

std::string map_principle(const BeliefState& beliefs, const PrincipleRegistry& registry) {
  if (beliefs.ids.empty()) throw ValidationError("map_principle: empty belief state");
  std::size_t best = 0;
  for (std::size_t i = 1; i < beliefs.ids.size(); ++i) {
    const double a = beliefs.log_masses[i];
    const double b = beliefs.log_masses[best];
    if (a > b) {
      best = i;
    } else if (a == b) {
      const Principle& pi = registry.at(beliefs.ids[i]);
      const Principle& pb = registry.at(beliefs.ids[best]);
      if (pi.created_round < pb.created_round ||
          (pi.created_round == pb.created_round && pi.id < pb.id)) {
        best = i;
      }
    }
  }
  return beliefs.ids[best];
}

BeliefState augment(PrincipleRegistry& registry, ExpertBank& experts, Principle new_principle,
                    std::span<const Observation> history, double obs_noise_variance, int round) {
  if (registry.contains(new_principle.id)) {
    throw ValidationError("augment: principle '" + new_principle.id + "' already present");
  }
  const std::string id = new_principle.id;
  registry.add(std::move(new_principle));
  experts.fit(registry.at(id), history);
  return update_posterior(registry, experts, history, obs_noise_variance, round);
}

double prior_entropy(const PrincipleRegistry& registry) {
  if (registry.empty()) throw ValidationError("prior_entropy: empty registry");
  std::vector<double> p;
  for (double lp : registry.log_prior()) p.push_back(std::exp(lp));
  return entropy_of(p);
}

}  // namespace evobo
