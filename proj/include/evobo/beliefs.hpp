#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evobo/gp_expert.hpp"
#include "evobo/semantic_space.hpp"

namespace evobo {

enum class PrincipleOrigin { initial, diversify, refine, discover };

std::string to_string(PrincipleOrigin origin);
PrincipleOrigin principle_origin_from_string(const std::string& s);

struct Principle {
  std::string id;
  std::string text;
  UnitVector embedding;
  int created_round = 0;
  PrincipleOrigin origin = PrincipleOrigin::initial;
  double prior_weight = 1.0;  // unnormalized
};

// One executed experiment. Failed runs keep their failure outcome and still
// contribute likelihood terms.
struct Observation {
  std::string hypothesis_id;
  UnitVector embedding;
  double y = 0.0;
  int round = 0;
  bool failed = false;
};

// Working set of principles, in insertion order. Grows monotonically.
class PrincipleRegistry {
 public:
  void add(Principle p);  // ValidationError on duplicate id or empty text
  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  const Principle& at(const std::string& id) const;
  const std::vector<Principle>& principles() const { return principles_; }
  std::size_t size() const { return principles_.size(); }
  bool empty() const { return principles_.empty(); }

  // log p0(P) over the current working set (normalized prior weights).
  std::vector<double> log_prior() const;

 private:
  std::vector<Principle> principles_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct BeliefState {
  int round = 0;
  std::vector<std::string> ids;  // registry order
  std::vector<double> masses;
  std::vector<double> log_masses;  // normalized, log-space
  std::vector<double> log_prior;
  double entropy = 0.0;  // nats

  double mass_of(const std::string& id) const;
  double log_mass_of(const std::string& id) const;
};

std::vector<TrainingPoint> training_set(const Principle& p, std::span<const Observation> history);

// One GP expert per principle, refit on the full history. Hyperparameter
// search warm-starts from each expert's previous parameters.
class ExpertBank {
 public:
  explicit ExpertBank(FitOptions options = {}) : options_(options) {}

  void fit(const Principle& p, std::span<const Observation> history);
  void refit_all(const PrincipleRegistry& registry, std::span<const Observation> history);

  const GpExpert& at(const std::string& principle_id) const;
  bool contains(const std::string& principle_id) const { return experts_.count(principle_id) > 0; }
  const std::map<std::string, GpExpert>& experts() const { return experts_; }

 private:
  FitOptions options_;
  std::map<std::string, GpExpert> experts_;
};

// Full-history posterior: log p(P) = log p0(P) + sum_s log N(y_s; mu, var + noise).
BeliefState update_posterior(const PrincipleRegistry& registry, const ExpertBank& experts,
                             std::span<const Observation> history, double obs_noise_variance,
                             int round = 0);

// Normalizes unnormalized log-masses with a max-shifted log-sum-exp.
BeliefState normalize_log_masses(std::vector<std::string> ids, std::vector<double> log_unnorm,
                                 std::vector<double> log_prior, int round);

// Ties: smallest creation round, then lexicographic id.
std::string map_principle(const BeliefState& beliefs, const PrincipleRegistry& registry);

// Adds the principle, back-fits its expert on the entire history and
// recomputes the posterior from scratch over the augmented set.
BeliefState augment(PrincipleRegistry& registry, ExpertBank& experts, Principle new_principle,
                    std::span<const Observation> history, double obs_noise_variance, int round = 0);

double prior_entropy(const PrincipleRegistry& registry);

double entropy_of(std::span<const double> masses);

}  // namespace evobo
