#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "evobo/hypothesis.hpp"
#include "evobo/semantic_space.hpp"

namespace evobo {

struct WorldSpec {
  int clusters = 5;
  int hypotheses_per_cluster = 40;
  double gain = 4.0;
  double base = 0.0;
  double noise_std = 0.05;
  std::size_t dimension = 64;
  std::uint64_t seed = 0;
  std::optional<int> true_index;  // drawn from the seed when absent
  double failure_outcome = 0.0;
  double min_member_alignment = 0.8;
  double max_center_dot = 0.1;  // bound on |dot| between cluster centers

  friend bool operator==(const WorldSpec&, const WorldSpec&) = default;
};

struct LatentPrinciple {
  std::string id;
  std::string text;
  UnitVector center;
};

struct WorldHypothesis {
  Hypothesis hypothesis;
  int cluster = 0;
};

struct EvalResult {
  double y = 0.0;
  bool failed = false;
};

// Reward shaping s(u) = ((u + 1) / 2)^2: monotone on [-1, 1], range [0, 1].
double reward_shape(double alignment);

// Synthetic discovery world. Immutable after construction.
class SyntheticWorld {
 public:
  const WorldSpec& spec() const { return spec_; }
  const std::vector<LatentPrinciple>& latent() const { return latent_; }
  const std::vector<WorldHypothesis>& universe() const { return universe_; }
  int true_index() const { return true_index_; }
  const LatentPrinciple& true_principle() const { return latent_[static_cast<std::size_t>(true_index_)]; }

  const WorldHypothesis* find(const std::string& hypothesis_id) const;
  const WorldHypothesis* find_by_text(const std::string& text) const;

  // Reward law without noise.
  double noiseless_reward(const UnitVector& hypothesis_embedding) const;

  nlohmann::json to_json() const;
  static SyntheticWorld from_json(const nlohmann::json& doc);
  std::uint64_t content_hash() const;

 private:
  friend SyntheticWorld build_world(const WorldSpec& spec);

  void index();

  WorldSpec spec_;
  int true_index_ = 0;
  std::vector<LatentPrinciple> latent_;
  std::vector<WorldHypothesis> universe_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::unordered_map<std::string, std::size_t> by_text_;
};

// Deterministic in (spec, seed). Throws ValidationError on a bad spec and
// NumericalError when cluster separation cannot be met.
SyntheticWorld build_world(const WorldSpec& spec);

// Environment noise. The n-th evaluation of a given hypothesis always draws
// the same value for a given key, independent of evaluation order.
class NoiseStream {
 public:
  explicit NoiseStream(std::uint64_t key) : key_(key) {}
  double next(const std::string& hypothesis_id);

 private:
  std::uint64_t key_;
  std::unordered_map<std::string, std::uint64_t> counts_;
};

EvalResult evaluate(const SyntheticWorld& world, const std::string& hypothesis_id,
                    NoiseStream& noise);

struct BestHypothesis {
  std::string hypothesis_id;
  double value = 0.0;
};

BestHypothesis true_best(const SyntheticWorld& world);

}  // namespace evobo
