#include "evobo/environment.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "evobo/errors.hpp"
#include "evobo/random.hpp"

namespace evobo {
namespace {

constexpr int kMaxCenterAttempts = 10000;

std::vector<double> gaussian_vector(Engine& rng, std::size_t d) {
  std::normal_distribution<double> n01;
  std::vector<double> v(d);
  for (double& x : v) x = n01(rng);
  return v;
}

std::string padded(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

nlohmann::json vec_json(const UnitVector& v) {
  return std::vector<double>(v.values().begin(), v.values().end());
}

}  // namespace

double reward_shape(double alignment) {
  const double h = 0.5 * (alignment + 1.0);
  return h * h;
}

SyntheticWorld build_world(const WorldSpec& spec) {
  if (spec.clusters < 2) throw ValidationError("world needs at least 2 clusters");
  if (spec.hypotheses_per_cluster < 1) throw ValidationError("world needs at least 1 hypothesis per cluster");
  if (!(spec.noise_std >= 0.0)) throw ValidationError("noise_std must be non-negative");
  if (spec.dimension < 3) throw ValidationError("world dimension must be at least 3");
  const std::size_t total =
      static_cast<std::size_t>(spec.clusters) * static_cast<std::size_t>(spec.hypotheses_per_cluster);
  if (total > 10000) throw ValidationError("hypothesis universe limited to 10000 entries");
  if (spec.true_index && (*spec.true_index < 0 || *spec.true_index >= spec.clusters)) {
    throw ValidationError("true_index out of range");
  }

  SyntheticWorld w;
  w.spec_ = spec;
  Engine rng(derive_seed(spec.seed, "world"));

  for (int c = 0; c < spec.clusters; ++c) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxCenterAttempts && !placed; ++attempt) {
      UnitVector cand = UnitVector::normalized(gaussian_vector(rng, spec.dimension));
      bool separated = true;
      for (const auto& other : w.latent_) {
        if (std::abs(cand.dot(other.center)) > spec.max_center_dot) {
          separated = false;
          break;
        }
      }
      if (separated) {
        const auto idx = static_cast<std::size_t>(c);
        w.latent_.push_back({padded("L", idx, 2),
                             "Mechanism " + std::to_string(c) +
                                 ": outcomes are governed by alignment with latent factor " +
                                 std::to_string(c) + ".",
                             std::move(cand)});
        placed = true;
      }
    }
    if (!placed) {
      throw NumericalError("could not place cluster center " + std::to_string(c) +
                           " with pairwise |dot| <= " + std::to_string(spec.max_center_dot));
    }
  }

  w.true_index_ = spec.true_index ? *spec.true_index
                                  : static_cast<int>(rng() % static_cast<std::uint64_t>(spec.clusters));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lo = spec.min_member_alignment;
  w.universe_.reserve(total);
  for (int c = 0; c < spec.clusters; ++c) {
    const UnitVector& center = w.latent_[static_cast<std::size_t>(c)].center;
    for (int k = 0; k < spec.hypotheses_per_cluster; ++k) {
      // e = a*c + sqrt(1 - a^2)*u with u a unit vector orthogonal to c.
      const double a = lo + (1.0 - lo) * unit(rng);
      std::vector<double> u = gaussian_vector(rng, spec.dimension);
      double proj = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) proj += u[i] * center[i];
      for (std::size_t i = 0; i < u.size(); ++i) u[i] -= proj * center[i];
      const UnitVector ortho = UnitVector::normalized(std::move(u));
      std::vector<double> e(spec.dimension);
      const double b = std::sqrt(std::max(0.0, 1.0 - a * a));
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = a * center[i] + b * ortho[i];

      const std::size_t idx = w.universe_.size();
      WorldHypothesis wh;
      wh.hypothesis.id = padded("h-", idx, 4);
      wh.hypothesis.text = "Candidate configuration #" + padded("", idx, 4);
      wh.hypothesis.embedding = UnitVector::normalized(std::move(e));
      wh.cluster = c;
      w.universe_.push_back(std::move(wh));
    }
  }
  w.index();
  return w;
}

void SyntheticWorld::index() {
  by_id_.clear();
  by_text_.clear();
  for (std::size_t i = 0; i < universe_.size(); ++i) {
    by_id_.emplace(universe_[i].hypothesis.id, i);
    by_text_.emplace(universe_[i].hypothesis.text, i);
  }
}

const WorldHypothesis* SyntheticWorld::find(const std::string& hypothesis_id) const {
  auto it = by_id_.find(hypothesis_id);
  return it == by_id_.end() ? nullptr : &universe_[it->second];
}

const WorldHypothesis* SyntheticWorld::find_by_text(const std::string& text) const {
  auto it = by_text_.find(text);
  return it == by_text_.end() ? nullptr : &universe_[it->second];
}

double SyntheticWorld::noiseless_reward(const UnitVector& hypothesis_embedding) const {
  return spec_.base + spec_.gain * reward_shape(hypothesis_embedding.dot(true_principle().center));
}

double NoiseStream::next(const std::string& hypothesis_id) {
  const std::uint64_t n = counts_[hypothesis_id]++;
  return CounterNormal(key_ ^ fnv1a64(hypothesis_id)).normal(n);
}

EvalResult evaluate(const SyntheticWorld& world, const std::string& hypothesis_id,
                    NoiseStream& noise) {
  const WorldHypothesis* wh = world.find(hypothesis_id);
  if (!wh) return {world.spec().failure_outcome, true};
  const double eps = world.spec().noise_std * noise.next(hypothesis_id);
  return {world.noiseless_reward(wh->hypothesis.embedding) + eps, false};
}

BestHypothesis true_best(const SyntheticWorld& world) {
  BestHypothesis best{"", -std::numeric_limits<double>::infinity()};
  for (const auto& wh : world.universe()) {
    const double r = world.noiseless_reward(wh.hypothesis.embedding);
    if (r > best.value) best = {wh.hypothesis.id, r};
  }
  return best;
}

namespace {

nlohmann::json spec_json(const WorldSpec& w) {
  nlohmann::json spec = {{"clusters", w.clusters},
                         {"hypotheses_per_cluster", w.hypotheses_per_cluster},
                         {"gain", w.gain},
                         {"base", w.base},
                         {"noise_std", w.noise_std},
                         {"dimension", w.dimension},
                         {"seed", w.seed},
                         {"failure_outcome", w.failure_outcome},
                         {"min_member_alignment", w.min_member_alignment},
                         {"max_center_dot", w.max_center_dot}};
  if (w.true_index) spec["true_index"] = *w.true_index;
  return spec;
}

}  // namespace

nlohmann::json SyntheticWorld::to_json() const {
  const nlohmann::json spec = spec_json(spec_);
  nlohmann::json latent = nlohmann::json::array();
  for (const auto& l : latent_) {
    latent.push_back({{"id", l.id}, {"text", l.text}, {"center", vec_json(l.center)}});
  }
  nlohmann::json universe = nlohmann::json::array();
  for (const auto& wh : universe_) {
    universe.push_back({{"id", wh.hypothesis.id},
                        {"text", wh.hypothesis.text},
                        {"cluster", wh.cluster},
                        {"embedding", vec_json(wh.hypothesis.embedding)}});
  }
  return {{"format", "evobo.world/1"},
          {"spec", spec},
          {"true_index", true_index_},
          {"reward_law", "base + gain * ((dot(e_h, center[true_index]) + 1) / 2)^2 + N(0, noise_std^2)"},
          {"latent", latent},
          {"universe", universe}};
}

SyntheticWorld SyntheticWorld::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "evobo.world/1") {
      throw ValidationError("unsupported world format");
    }
    const auto& s = doc.at("spec");
    SyntheticWorld w;
    w.spec_.clusters = s.at("clusters").get<int>();
    w.spec_.hypotheses_per_cluster = s.at("hypotheses_per_cluster").get<int>();
    w.spec_.gain = s.at("gain").get<double>();
    w.spec_.base = s.at("base").get<double>();
    w.spec_.noise_std = s.at("noise_std").get<double>();
    w.spec_.dimension = s.at("dimension").get<std::size_t>();
    w.spec_.seed = s.at("seed").get<std::uint64_t>();
    w.spec_.failure_outcome = s.value("failure_outcome", 0.0);
    w.spec_.min_member_alignment = s.value("min_member_alignment", 0.8);
    w.spec_.max_center_dot = s.value("max_center_dot", 0.3);
    if (s.contains("true_index")) w.spec_.true_index = s.at("true_index").get<int>();
    w.true_index_ = doc.at("true_index").get<int>();
    for (const auto& l : doc.at("latent")) {
      w.latent_.push_back({l.at("id").get<std::string>(), l.at("text").get<std::string>(),
                           UnitVector::checked(l.at("center").get<std::vector<double>>())});
    }
    for (const auto& h : doc.at("universe")) {
      WorldHypothesis wh;
      wh.hypothesis.id = h.at("id").get<std::string>();
      wh.hypothesis.text = h.at("text").get<std::string>();
      wh.hypothesis.embedding = UnitVector::checked(h.at("embedding").get<std::vector<double>>());
      wh.cluster = h.at("cluster").get<int>();
      w.universe_.push_back(std::move(wh));
    }
    if (w.true_index_ < 0 || w.true_index_ >= static_cast<int>(w.latent_.size())) {
      throw ValidationError("world true_index out of range");
    }
    w.index();
    return w;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed world document: ") + e.what());
  }
}

// Streams raw bytes instead of dumping JSON; large universes made the dump slow.
std::uint64_t SyntheticWorld::content_hash() const {
  const nlohmann::json head = {{"format", "evobo.world/1"}, {"spec", spec_json(spec_)}, {"true_index", true_index_}};
  std::uint64_t h = fnv1a64(head.dump());
  const auto mix_str = [&](const std::string& s) {
    h = fnv1a64(s, h);
    h = fnv1a64(std::string_view("\0", 1), h);
  };
  const auto mix_vec = [&](const UnitVector& v) {
    const auto vals = v.values();
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(vals.data()), vals.size() * sizeof(double)), h);
  };
  for (const auto& l : latent_) {
    mix_str(l.id);
    mix_str(l.text);
    mix_vec(l.center);
  }
  for (const auto& wh : universe_) {
    mix_str(wh.hypothesis.id);
    mix_str(wh.hypothesis.text);
    mix_str(std::to_string(wh.cluster));
    mix_vec(wh.hypothesis.embedding);
  }
  return h;
}

}  // namespace evobo
