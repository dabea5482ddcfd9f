#include "evobo/semantic_space.hpp"

#include <algorithm>
#include <cmath>

#include "evobo/errors.hpp"
#include "evobo/random.hpp"

namespace evobo {

UnitVector UnitVector::normalized(std::vector<double> raw) {
  if (raw.size() < 2) throw ValidationError("embedding dimension must be at least 2");
  double sq = 0.0;
  for (double x : raw) {
    if (!std::isfinite(x)) throw ValidationError("embedding has non-finite entries");
    sq += x * x;
  }
  if (!(sq > 0.0)) throw ValidationError("embedding has zero norm");
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : raw) x *= inv;
  return UnitVector(std::move(raw));
}

UnitVector UnitVector::checked(std::vector<double> unit) {
  if (unit.size() < 2) throw ValidationError("embedding dimension must be at least 2");
  double sq = 0.0;
  for (double x : unit) {
    if (!std::isfinite(x)) throw ValidationError("embedding has non-finite entries");
    sq += x * x;
  }
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-9) throw ValidationError("embedding is not unit-norm");
  return UnitVector(std::move(unit));
}

double UnitVector::dot(const UnitVector& other) const {
  if (other.dim() != dim()) throw ValidationError("embedding dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) s += values_[i] * other.values_[i];
  return s;
}

PairFeature pair_features(const UnitVector& hypothesis, const UnitVector& principle) {
  if (hypothesis.dim() != principle.dim()) {
    throw ValidationError("pair_features: dimension mismatch (" + std::to_string(hypothesis.dim()) +
                          " vs " + std::to_string(principle.dim()) + ")");
  }
  double dot = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < hypothesis.dim(); ++i) {
    dot += hypothesis[i] * principle[i];
    const double d = hypothesis[i] - principle[i];
    sq += d * d;
  }
  return {std::clamp(dot, -1.0, 1.0), std::min(std::sqrt(sq), 2.0)};
}

HashEmbedder::HashEmbedder(std::uint64_t seed, std::size_t dimension)
    : seed_(seed), dimension_(dimension) {
  if (dimension < 2) throw ValidationError("embedding dimension must be at least 2");
}

UnitVector HashEmbedder::embed(const std::string& text) {
  if (text.empty()) throw ValidationError("cannot embed empty text");
  const CounterNormal stream(fnv1a64(text) ^ seed_);
  std::vector<double> v(dimension_);
  for (std::size_t i = 0; i < dimension_; ++i) v[i] = stream.normal(i);
  return UnitVector::normalized(std::move(v));
}

ServiceEmbedder::ServiceEmbedder(ServiceEmbedderConfig config,
                                 std::shared_ptr<HttpJsonClient> client)
    : config_(std::move(config)), client_(std::move(client)) {}

UnitVector ServiceEmbedder::embed(const std::string& text) {
  if (text.empty()) throw ValidationError("cannot embed empty text");
  const nlohmann::json request = {{"model", config_.model}, {"input", {text}}};
  std::map<std::string, std::string> headers;
  if (auto key = api_key_from_env(config_.api_key_env); !key.empty()) {
    headers["Authorization"] = "Bearer " + key;
  }

  std::string last_error = "no attempt made";
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    try {
      const HttpResponse resp = client_->post(config_.endpoint, config_.path, request, headers);
      if (resp.status != 200) {
        last_error = "embedding service returned HTTP " + std::to_string(resp.status);
        continue;
      }
      const auto& data = resp.body.at("data");
      if (!data.is_array() || data.empty()) {
        last_error = "embedding response has no data";
        continue;
      }
      auto raw = data.at(0).at("embedding").get<std::vector<double>>();
      // A zero vector is an upstream failure, not data; do not retry it.
      return UnitVector::normalized(std::move(raw));
    } catch (const TransportError& e) {
      last_error = e.what();
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("malformed embedding response: ") + e.what();
    }
  }
  throw TransportError(last_error, config_.max_attempts);
}

MemoEmbedder::MemoEmbedder(std::shared_ptr<Embedder> fallback) : fallback_(std::move(fallback)) {}

void MemoEmbedder::preseed(const std::string& text, UnitVector v) {
  std::lock_guard lock(mu_);
  memo_.insert_or_assign(text, std::move(v));
}

UnitVector MemoEmbedder::embed(const std::string& text) {
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(text); it != memo_.end()) return it->second;
  }
  UnitVector v = fallback_->embed(text);
  std::lock_guard lock(mu_);
  return memo_.emplace(text, std::move(v)).first->second;
}

}  // namespace evobo
