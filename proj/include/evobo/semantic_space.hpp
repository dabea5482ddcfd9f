#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "evobo/http_client.hpp"

namespace evobo {

// Unit-norm embedding. Construction normalizes and rejects zero or
// non-finite input, so every live instance satisfies |v| = 1.
class UnitVector {
 public:
  UnitVector() = default;

  static UnitVector normalized(std::vector<double> raw);
  // Accepts a vector that is already unit-norm (within 1e-9) without
  // rescaling it, so serialized vectors round-trip bit-exactly.
  static UnitVector checked(std::vector<double> unit);

  std::size_t dim() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  double dot(const UnitVector& other) const;

  friend bool operator==(const UnitVector&, const UnitVector&) = default;

 private:
  explicit UnitVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

// phi(h, P) = [e_h . e_P, |e_h - e_P|].
struct PairFeature {
  double dot = 0.0;
  double distance = 0.0;
};

PairFeature pair_features(const UnitVector& hypothesis, const UnitVector& principle);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual UnitVector embed(const std::string& text) = 0;
  virtual std::string tag() const = 0;
};

// Pure function of (text, seed, dimension): FNV-1a of the text xored with
// the seed keys a counter-based normal stream; d draws, normalized.
class HashEmbedder final : public Embedder {
 public:
  explicit HashEmbedder(std::uint64_t seed = 0, std::size_t dimension = 64);

  UnitVector embed(const std::string& text) override;
  std::string tag() const override { return "deterministic-hash"; }
  std::size_t dimension() const { return dimension_; }

 private:
  std::uint64_t seed_;
  std::size_t dimension_;
};

struct ServiceEmbedderConfig {
  std::string endpoint;  // e.g. https://api.openai.com
  std::string path = "/v1/embeddings";
  std::string model;
  std::string api_key_env = "EVOBO_EMBEDDING_API_KEY";
  int max_attempts = 3;
};

// HTTP embeddings protocol: {model, input:[text]} -> {data:[{embedding:[..]}]}.
class ServiceEmbedder final : public Embedder {
 public:
  ServiceEmbedder(ServiceEmbedderConfig config, std::shared_ptr<HttpJsonClient> client);

  UnitVector embed(const std::string& text) override;
  std::string tag() const override { return "external-service"; }

 private:
  ServiceEmbedderConfig config_;
  std::shared_ptr<HttpJsonClient> client_;
};

// Per-run memo table. Entries may be preseeded (world vectors) so that
// texts owned by a synthetic world resolve to its construction vectors.
class MemoEmbedder final : public Embedder {
 public:
  explicit MemoEmbedder(std::shared_ptr<Embedder> fallback);

  void preseed(const std::string& text, UnitVector v);
  UnitVector embed(const std::string& text) override;
  std::string tag() const override { return fallback_->tag(); }

 private:
  std::shared_ptr<Embedder> fallback_;
  std::mutex mu_;
  std::unordered_map<std::string, UnitVector> memo_;
};

}  // namespace evobo
