#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "evobo/anomaly.hpp"
#include "evobo/beliefs.hpp"
#include "evobo/environment.hpp"
#include "evobo/http_client.hpp"

namespace evobo {

enum class DirectiveTag {
  DiversifyPrinciples,
  RefineWithAnomalies,
  DiscoverNewPrinciple,
  Silent,
  ExploitHypotheses,
  ExploreHypotheses,
};

std::string to_string(DirectiveTag tag);
DirectiveTag directive_tag_from_string(const std::string& s);
bool is_principle_facing(DirectiveTag tag);

struct ActivePrinciple {
  std::string id;
  std::string text;
  double mass = 0.0;
  UnitVector embedding;
};

struct AnomalyNote {
  AnomalyRecord record;
  std::string text;
  double y = 0.0;
  UnitVector embedding;
};

struct TestedHypothesis {
  std::string id;
  std::string text;
  double y = 0.0;
};

struct GuidanceDirective {
  DirectiveTag tag = DirectiveTag::Silent;
  int round = 0;
  std::vector<ActivePrinciple> active;
  std::vector<AnomalyNote> anomalies;
  std::optional<ActivePrinciple> map_principle;
  std::vector<TestedHypothesis> tested;
  std::set<std::string> pending_ids;  // proposed but not executed
  std::string task;
  std::string task_description;
  int count = 3;  // hypotheses requested
};

// Renders the prompt for a directive; Silent renders nothing. Throws
// ValidationError when a slot the template needs is missing.
std::optional<std::string> render_template(const GuidanceDirective& directive);

std::string_view template_source(DirectiveTag tag);
std::string_view response_format_instruction();

struct PrincipleProposal {
  std::string text;
  std::optional<UnitVector> embedding;  // backends may supply it directly
  PrincipleOrigin origin = PrincipleOrigin::diversify;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::optional<PrincipleProposal> propose_principle(const GuidanceDirective& directive) = 0;
  // Up to k texts absent from the tested memory; ExhaustionError when none remain.
  virtual std::vector<std::string> propose_hypotheses(const GuidanceDirective& directive, int k) = 0;
  virtual std::string tag() const = 0;
};

// Deterministic proposals drawn from a synthetic world's latent library
// and hypothesis universe.
class ScriptedGenerator final : public Generator {
 public:
  ScriptedGenerator(std::shared_ptr<const SyntheticWorld> world, std::uint64_t seed);

  std::optional<PrincipleProposal> propose_principle(const GuidanceDirective& directive) override;
  std::vector<std::string> propose_hypotheses(const GuidanceDirective& directive, int k) override;
  std::string tag() const override { return "scripted"; }

 private:
  std::shared_ptr<const SyntheticWorld> world_;
  std::uint64_t seed_;
};

struct ChatConfig {
  std::string endpoint;
  std::string path = "/v1/chat/completions";
  std::string model;
  double temperature = 0.6;
  std::size_t context_messages = 10;
  std::string api_key_env = "EVOBO_LLM_API_KEY";
  int max_attempts = 3;  // one call plus two retries
  std::string system_prompt =
      "You are a scientific reasoning agent supporting a sequential discovery loop.";
};

struct ChatMessage {
  std::string role;
  std::string content;
};

// Parses the first fenced ```json block (or a bare JSON object).
std::optional<nlohmann::json> extract_json_block(const std::string& content);

// Chat-completions backend. Keeps the most recent messages as context.
class LlmGenerator final : public Generator {
 public:
  LlmGenerator(ChatConfig config, std::shared_ptr<HttpJsonClient> client);

  std::optional<PrincipleProposal> propose_principle(const GuidanceDirective& directive) override;
  std::vector<std::string> propose_hypotheses(const GuidanceDirective& directive, int k) override;
  std::string tag() const override { return "llm"; }

  const std::deque<ChatMessage>& context() const { return context_; }
  nlohmann::json build_request(const std::string& user_content) const;

 private:
  nlohmann::json exchange(const std::string& prompt, const char* required_field);
  void remember(ChatMessage m);

  ChatConfig config_;
  std::shared_ptr<HttpJsonClient> client_;
  std::deque<ChatMessage> context_;
};

}  // namespace evobo
