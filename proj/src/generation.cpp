#include "evobo/generation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <unordered_set>

#include "evobo/errors.hpp"
#include "evobo/random.hpp"

namespace evobo {

namespace prompts {
extern const char k_prompt_diversify[];
extern const char k_prompt_refine[];
extern const char k_prompt_discover[];
extern const char k_prompt_exploit[];
extern const char k_prompt_explore[];
extern const char k_prompt_response_format[];
}  // namespace prompts

namespace {

constexpr std::array<std::pair<DirectiveTag, const char*>, 6> kTagNames{{
    {DirectiveTag::DiversifyPrinciples, "DiversifyPrinciples"},
    {DirectiveTag::RefineWithAnomalies, "RefineWithAnomalies"},
    {DirectiveTag::DiscoverNewPrinciple, "DiscoverNewPrinciple"},
    {DirectiveTag::Silent, "Silent"},
    {DirectiveTag::ExploitHypotheses, "ExploitHypotheses"},
    {DirectiveTag::ExploreHypotheses, "ExploreHypotheses"},
}};

std::string fmt_num(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string format_principles(const std::vector<ActivePrinciple>& active) {
  std::string out;
  for (const auto& p : active) {
    out += "- [" + p.id + "] (belief " + fmt_num(p.mass, "%.3f") + ") " + p.text + "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string format_anomalies(const std::vector<AnomalyNote>& notes) {
  std::string out;
  for (const auto& a : notes) {
    out += "- " + a.record.hypothesis_id + " \"" + a.text + "\": outcome " + fmt_num(a.y) +
           ", residual " + fmt_num(a.record.residual, "%+.4g") + ", surprisal " +
           fmt_num(a.record.score, "%.3f") + " (round " + std::to_string(a.record.round) + ")\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string format_tested(const std::vector<TestedHypothesis>& tested) {
  if (tested.empty()) return "(none)";
  std::string out;
  for (const auto& t : tested) out += "- " + t.text + " (outcome " + fmt_num(t.y) + ")\n";
  out.pop_back();
  return out;
}

const char* count_word(int k) {
  static constexpr std::array<const char*, 11> words{"zero", "one", "two",   "three", "four", "five",
                                                     "six",  "seven", "eight", "nine",  "ten"};
  return k >= 0 && k <= 10 ? words[static_cast<std::size_t>(k)] : nullptr;
}

std::string labels(int k) {
  std::string out;
  for (int i = 0; i < k; ++i) {
    if (i) out += ", ";
    out += static_cast<char>('A' + (i % 26));
  }
  return out;
}

// Replaces {name} slots; an unknown slot name is a validation error.
std::string substitute(std::string_view tpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(tpl.size() + 256);
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] == '{') {
      const std::size_t close = tpl.find('}', i);
      if (close != std::string_view::npos) {
        const std::string name(tpl.substr(i + 1, close - i - 1));
        auto it = slots.find(name);
        if (it == slots.end()) throw ValidationError("template slot '" + name + "' has no value");
        out += it->second;
        i = close + 1;
        continue;
      }
    }
    out += tpl[i++];
  }
  return out;
}

void require(bool cond, DirectiveTag tag, const char* what) {
  if (!cond) throw ValidationError(to_string(tag) + " directive is missing " + what);
}

std::vector<double> mean_embedding(const std::vector<AnomalyNote>& notes) {
  std::vector<double> m;
  for (const auto& a : notes) {
    if (a.embedding.dim() == 0) continue;
    if (m.empty()) m.assign(a.embedding.dim(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += a.embedding[i];
  }
  return m;
}

std::string anomaly_ids(const std::vector<AnomalyNote>& notes) {
  std::vector<std::string> ids;
  for (const auto& a : notes) ids.push_back(a.record.hypothesis_id);
  std::sort(ids.begin(), ids.end());
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

}  // namespace

std::string to_string(DirectiveTag tag) {
  for (const auto& [t, name] : kTagNames) {
    if (t == tag) return name;
  }
  return "Silent";
}

DirectiveTag directive_tag_from_string(const std::string& s) {
  for (const auto& [t, name] : kTagNames) {
    if (s == name) return t;
  }
  throw ValidationError("unknown directive tag '" + s + "'");
}

bool is_principle_facing(DirectiveTag tag) {
  return tag != DirectiveTag::ExploitHypotheses && tag != DirectiveTag::ExploreHypotheses;
}

std::string_view template_source(DirectiveTag tag) {
  switch (tag) {
    case DirectiveTag::DiversifyPrinciples: return prompts::k_prompt_diversify;
    case DirectiveTag::RefineWithAnomalies: return prompts::k_prompt_refine;
    case DirectiveTag::DiscoverNewPrinciple: return prompts::k_prompt_discover;
    case DirectiveTag::ExploitHypotheses: return prompts::k_prompt_exploit;
    case DirectiveTag::ExploreHypotheses: return prompts::k_prompt_explore;
    case DirectiveTag::Silent: return {};
  }
  return {};
}

std::string_view response_format_instruction() { return prompts::k_prompt_response_format; }

std::optional<std::string> render_template(const GuidanceDirective& d) {
  std::map<std::string, std::string> slots;
  switch (d.tag) {
    case DirectiveTag::Silent:
      return std::nullopt;
    case DirectiveTag::DiversifyPrinciples:
      require(!d.active.empty(), d.tag, "active principles");
      slots["active_principles"] = format_principles(d.active);
      break;
    case DirectiveTag::RefineWithAnomalies:
      require(!d.anomalies.empty(), d.tag, "anomalies");
      require(d.map_principle.has_value(), d.tag, "the top principle");
      require(!d.active.empty(), d.tag, "active principles");
      slots["top_principle_text"] = d.map_principle->text;
      slots["anomalies"] = format_anomalies(d.anomalies);
      slots["active_principles"] = format_principles(d.active);
      break;
    case DirectiveTag::DiscoverNewPrinciple:
      require(!d.anomalies.empty(), d.tag, "anomalies");
      require(!d.active.empty(), d.tag, "active principles");
      slots["anomalies"] = format_anomalies(d.anomalies);
      slots["active_principles"] = format_principles(d.active);
      break;
    case DirectiveTag::ExploitHypotheses:
      require(!d.task.empty(), d.tag, "the task context");
      require(d.map_principle.has_value(), d.tag, "the top principle");
      slots["task"] = d.task;
      slots["tested_candidates"] = format_tested(d.tested);
      slots["top_principle_text"] = d.map_principle->text;
      require(d.count >= 1, d.tag, "a positive hypothesis count");
      slots["count_word"] = count_word(d.count) ? count_word(d.count) : std::to_string(d.count);
      slots["count"] = std::to_string(d.count);
      slots["labels"] = labels(d.count);
      break;
    case DirectiveTag::ExploreHypotheses:
      require(!d.task.empty(), d.tag, "the task context");
      require(!d.task_description.empty(), d.tag, "the task description");
      slots["task"] = d.task;
      slots["tested_candidates"] = format_tested(d.tested);
      slots["task_description"] = d.task_description;
      break;
  }
  return substitute(template_source(d.tag), slots);
}

// ---------------------------------------------------------------------------
// Scripted backend

ScriptedGenerator::ScriptedGenerator(std::shared_ptr<const SyntheticWorld> world, std::uint64_t seed)
    : world_(std::move(world)), seed_(seed) {
  if (!world_) throw ValidationError("scripted generator needs a world");
}

std::optional<PrincipleProposal> ScriptedGenerator::propose_principle(const GuidanceDirective& d) {
  if (!is_principle_facing(d.tag)) throw ValidationError("propose_principle: hypothesis-facing directive");
  if (d.tag == DirectiveTag::Silent) return std::nullopt;

  std::unordered_set<std::string> active_texts;
  for (const auto& a : d.active) active_texts.insert(a.text);
  std::vector<const LatentPrinciple*> unused;
  for (const auto& l : world_->latent()) {
    if (!active_texts.count(l.text)) unused.push_back(&l);
  }

  switch (d.tag) {
    case DirectiveTag::DiversifyPrinciples: {
      // Unused latent entry whose closest active principle is farthest.
      const LatentPrinciple* best = nullptr;
      double best_score = std::numeric_limits<double>::infinity();
      for (const LatentPrinciple* l : unused) {
        double closest = -std::numeric_limits<double>::infinity();
        for (const auto& a : d.active) closest = std::max(closest, l->center.dot(a.embedding));
        if (closest < best_score) {
          best_score = closest;
          best = l;
        }
      }
      if (!best) return std::nullopt;
      return PrincipleProposal{best->text, best->center, PrincipleOrigin::diversify};
    }
    case DirectiveTag::DiscoverNewPrinciple: {
      require(!d.anomalies.empty(), d.tag, "anomalies");
      auto m = mean_embedding(d.anomalies);
      if (m.empty()) return std::nullopt;
      UnitVector target;
      try {
        target = UnitVector::normalized(m);
      } catch (const ValidationError&) {
        return std::nullopt;
      }
      const LatentPrinciple* best = nullptr;
      double best_dot = -std::numeric_limits<double>::infinity();
      for (const LatentPrinciple* l : unused) {
        const double s = l->center.dot(target);
        if (s > best_dot) {
          best_dot = s;
          best = l;
        }
      }
      if (best) return PrincipleProposal{best->text, best->center, PrincipleOrigin::discover};
      // Library exhausted: lean the anomaly direction away from everything
      // already active so the new principle is not a near-copy of one.
      std::vector<std::vector<double>> basis;
      for (const auto& a : d.active) {
        if (a.embedding.dim() != target.dim()) continue;
        std::vector<double> b(a.embedding.values().begin(), a.embedding.values().end());
        for (const auto& q : basis) {
          double c = 0.0;
          for (std::size_t i = 0; i < b.size(); ++i) c += b[i] * q[i];
          for (std::size_t i = 0; i < b.size(); ++i) b[i] -= c * q[i];
        }
        double nb = 0.0;
        for (double x : b) nb += x * x;
        if (nb < 1e-12) continue;
        for (double& x : b) x /= std::sqrt(nb);
        basis.push_back(std::move(b));
      }
      std::vector<double> r(target.values().begin(), target.values().end());
      for (const auto& q : basis) {
        double c = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) c += r[i] * q[i];
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= c * q[i];
      }
      double nr = 0.0;
      for (double x : r) nr += x * x;
      UnitVector emergent = target;
      if (nr > 1e-12) {
        nr = std::sqrt(nr);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = target[i] + r[i] / nr;
        emergent = UnitVector::normalized(std::move(r));
      }
      return PrincipleProposal{"Emergent mechanism explaining anomalies " + anomaly_ids(d.anomalies) + ".",
                               std::move(emergent), PrincipleOrigin::discover};
    }
    case DirectiveTag::RefineWithAnomalies: {
      require(!d.anomalies.empty(), d.tag, "anomalies");
      require(d.map_principle.has_value(), d.tag, "the top principle");
      auto m = mean_embedding(d.anomalies);
      if (m.empty()) return std::nullopt;
      // Tilt the top principle toward the part of the anomaly centroid it
      // does not already explain: normalize(e_MAP + unit(m - (m.e)e)).
      const UnitVector& top = d.map_principle->embedding;
      if (m.size() != top.dim()) return std::nullopt;
      double along = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) along += m[i] * top[i];
      double norm = 0.0;
      for (std::size_t i = 0; i < m.size(); ++i) {
        m[i] -= along * top[i];
        norm += m[i] * m[i];
      }
      norm = std::sqrt(norm);
      if (!(norm > 1e-12)) return std::nullopt;
      std::vector<double> v(top.values().begin(), top.values().end());
      for (std::size_t i = 0; i < v.size(); ++i) v[i] += m[i] / norm;
      UnitVector e;
      try {
        e = UnitVector::normalized(std::move(v));
      } catch (const ValidationError&) {
        return std::nullopt;
      }
      return PrincipleProposal{"Refinement of [" + d.map_principle->id + "] " + d.map_principle->text +
                                   " Boundary conditions reconcile anomalies " + anomaly_ids(d.anomalies) + ".",
                               std::move(e), PrincipleOrigin::refine};
    }
    default:
      return std::nullopt;
  }
}

std::vector<std::string> ScriptedGenerator::propose_hypotheses(const GuidanceDirective& d, int k) {
  if (d.tag != DirectiveTag::ExploitHypotheses && d.tag != DirectiveTag::ExploreHypotheses) {
    throw ValidationError("propose_hypotheses: principle-facing directive");
  }
  if (k < 1) throw ValidationError("propose_hypotheses: k must be positive");

  std::unordered_set<std::string> excluded(d.pending_ids.begin(), d.pending_ids.end());
  for (const auto& t : d.tested) excluded.insert(t.id);
  std::vector<const WorldHypothesis*> open;
  std::vector<const UnitVector*> anchors;
  for (const auto& wh : world_->universe()) {
    if (excluded.count(wh.hypothesis.id)) {
      anchors.push_back(&wh.hypothesis.embedding);
    } else {
      open.push_back(&wh);
    }
  }
  if (open.empty()) throw ExhaustionError("no untested hypotheses remain in the world");
  const std::size_t want = std::min(open.size(), static_cast<std::size_t>(k));
  std::vector<std::string> out;

  if (d.tag == DirectiveTag::ExploitHypotheses) {
    require(d.map_principle.has_value(), d.tag, "the top principle");
    const UnitVector& target = d.map_principle->embedding;
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < open.size(); ++i) ranked.emplace_back(-open[i]->hypothesis.embedding.dot(target), i);
    std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(want), ranked.end());
    for (std::size_t i = 0; i < want; ++i) out.push_back(open[ranked[i].second]->hypothesis.text);
    return out;
  }

  // Farthest-point traversal, anchored on everything already tested or pooled.
  std::vector<double> min_sq(open.size(), std::numeric_limits<double>::infinity());
  const auto absorb = [&](const UnitVector& a) {
    for (std::size_t i = 0; i < open.size(); ++i) {
      const double sq = std::max(0.0, 2.0 - 2.0 * open[i]->hypothesis.embedding.dot(a));
      min_sq[i] = std::min(min_sq[i], sq);
    }
  };
  for (const UnitVector* a : anchors) absorb(*a);
  std::vector<bool> taken(open.size(), false);
  for (std::size_t n = 0; n < want; ++n) {
    std::size_t pick = 0;
    if (anchors.empty() && n == 0) {
      Engine rng(derive_seed(seed_, "explore", static_cast<std::uint64_t>(d.round)));
      pick = static_cast<std::size_t>(rng() % open.size());
    } else {
      double far = -1.0;
      for (std::size_t i = 0; i < open.size(); ++i) {
        if (!taken[i] && min_sq[i] > far) {
          far = min_sq[i];
          pick = i;
        }
      }
    }
    taken[pick] = true;
    out.push_back(open[pick]->hypothesis.text);
    absorb(open[pick]->hypothesis.embedding);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chat-completions backend

std::optional<nlohmann::json> extract_json_block(const std::string& content) {
  const auto try_parse = [](const std::string& s) -> std::optional<nlohmann::json> {
    auto j = nlohmann::json::parse(s, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
  };
  const std::size_t fence = content.find("```");
  if (fence != std::string::npos) {
    std::size_t start = content.find('\n', fence);
    const std::size_t end = start == std::string::npos ? std::string::npos : content.find("```", start);
    if (end != std::string::npos) return try_parse(content.substr(start + 1, end - start - 1));
  }
  const std::size_t open = content.find('{');
  const std::size_t close = content.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  return try_parse(content.substr(open, close - open + 1));
}

LlmGenerator::LlmGenerator(ChatConfig config, std::shared_ptr<HttpJsonClient> client)
    : config_(std::move(config)), client_(std::move(client)) {
  if (!client_) throw ValidationError("llm generator needs a transport");
}

nlohmann::json LlmGenerator::build_request(const std::string& user_content) const {
  nlohmann::json messages = nlohmann::json::array();
  messages.push_back({{"role", "system"},
                      {"content", config_.system_prompt + "\n" + std::string(response_format_instruction())}});
  for (const auto& m : context_) messages.push_back({{"role", m.role}, {"content", m.content}});
  messages.push_back({{"role", "user"}, {"content", user_content}});
  return {{"model", config_.model}, {"messages", messages}, {"temperature", config_.temperature}};
}

void LlmGenerator::remember(ChatMessage m) {
  context_.push_back(std::move(m));
  while (context_.size() > config_.context_messages) context_.pop_front();
}

nlohmann::json LlmGenerator::exchange(const std::string& prompt, const char* required_field) {
  std::map<std::string, std::string> headers;
  if (auto key = api_key_from_env(config_.api_key_env); !key.empty()) headers["Authorization"] = "Bearer " + key;
  const nlohmann::json request = build_request(prompt);

  std::string last_error = "no attempt made";
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    try {
      const HttpResponse resp = client_->post(config_.endpoint, config_.path, request, headers);
      if (resp.status != 200) {
        last_error = "chat endpoint returned HTTP " + std::to_string(resp.status);
        continue;
      }
      const std::string content =
          resp.body.at("choices").at(0).at("message").at("content").get<std::string>();
      auto parsed = extract_json_block(content);
      if (!parsed || !parsed->contains(required_field)) {
        last_error = std::string("response lacks a JSON block with '") + required_field + "'";
        continue;
      }
      remember({"user", prompt});
      remember({"assistant", content});
      return *parsed;
    } catch (const TransportError& e) {
      last_error = e.what();
    } catch (const nlohmann::json::exception& e) {
      last_error = std::string("malformed chat response: ") + e.what();
    }
  }
  throw GenerationError("llm generation failed after " + std::to_string(config_.max_attempts) +
                        " attempts: " + last_error);
}

std::optional<PrincipleProposal> LlmGenerator::propose_principle(const GuidanceDirective& d) {
  if (!is_principle_facing(d.tag)) throw ValidationError("propose_principle: hypothesis-facing directive");
  auto prompt = render_template(d);
  if (!prompt) return std::nullopt;
  const nlohmann::json reply = exchange(*prompt, "principle_text");
  const auto& text = reply.at("principle_text");
  if (text.is_null() || !text.is_string() || text.get<std::string>().empty()) return std::nullopt;
  PrincipleOrigin origin = PrincipleOrigin::diversify;
  if (d.tag == DirectiveTag::RefineWithAnomalies) origin = PrincipleOrigin::refine;
  if (d.tag == DirectiveTag::DiscoverNewPrinciple) origin = PrincipleOrigin::discover;
  return PrincipleProposal{text.get<std::string>(), std::nullopt, origin};
}

std::vector<std::string> LlmGenerator::propose_hypotheses(const GuidanceDirective& d, int k) {
  if (d.tag != DirectiveTag::ExploitHypotheses && d.tag != DirectiveTag::ExploreHypotheses) {
    throw ValidationError("propose_hypotheses: principle-facing directive");
  }
  if (k < 1) throw ValidationError("propose_hypotheses: k must be positive");
  GuidanceDirective sized = d;
  sized.count = k;
  const nlohmann::json reply = exchange(*render_template(sized), "hypotheses");
  std::unordered_set<std::string> seen;
  for (const auto& t : d.tested) seen.insert(t.text);
  std::vector<std::string> out;
  for (const auto& h : reply.at("hypotheses")) {
    if (!h.is_string()) continue;
    std::string text = h.get<std::string>();
    if (text.empty() || !seen.insert(text).second) continue;
    out.push_back(std::move(text));
    if (static_cast<int>(out.size()) == k) break;
  }
  if (out.empty()) throw GenerationError("llm proposed no untested hypotheses");
  return out;
}

}  // namespace evobo
