#include "evobo/trace_io.hpp"

#include <fstream>
#include <sstream>

#include "evobo/errors.hpp"
#include "evobo/random.hpp"

namespace evobo {
namespace {

using nlohmann::json;

json vec_json(const UnitVector& v) { return json(std::vector<double>(v.values().begin(), v.values().end())); }

UnitVector vec_from(const json& j) { return UnitVector::checked(j.get<std::vector<double>>()); }

json params_json(const KernelParams& k) {
  return {{"lengthscales", k.lengthscales}, {"signal_variance", k.signal_variance}, {"noise_variance", k.noise_variance}};
}

KernelParams params_from(const json& j) {
  KernelParams k;
  k.lengthscales = j.at("lengthscales").get<std::array<double, 2>>();
  k.signal_variance = j.at("signal_variance").get<double>();
  k.noise_variance = j.at("noise_variance").get<double>();
  return k;
}

json anomalies_json(const AnomalySet& a) {
  json recs = json::array();
  for (const auto& r : a.records) {
    recs.push_back({{"id", r.hypothesis_id},
                    {"score", r.score},
                    {"residual", r.residual},
                    {"variance", r.predictive_variance},
                    {"round", r.round}});
  }
  return {{"triggered", a.triggered}, {"threshold", a.threshold_used}, {"records", recs}};
}

AnomalySet anomalies_from(const json& j) {
  AnomalySet a;
  a.triggered = j.at("triggered").get<bool>();
  a.threshold_used = j.at("threshold").get<double>();
  for (const auto& r : j.at("records")) {
    a.records.push_back({r.at("id").get<std::string>(), r.at("score").get<double>(), r.at("residual").get<double>(),
                         r.at("variance").get<double>(), r.at("round").get<int>()});
  }
  return a;
}

SelectionPhase phase_from(const std::string& s) {
  if (s == "warm-up") return SelectionPhase::warm_up;
  if (s == "ids") return SelectionPhase::ids;
  throw ValidationError("unknown selection phase '" + s + "'");
}

}  // namespace

json to_json(const Principle& p) {
  return {{"id", p.id},
          {"text", p.text},
          {"created_round", p.created_round},
          {"origin", to_string(p.origin)},
          {"prior_weight", p.prior_weight},
          {"embedding", vec_json(p.embedding)}};
}

Principle principle_from_json(const json& j) {
  return {j.at("id").get<std::string>(),     j.at("text").get<std::string>(),
          vec_from(j.at("embedding")),       j.at("created_round").get<int>(),
          principle_origin_from_string(j.at("origin").get<std::string>()), j.at("prior_weight").get<double>()};
}

json to_json(const BeliefState& b) {
  return {{"round", b.round},
          {"ids", b.ids},
          {"masses", b.masses},
          {"log_masses", b.log_masses},
          {"log_prior", b.log_prior},
          {"entropy", b.entropy}};
}

BeliefState belief_state_from_json(const json& j) {
  BeliefState b;
  b.round = j.at("round").get<int>();
  b.ids = j.at("ids").get<std::vector<std::string>>();
  b.masses = j.at("masses").get<std::vector<double>>();
  b.log_masses = j.at("log_masses").get<std::vector<double>>();
  b.log_prior = j.at("log_prior").get<std::vector<double>>();
  b.entropy = j.at("entropy").get<double>();
  return b;
}

json to_json(const TraceHeader& h) {
  json initial = json::array();
  for (const auto& p : h.initial_principles) initial.push_back(to_json(p));
  return {{"type", "header"},
          {"format", kTraceFormat},
          {"config_hash", h.config_hash},
          {"world_hash", h.world_hash},
          {"config", h.config},
          {"world_spec", h.world_spec},
          {"v_star", h.v_star},
          {"best_hypothesis", h.best_hypothesis},
          {"true_principle_id", h.true_principle_id},
          {"true_center", vec_json(h.true_center)},
          {"initial_principles", initial}};
}

TraceHeader trace_header_from_json(const json& j) {
  if (j.value("type", "") != "header") throw ValidationError("trace: first line is not a header");
  if (j.value("format", "") != kTraceFormat) throw ValidationError("trace: unsupported format");
  TraceHeader h;
  h.config_hash = j.at("config_hash").get<std::string>();
  h.world_hash = j.at("world_hash").get<std::string>();
  h.config = j.at("config");
  h.world_spec = j.at("world_spec");
  h.v_star = j.at("v_star").get<double>();
  h.best_hypothesis = j.at("best_hypothesis").get<std::string>();
  h.true_principle_id = j.at("true_principle_id").get<std::string>();
  h.true_center = vec_from(j.at("true_center"));
  for (const auto& p : j.at("initial_principles")) h.initial_principles.push_back(principle_from_json(p));
  return h;
}

json to_json(const RoundTrace& r) {
  json scores = json::array();
  for (const auto& s : r.scores) {
    scores.push_back({{"id", s.hypothesis_id},
                      {"regret", s.regret},
                      {"info_gain", s.info_gain},
                      {"ratio", s.ratio},
                      {"mixture_mean", s.mixture_mean},
                      {"variance_sum", s.variance_sum}});
  }
  json hyper = json::object();
  for (const auto& [id, k] : r.hyperparameters) hyper[id] = params_json(k);
  json j = {{"type", "round"},
            {"round", r.round},
            {"principle_directive", to_string(r.principle_directive)},
            {"hypothesis_directive", to_string(r.hypothesis_directive)},
            {"map_before", r.map_before},
            {"anomalies", anomalies_json(r.anomalies)},
            {"principle_added", r.principle_added ? to_json(*r.principle_added) : json(nullptr)},
            {"augmentation_note", r.augmentation_note},
            {"beliefs", to_json(r.beliefs)},
            {"map_after", r.map_after},
            {"proposed", r.proposed},
            {"phase", to_string(r.phase)},
            {"scores", scores},
            {"selected", r.selected},
            {"selected_text", r.selected_text},
            {"observation",
             {{"id", r.observation.hypothesis_id},
              {"y", r.observation.y},
              {"round", r.observation.round},
              {"failed", r.observation.failed},
              {"embedding", vec_json(r.observation.embedding)}}},
            {"hyperparameters", hyper}};
  return j;
}

RoundTrace round_trace_from_json(const json& j) {
  if (j.value("type", "") != "round") throw ValidationError("trace: expected a round line");
  RoundTrace r;
  r.round = j.at("round").get<int>();
  r.principle_directive = directive_tag_from_string(j.at("principle_directive").get<std::string>());
  r.hypothesis_directive = directive_tag_from_string(j.at("hypothesis_directive").get<std::string>());
  r.map_before = j.at("map_before").get<std::string>();
  r.anomalies = anomalies_from(j.at("anomalies"));
  if (!j.at("principle_added").is_null()) r.principle_added = principle_from_json(j.at("principle_added"));
  r.augmentation_note = j.at("augmentation_note").get<std::string>();
  r.beliefs = belief_state_from_json(j.at("beliefs"));
  r.map_after = j.at("map_after").get<std::string>();
  r.proposed = j.at("proposed").get<std::vector<std::string>>();
  r.phase = phase_from(j.at("phase").get<std::string>());
  for (const auto& s : j.at("scores")) {
    CandidateScore c;
    c.hypothesis_id = s.at("id").get<std::string>();
    c.regret = s.at("regret").get<double>();
    c.info_gain = s.at("info_gain").get<double>();
    c.ratio = s.at("ratio").get<double>();
    c.mixture_mean = s.at("mixture_mean").get<double>();
    c.variance_sum = s.at("variance_sum").get<double>();
    r.scores.push_back(std::move(c));
  }
  r.selected = j.at("selected").get<std::string>();
  r.selected_text = j.at("selected_text").get<std::string>();
  const auto& o = j.at("observation");
  r.observation = Observation{o.at("id").get<std::string>(), vec_from(o.at("embedding")), o.at("y").get<double>(),
                              o.at("round").get<int>(), o.at("failed").get<bool>()};
  for (const auto& [id, k] : j.at("hyperparameters").items()) r.hyperparameters[id] = params_from(k);
  return r;
}

std::string serialize_trace(const Trace& trace) {
  std::string out = to_json(trace.header).dump() + "\n";
  for (const auto& r : trace.rounds) out += to_json(r).dump() + "\n";
  json footer = {{"type", "footer"},
                 {"rounds", trace.rounds.size()},
                 {"truncated", trace.truncated},
                 {"truncation_note", trace.truncation_note},
                 {"errors", trace.errors},
                 {"digest", hex64(fnv1a64(out))}};
  out += footer.dump() + "\n";
  return out;
}

LoadedTrace parse_trace(const std::string& text) {
  LoadedTrace lt;
  std::size_t pos = 0;
  int line_no = 0;
  bool saw_header = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    ++line_no;
    if (!line.empty()) {
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        throw ValidationError("trace line " + std::to_string(line_no) + " is not a JSON object");
      }
      try {
        const std::string type = j.value("type", "");
        if (!saw_header) {
          lt.trace.header = trace_header_from_json(j);
          saw_header = true;
        } else if (type == "round") {
          lt.trace.rounds.push_back(round_trace_from_json(j));
        } else if (type == "footer") {
          lt.trace.truncated = j.at("truncated").get<bool>();
          lt.trace.truncation_note = j.at("truncation_note").get<std::string>();
          lt.trace.errors = j.at("errors").get<std::vector<std::string>>();
          lt.digest_present = true;
          lt.digest_ok = j.at("digest").get<std::string>() == hex64(fnv1a64(std::string_view(text).substr(0, pos)));
          if (j.at("rounds").get<std::size_t>() != lt.trace.rounds.size()) lt.digest_ok = false;
        } else {
          throw ValidationError("unknown line type '" + type + "'");
        }
      } catch (const json::exception& e) {
        throw ValidationError("trace line " + std::to_string(line_no) + ": " + e.what());
      } catch (const ValidationError& e) {
        throw ValidationError("trace line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    pos = end + 1;
  }
  if (!saw_header) throw ValidationError("trace is empty");
  return lt;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ValidationError("write to '" + path + "' failed");
}

LoadedTrace read_trace(const std::string& path) { return parse_trace(read_file(path)); }

void write_trace(const Trace& trace, const std::string& path) { write_file(path, serialize_trace(trace)); }

}  // namespace evobo
