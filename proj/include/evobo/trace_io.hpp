#pragma once

#include <string>

#include <json.hpp>

#include "evobo/orchestrator.hpp"

namespace evobo {

// JSONL layout: header line, one line per round, footer line carrying an
// FNV-1a digest of every preceding byte.
inline constexpr const char* kTraceFormat = "evobo.trace/1";

nlohmann::json to_json(const TraceHeader& header);
nlohmann::json to_json(const RoundTrace& round);
nlohmann::json to_json(const Principle& p);
nlohmann::json to_json(const BeliefState& b);
TraceHeader trace_header_from_json(const nlohmann::json& j);
RoundTrace round_trace_from_json(const nlohmann::json& j);
Principle principle_from_json(const nlohmann::json& j);
BeliefState belief_state_from_json(const nlohmann::json& j);

std::string serialize_trace(const Trace& trace);
void write_trace(const Trace& trace, const std::string& path);

struct LoadedTrace {
  Trace trace;
  bool digest_present = false;
  bool digest_ok = false;
};

// Throws ValidationError on malformed lines.
LoadedTrace parse_trace(const std::string& text);
LoadedTrace read_trace(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace evobo
