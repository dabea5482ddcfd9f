#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "evobo/orchestrator.hpp"

namespace evobo {

// Reference values for normalizing SQ and AUOC on the paper's task families.
inline constexpr double kMuRefNanohelix = 2.0;
inline constexpr double kMuRefBioMolecular = 6.5;
inline constexpr double kMuRefSuperconductor = 298.5;
inline constexpr double kMuRefTransitionMetal = 493.8;

// 100 * max y / mu_ref.
double solution_quality(std::span<const double> outcomes, double mu_ref);

// 100 / (T mu_ref) * sum_t max_{k<=t} y_k. T defaults to the number of outcomes.
double auoc(std::span<const double> outcomes, double mu_ref, std::optional<std::size_t> budget = std::nullopt);

// Mean pairwise Euclidean distance; nullopt below two points.
std::optional<double> apd(const std::vector<std::vector<double>>& features);

struct RegretFit {
  std::vector<double> series;  // R(t), t = 1..T
  double coefficient = 0.0;    // c in R(t) ~ c sqrt(t), fit over t in [2, T]
  double residual = 0.0;       // RMS of the fit
  std::optional<double> exponent;  // log-log slope over the second half
};

RegretFit regret_fit(std::span<const double> outcomes, double v_star);

// Round at which the MAP switches and then holds for at least two rounds
// through the end of the sequence.
std::optional<int> watershed(const std::vector<std::string>& map_sequence);

std::optional<int> discovery_round(const Trace& trace, const UnitVector& true_center, double eps_dot = 0.95);

// Every principle the trace knows of, initial ones first.
std::vector<Principle> trace_principles(const Trace& trace);

double kendall_tau(std::span<const double> x, std::span<const double> y);

struct MetricReport {
  std::size_t rounds = 0;
  bool truncated = false;
  double mu_ref = 0.0;
  double sq_percent = 0.0;
  double auoc_percent = 0.0;
  std::optional<double> apd;
  std::vector<double> best_so_far;
  RegretFit regret;
  std::vector<double> entropy;
  std::vector<double> map_mass;
  std::vector<std::string> map_sequence;
  std::optional<int> watershed_round;
  std::optional<int> discovery;
  int augmentations = 0;
  std::size_t working_set_size = 0;
  std::string final_map;
  double final_map_mass = 0.0;
  double final_map_true_dot = 0.0;  // MAP embedding vs the true principle's center
};

// mu_ref defaults to the trace's v*.
MetricReport compute_metrics(const Trace& trace, std::optional<double> mu_ref = std::nullopt,
                             std::optional<std::size_t> budget = std::nullopt);

nlohmann::json to_json(const MetricReport& report);
std::string series_csv(const MetricReport& report);
nlohmann::json summary_json(const Trace& trace, const MetricReport& report);

}  // namespace evobo
