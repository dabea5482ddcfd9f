#include "evobo/metrics_trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "evobo/errors.hpp"

namespace evobo {
namespace {

void check_outcomes(std::span<const double> y, double mu_ref) {
  if (y.empty()) throw ValidationError("metric needs at least one observation");
  if (!(mu_ref > 0.0)) throw ValidationError("mu_ref must be positive");
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
nlohmann::json opt_json(const std::optional<int>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

double solution_quality(std::span<const double> y, double mu_ref) {
  check_outcomes(y, mu_ref);
  return 100.0 * *std::max_element(y.begin(), y.end()) / mu_ref;
}

double auoc(std::span<const double> y, double mu_ref, std::optional<std::size_t> budget) {
  check_outcomes(y, mu_ref);
  const std::size_t T = budget.value_or(y.size());
  if (T < y.size()) throw ValidationError("auoc: budget shorter than the trace");
  double best = y[0], sum = 0.0;
  for (double v : y) {
    best = std::max(best, v);
    sum += best;
  }
  return 100.0 * sum / (static_cast<double>(T) * mu_ref);
}

std::optional<double> apd(const std::vector<std::vector<double>>& f) {
  if (f.size() < 2) return std::nullopt;
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    for (std::size_t j = i + 1; j < f.size(); ++j) {
      if (f[i].size() != f[j].size()) throw ValidationError("apd: feature dimensions differ");
      double sq = 0.0;
      for (std::size_t k = 0; k < f[i].size(); ++k) sq += (f[i][k] - f[j][k]) * (f[i][k] - f[j][k]);
      sum += std::sqrt(sq);
    }
  }
  const double m = static_cast<double>(f.size());
  return 2.0 * sum / (m * (m - 1.0));
}

RegretFit regret_fit(std::span<const double> y, double v_star) {
  RegretFit fit;
  double acc = 0.0;
  for (double v : y) {
    acc += v_star - v;
    fit.series.push_back(acc);
  }
  const std::size_t T = fit.series.size();
  double num = 0.0, den = 0.0;
  for (std::size_t t = 2; t <= T; ++t) {
    num += fit.series[t - 1] * std::sqrt(static_cast<double>(t));
    den += static_cast<double>(t);
  }
  if (den > 0.0) {
    fit.coefficient = num / den;
    double ss = 0.0;
    for (std::size_t t = 2; t <= T; ++t) {
      const double e = fit.series[t - 1] - fit.coefficient * std::sqrt(static_cast<double>(t));
      ss += e * e;
    }
    fit.residual = std::sqrt(ss / static_cast<double>(T - 1));
  }
  // log R against log t over the second half; nonpositive R is skipped.
  std::vector<std::pair<double, double>> pts;
  for (std::size_t t = (T + 1) / 2; t <= T; ++t) {
    if (t >= 1 && fit.series[t - 1] > 0.0) pts.emplace_back(std::log(static_cast<double>(t)), std::log(fit.series[t - 1]));
  }
  if (pts.size() >= 2) {
    double mx = 0.0, my = 0.0;
    for (const auto& [x, v] : pts) {
      mx += x;
      my += v;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [x, v] : pts) {
      sxy += (x - mx) * (v - my);
      sxx += (x - mx) * (x - mx);
    }
    if (sxx > 0.0) fit.exponent = sxy / sxx;
  }
  return fit;
}

std::optional<int> watershed(const std::vector<std::string>& seq) {
  if (seq.size() < 2) return std::nullopt;
  std::size_t r = seq.size() - 1;
  while (r > 0 && seq[r - 1] == seq.back()) --r;
  if (r == 0 || seq.size() - r < 2) return std::nullopt;
  return static_cast<int>(r);
}

std::vector<Principle> trace_principles(const Trace& trace) {
  std::vector<Principle> out = trace.header.initial_principles;
  for (const auto& r : trace.rounds) {
    if (r.principle_added) out.push_back(*r.principle_added);
  }
  return out;
}

std::optional<int> discovery_round(const Trace& trace, const UnitVector& center, double eps_dot) {
  for (const auto& p : trace.header.initial_principles) {
    if (p.embedding.dot(center) >= eps_dot) return 0;
  }
  for (const auto& r : trace.rounds) {
    if (r.principle_added && r.principle_added->embedding.dot(center) >= eps_dot) return r.round;
  }
  return std::nullopt;
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("kendall_tau: length mismatch");
  // tau-b, ties handled.
  double conc = 0.0, disc = 0.0, tx = 0.0, ty = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double a = x[i] - x[j], b = y[i] - y[j];
      if (a == 0.0 && b == 0.0) continue;
      if (a == 0.0) {
        tx += 1.0;
      } else if (b == 0.0) {
        ty += 1.0;
      } else if ((a > 0.0) == (b > 0.0)) {
        conc += 1.0;
      } else {
        disc += 1.0;
      }
    }
  }
  const double den = std::sqrt((conc + disc + tx) * (conc + disc + ty));
  return den > 0.0 ? (conc - disc) / den : 0.0;
}

MetricReport compute_metrics(const Trace& trace, std::optional<double> mu_ref, std::optional<std::size_t> budget) {
  MetricReport m;
  m.rounds = trace.rounds.size();
  m.truncated = trace.truncated;
  m.mu_ref = mu_ref.value_or(trace.header.v_star);
  std::vector<double> y;
  std::vector<std::vector<double>> valid;
  for (const auto& r : trace.rounds) {
    y.push_back(r.observation.y);
    if (!r.observation.failed) {
      valid.emplace_back(r.observation.embedding.values().begin(), r.observation.embedding.values().end());
    }
    m.entropy.push_back(r.beliefs.entropy);
    m.map_sequence.push_back(r.map_after);
    m.map_mass.push_back(r.beliefs.mass_of(r.map_after));
    if (r.principle_added) ++m.augmentations;
  }
  if (y.empty()) throw ValidationError("trace has no rounds");
  m.sq_percent = solution_quality(y, m.mu_ref);
  m.auoc_percent = auoc(y, m.mu_ref, budget);
  m.apd = apd(valid);
  double best = y[0];
  for (double v : y) m.best_so_far.push_back(best = std::max(best, v));
  m.regret = regret_fit(y, trace.header.v_star);
  m.watershed_round = watershed(m.map_sequence);
  m.discovery = discovery_round(trace, trace.header.true_center);
  const auto all = trace_principles(trace);
  m.working_set_size = all.size();
  m.final_map = m.map_sequence.back();
  m.final_map_mass = m.map_mass.back();
  for (const auto& p : all) {
    if (p.id == m.final_map) m.final_map_true_dot = p.embedding.dot(trace.header.true_center);
  }
  return m;
}

nlohmann::json to_json(const MetricReport& m) {
  return {{"rounds", m.rounds},
          {"truncated", m.truncated},
          {"mu_ref", m.mu_ref},
          {"sq_percent", m.sq_percent},
          {"auoc_percent", m.auoc_percent},
          {"apd", opt_json(m.apd)},
          {"regret_coefficient", m.regret.coefficient},
          {"regret_fit_residual", m.regret.residual},
          {"regret_exponent", opt_json(m.regret.exponent)},
          {"cumulative_regret", m.regret.series.empty() ? 0.0 : m.regret.series.back()},
          {"watershed_round", opt_json(m.watershed_round)},
          {"discovery_round", opt_json(m.discovery)},
          {"augmentations", m.augmentations},
          {"working_set_size", m.working_set_size},
          {"final_map", m.final_map},
          {"final_map_mass", m.final_map_mass},
          {"final_map_true_dot", m.final_map_true_dot},
          {"series",
           {{"best_so_far", m.best_so_far},
            {"regret", m.regret.series},
            {"entropy", m.entropy},
            {"map_mass", m.map_mass},
            {"map", m.map_sequence}}}};
}

std::string series_csv(const MetricReport& m) {
  std::string out = "round,best_so_far,regret,entropy,map_mass\n";
  char buf[160];
  for (std::size_t i = 0; i < m.rounds; ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g\n", i, m.best_so_far[i], m.regret.series[i],
                  m.entropy[i], m.map_mass[i]);
    out += buf;
  }
  return out;
}

nlohmann::json summary_json(const Trace& trace, const MetricReport& m) {
  nlohmann::json j = to_json(m);
  j.erase("series");
  return {{"config_hash", trace.header.config_hash},
          {"world_hash", trace.header.world_hash},
          {"v_star", trace.header.v_star},
          {"true_principle", trace.header.true_principle_id},
          {"truncation_note", trace.truncation_note},
          {"errors", trace.errors},
          {"metrics", j}};
}

}  // namespace evobo
