#include "evobo/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

#include "evobo/errors.hpp"
#include "evobo/random.hpp"

namespace evobo {
namespace {

// Proposals this close to an active principle add no new explanation.
constexpr double kNearDuplicateDot = 0.98;

std::string principle_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "P%03zu", index);
  return buf;
}

ActivePrinciple active_of(const Principle& p, const BeliefState& beliefs) {
  return {p.id, p.text, beliefs.mass_of(p.id), p.embedding};
}

struct RunState {
  PrincipleRegistry registry;
  ExpertBank bank;
  std::vector<Observation> history;
  std::vector<TestedHypothesis> tested;
  std::unordered_map<std::string, std::string> text_of;  // executed ids
  std::vector<Hypothesis> pool;
};

GuidanceDirective base_directive(const RunConfig& config, const RunState& st, const BeliefState& beliefs,
                                 DirectiveTag tag, int round) {
  GuidanceDirective d;
  d.tag = tag;
  d.round = round;
  for (const auto& p : st.registry.principles()) d.active.push_back(active_of(p, beliefs));
  d.map_principle = active_of(st.registry.at(map_principle(beliefs, st.registry)), beliefs);
  d.tested = st.tested;
  for (const auto& h : st.pool) d.pending_ids.insert(h.id);
  d.task = config.task;
  d.task_description = config.task_description;
  d.count = config.proposals_per_round;
  return d;
}

std::string external_id(const std::string& text) { return "x-" + hex64(fnv1a64(text)).substr(0, 12); }

}  // namespace

DirectivePair guidance_for_round(const BeliefState& beliefs, const AnomalySet& anomalies,
                                 double confidence_threshold, int round, int warm_up_rounds,
                                 std::size_t working_set_size) {
  if (beliefs.masses.empty()) throw ValidationError("guidance_for_round: empty belief state");
  const double top = *std::max_element(beliefs.masses.begin(), beliefs.masses.end());
  const bool confident = top >= confidence_threshold;
  DirectivePair out;
  if (anomalies.triggered) {
    out.principle_facing = confident ? DirectiveTag::RefineWithAnomalies : DirectiveTag::DiscoverNewPrinciple;
  } else if (round < warm_up_rounds || working_set_size < 2) {
    out.principle_facing = DirectiveTag::DiversifyPrinciples;
  } else {
    out.principle_facing = DirectiveTag::Silent;
  }
  out.hypothesis_facing =
      confident && round >= warm_up_rounds ? DirectiveTag::ExploitHypotheses : DirectiveTag::ExploreHypotheses;
  return out;
}

Backends make_backends(const RunConfig& config, std::shared_ptr<const SyntheticWorld> world) {
  if (!world) throw ValidationError("make_backends: world is required");
  Backends b;
  std::shared_ptr<Embedder> base;
  if (config.embedder == "external-service") {
    base = std::make_shared<ServiceEmbedder>(config.embedding_service, make_httplib_client());
  } else {
    base = std::make_shared<HashEmbedder>(0, config.embedding_dimension);
  }
  auto memo = std::make_shared<MemoEmbedder>(base);
  for (const auto& l : world->latent()) memo->preseed(l.text, l.center);
  for (const auto& wh : world->universe()) memo->preseed(wh.hypothesis.text, wh.hypothesis.embedding);
  b.embedder = memo;
  if (config.generator == "llm") {
    b.generator = std::make_shared<LlmGenerator>(config.llm, make_httplib_client());
  } else {
    b.generator = std::make_shared<ScriptedGenerator>(world, derive_seed(config.seed, "generator"));
  }
  return b;
}

std::vector<Principle> initial_principles(const RunConfig& config, const SyntheticWorld& world,
                                          Embedder& embedder) {
  std::vector<Principle> out;
  if (config.initial.source == "texts") {
    for (const auto& t : config.initial.texts) {
      out.push_back({principle_id(out.size()), t, embedder.embed(t), 0, PrincipleOrigin::initial, 1.0});
    }
  } else {
    for (std::size_t i = 0; i < world.latent().size(); ++i) {
      if (!config.initial.include_true && static_cast<int>(i) == world.true_index()) continue;
      const auto& l = world.latent()[i];
      out.push_back({principle_id(out.size()), l.text, l.center, 0, PrincipleOrigin::initial, 1.0});
    }
  }
  if (out.empty()) throw ValidationError("initial principle set is empty");
  return out;
}

Trace run(const RunConfig& config, const SyntheticWorld& world, const Backends& backends) {
  validate(config);
  if (!backends.generator || !backends.embedder) throw ValidationError("run: backends are incomplete");
  const double noise_var = config.obs_noise_variance;

  Trace trace;
  RunState st{PrincipleRegistry{}, ExpertBank{config.gp}, {}, {}, {}, {}};
  for (auto& p : initial_principles(config, world, *backends.embedder)) st.registry.add(std::move(p));
  st.bank.refit_all(st.registry, st.history);

  const auto best = true_best(world);
  trace.header.config = to_json(config);
  trace.header.config_hash = config_hash(config);
  trace.header.world_spec = world.to_json()["spec"];
  trace.header.world_hash = hex64(world.content_hash());
  trace.header.initial_principles = st.registry.principles();
  trace.header.v_star = best.value;
  trace.header.best_hypothesis = best.hypothesis_id;
  trace.header.true_principle_id = world.true_principle().id;
  trace.header.true_center = world.true_principle().center;

  NoiseStream noise(derive_seed(config.seed, "noise"));
  BeliefState beliefs = update_posterior(st.registry, st.bank, st.history, noise_var, -1);
  const SelectionRule rule = config.mode == RunMode::greedy ? SelectionRule::greedy : SelectionRule::ids;

  for (int t = 0; t < config.budget; ++t) {
    RoundTrace rt;
    rt.round = t;

    // Phase 1: anomalies under the previous posterior's MAP, then augmentation.
    rt.map_before = map_principle(beliefs, st.registry);
    if (!st.history.empty()) {
      rt.anomalies = detect(st.history, st.bank.at(rt.map_before), st.registry.at(rt.map_before), config.anomaly,
                            noise_var, t);
    }
    const DirectivePair early =
        guidance_for_round(beliefs, rt.anomalies, config.confidence_threshold, t, config.warm_up_rounds,
                           st.registry.size());
    rt.principle_directive = early.principle_facing;
    if (early.principle_facing != DirectiveTag::Silent) {
      if (config.mode == RunMode::static_evolution) {
        rt.augmentation_note = "static evolution: augmentation disabled";
      } else {
        GuidanceDirective d = base_directive(config, st, beliefs, early.principle_facing, t);
        const std::size_t payload = std::min(rt.anomalies.records.size(), static_cast<std::size_t>(config.anomaly_payload));
        for (std::size_t i = 0; i < payload; ++i) {
          const auto& rec = rt.anomalies.records[i];
          const auto obs = std::find_if(st.history.begin(), st.history.end(),
                                        [&](const Observation& o) { return o.hypothesis_id == rec.hypothesis_id; });
          d.anomalies.push_back({rec, st.text_of.at(rec.hypothesis_id), obs->y, obs->embedding});
        }
        try {
          auto proposal = backends.generator->propose_principle(d);
          if (!proposal) {
            rt.augmentation_note = "generator returned no principle";
          } else {
            const auto& ps = st.registry.principles();
            const bool dup = std::any_of(ps.begin(), ps.end(), [&](const Principle& p) { return p.text == proposal->text; });
            UnitVector e;
            if (!dup) e = proposal->embedding ? *proposal->embedding : backends.embedder->embed(proposal->text);
            const auto twin = dup ? ps.end() : std::find_if(ps.begin(), ps.end(), [&](const Principle& p) {
              return p.embedding.dim() == e.dim() && p.embedding.dot(e) >= kNearDuplicateDot;
            });
            if (dup) {
              rt.augmentation_note = "duplicate principle text skipped";
            } else if (twin != ps.end()) {
              rt.augmentation_note = "near-duplicate of " + twin->id + " skipped";
            } else {
              Principle p{principle_id(st.registry.size()), proposal->text, std::move(e), t, proposal->origin, 1.0};
              rt.principle_added = p;
              beliefs = augment(st.registry, st.bank, std::move(p), st.history, noise_var, t);
            }
          }
        } catch (const GenerationError& e) {
          rt.augmentation_note = std::string("generation failed: ") + e.what();
        } catch (const TransportError& e) {
          rt.augmentation_note = std::string("generation failed: ") + e.what();
        }
      }
    }

    // Phase 2: full-history posterior.
    beliefs = update_posterior(st.registry, st.bank, st.history, noise_var, t);
    rt.beliefs = beliefs;
    rt.map_after = map_principle(beliefs, st.registry);

    // Phase 3: proposals and selection.
    const DirectivePair late =
        guidance_for_round(beliefs, rt.anomalies, config.confidence_threshold, t, config.warm_up_rounds,
                           st.registry.size());
    rt.hypothesis_directive = late.hypothesis_facing;
    std::string proposal_note;
    try {
      GuidanceDirective d = base_directive(config, st, beliefs, late.hypothesis_facing, t);
      for (const auto& text : backends.generator->propose_hypotheses(d, config.proposals_per_round)) {
        Hypothesis h;
        if (const WorldHypothesis* wh = world.find_by_text(text)) {
          h = wh->hypothesis;
        } else {
          h = Hypothesis{external_id(text), text, backends.embedder->embed(text), {}};
        }
        const bool seen = st.text_of.count(h.id) ||
                          std::any_of(st.pool.begin(), st.pool.end(), [&](const Hypothesis& q) { return q.id == h.id; });
        if (seen) continue;
        rt.proposed.push_back(h.id);
        st.pool.push_back(std::move(h));
      }
    } catch (const ExhaustionError& e) {
      proposal_note = e.what();
    } catch (const GenerationError& e) {
      proposal_note = std::string("hypothesis generation failed: ") + e.what();
    } catch (const TransportError& e) {
      proposal_note = std::string("hypothesis generation failed: ") + e.what();
    }
    if (st.pool.empty()) {
      trace.truncated = true;
      trace.truncation_note = "round " + std::to_string(t) + ": " +
                              (proposal_note.empty() ? std::string("no candidates") : proposal_note);
      if (proposal_note.rfind("hypothesis generation failed", 0) == 0) trace.errors.push_back(proposal_note);
      break;
    }

    rt.phase = phase_for_round(t, config.warm_up_rounds);
    SelectionConfig sc;
    sc.obs_noise_variance = noise_var;
    sc.samples = config.bald_samples;
    sc.epsilon_floor = config.epsilon_floor;
    sc.seed = config.seed;
    sc.round = t;
    sc.rule = rule;
    Selection sel = select(st.pool, st.registry, st.bank, beliefs, rt.phase, sc);
    rt.scores = std::move(sel.scores);
    rt.selected = sel.hypothesis_id;

    // Phase 4: observe, then refit every expert on the full history.
    const auto it = std::find_if(st.pool.begin(), st.pool.end(),
                                 [&](const Hypothesis& h) { return h.id == rt.selected; });
    Hypothesis chosen = *it;
    st.pool.erase(it);
    rt.selected_text = chosen.text;
    const EvalResult r = evaluate(world, chosen.id, noise);
    rt.observation = Observation{chosen.id, chosen.embedding, r.y, t, r.failed};
    st.history.push_back(rt.observation);
    st.tested.push_back({chosen.id, chosen.text, r.y});
    st.text_of[chosen.id] = chosen.text;
    st.bank.refit_all(st.registry, st.history);
    for (const auto& [id, ex] : st.bank.experts()) rt.hyperparameters[id] = ex.params();

    trace.rounds.push_back(std::move(rt));
  }
  return trace;
}

Trace run(const RunConfig& config) {
  validate(config);
  auto world = std::make_shared<const SyntheticWorld>(build_world(effective_world_spec(config)));
  return run(config, *world, make_backends(config, world));
}

ReplayReport replay(const Trace& trace, double tolerance) {
  ReplayReport rep;
  RunConfig config;
  try {
    config = run_config_from_json(trace.header.config);
    if (config_hash(config) != trace.header.config_hash) {
      rep.warnings.push_back("config hash " + trace.header.config_hash + " differs from recomputed " +
                             config_hash(config) + "; verifying anyway");
    }
  } catch (const std::exception& e) {
    rep.warnings.push_back(std::string("config not fully readable (") + e.what() + "); using defaults");
    config = RunConfig{};
    if (trace.header.config.contains("obs_noise_variance")) {
      config.obs_noise_variance = trace.header.config["obs_noise_variance"].get<double>();
    }
  }

  PrincipleRegistry registry;
  ExpertBank bank(config.gp);
  std::vector<Observation> history;
  try {
    for (const auto& p : trace.header.initial_principles) registry.add(p);
    bank.refit_all(registry, history);
    for (const auto& rt : trace.rounds) {
      if (rt.principle_added) augment(registry, bank, *rt.principle_added, history, config.obs_noise_variance, rt.round);
      const BeliefState b = update_posterior(registry, bank, history, config.obs_noise_variance, rt.round);
      double err = 0.0;
      bool same_ids = b.ids == rt.beliefs.ids && b.log_masses.size() == rt.beliefs.log_masses.size();
      if (same_ids) {
        for (std::size_t i = 0; i < b.log_masses.size(); ++i) {
          err = std::max(err, std::abs(b.masses[i] - rt.beliefs.masses[i]));
          err = std::max(err, std::abs(b.log_masses[i] - rt.beliefs.log_masses[i]));
        }
      }
      if (!std::isfinite(err)) same_ids = false;
      rep.max_abs_error = std::max(rep.max_abs_error, err);
      if (!same_ids || err > tolerance) {
        rep.ok = false;
        rep.first_divergent_round = rt.round;
        rep.message = "belief snapshot diverges at round " + std::to_string(rt.round);
        return rep;
      }
      history.push_back(rt.observation);
      bank.refit_all(registry, history);
    }
  } catch (const std::exception& e) {
    rep.ok = false;
    rep.message = std::string("replay failed: ") + e.what();
    return rep;
  }
  rep.message = "all " + std::to_string(trace.rounds.size()) + " snapshots reproduced";
  return rep;
}

}  // namespace evobo
