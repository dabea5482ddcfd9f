#include <cmath>
#include <random>

#include <doctest.h>

#include "evobo/beliefs.hpp"
#include "evobo/errors.hpp"

using namespace evobo;

namespace {

UnitVector random_unit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n;
  std::vector<double> v(d);
  for (double& x : v) x = n(rng);
  return UnitVector::normalized(v);
}

Principle principle(const std::string& id, UnitVector e, int round = 0) {
  return Principle{id, "statement " + id, std::move(e), round, PrincipleOrigin::initial, 1.0};
}

std::vector<Observation> history_for(std::mt19937_64& rng, const UnitVector& truth, std::size_t n, std::size_t d) {
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<Observation> h;
  for (std::size_t i = 0; i < n; ++i) {
    UnitVector e = random_unit(rng, d);
    const double s = 0.5 * (e.dot(truth) + 1.0);
    h.push_back({"h" + std::to_string(i), e, 4.0 * s * s + noise(rng), static_cast<int>(i), false});
  }
  return h;
}

// Householder reflection I - 2 u u^T.
UnitVector reflect(const UnitVector& v, const UnitVector& u) {
  const double k = 2.0 * v.dot(u);
  std::vector<double> out(v.dim());
  for (std::size_t i = 0; i < v.dim(); ++i) out[i] = v[i] - k * u[i];
  return UnitVector::normalized(out);
}

}  // namespace

TEST_SUITE("beliefs") {

TEST_CASE("empty history keeps a uniform prior") {
  std::mt19937_64 rng(1);
  PrincipleRegistry reg;
  ExpertBank bank;
  for (int i = 0; i < 4; ++i) {
    reg.add(principle("P" + std::to_string(i), random_unit(rng, 8)));
    bank.fit(reg.principles().back(), {});
  }
  const BeliefState b = update_posterior(reg, bank, {}, 0.0025);
  for (double m : b.masses) CHECK(m == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(b.entropy == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("one observation at likelihood ratio 4:1 gives 0.8/0.2") {
  const double l = -1.7;  // arbitrary shared log-likelihood offset
  const double lp = std::log(0.5);
  const BeliefState b = normalize_log_masses({"A", "B"}, {lp + l + std::log(4.0), lp + l}, {lp, lp}, 1);
  CHECK(b.masses[0] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(b.masses[1] == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("normalization survives extreme log values") {
  const BeliefState b = normalize_log_masses({"A", "B"}, {-1e6, -1e6 - std::log(4.0)}, {0.0, 0.0}, 0);
  CHECK(b.masses[0] == doctest::Approx(0.8));
  CHECK_THROWS_AS(normalize_log_masses({"A"}, {-INFINITY}, {0.0}, 0), DegeneratePosteriorError);
}

TEST_CASE("map principle: strict max and tie-break by creation round") {
  PrincipleRegistry reg;
  std::mt19937_64 rng(2);
  reg.add(principle("A", random_unit(rng, 4), 2));
  reg.add(principle("B", random_unit(rng, 4), 1));
  const double h = std::log(0.5);
  CHECK(map_principle(normalize_log_masses({"A", "B"}, {std::log(0.7), std::log(0.3)}, {h, h}, 0), reg) == "A");
  CHECK(map_principle(normalize_log_masses({"A", "B"}, {h, h}, {h, h}, 0), reg) == "B");
  CHECK(map_principle(normalize_log_masses({"A", "B"}, {std::log(7.0) + 30, std::log(3.0) + 30}, {h, h}, 0), reg) ==
        "A");
}

TEST_CASE("entropy hand values") {
  const std::vector<double> uniform(5, 0.2);
  CHECK(entropy_of(uniform) == doctest::Approx(std::log(5.0)));
  const std::vector<double> single{1.0};
  CHECK(entropy_of(single) == 0.0);
  const std::vector<double> skew{0.5, 0.25, 0.25};
  CHECK(entropy_of(skew) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(entropy_of(skew) == doctest::Approx(1.03972).epsilon(1e-5));
}

TEST_CASE("registry rejects duplicates and empty text") {
  PrincipleRegistry reg;
  std::mt19937_64 rng(3);
  reg.add(principle("A", random_unit(rng, 4)));
  CHECK_THROWS_AS(reg.add(principle("A", random_unit(rng, 4))), ValidationError);
  Principle empty = principle("B", random_unit(rng, 4));
  empty.text.clear();
  CHECK_THROWS_AS(reg.add(empty), ValidationError);
}

TEST_CASE("prior weights are normalized") {
  PrincipleRegistry reg;
  std::mt19937_64 rng(4);
  Principle a = principle("A", random_unit(rng, 4));
  a.prior_weight = 2.0;
  reg.add(a);
  reg.add(principle("B", random_unit(rng, 4)));
  reg.add(principle("C", random_unit(rng, 4)));
  const auto lp = reg.log_prior();
  CHECK(std::exp(lp[0]) == doctest::Approx(0.5));
  CHECK(prior_entropy(reg) == doctest::Approx(1.5 * std::log(2.0)));
}

TEST_CASE("textually identical principle gets equal mass") {
  std::mt19937_64 rng(5);
  const std::size_t d = 12;
  const UnitVector truth = random_unit(rng, d);
  const auto hist = history_for(rng, truth, 15, d);
  PrincipleRegistry reg;
  ExpertBank bank;
  reg.add(principle("A", truth));
  reg.add(principle("B", random_unit(rng, d)));
  bank.refit_all(reg, hist);
  Principle twin = principle("C", truth);
  const BeliefState b = augment(reg, bank, twin, hist, 0.0025);
  CHECK(std::abs(b.mass_of("A") - b.mass_of("C")) < 1e-9);
}

TEST_CASE("augment with empty history returns to the extended prior") {
  std::mt19937_64 rng(6);
  PrincipleRegistry reg;
  ExpertBank bank;
  reg.add(principle("A", random_unit(rng, 6)));
  bank.fit(reg.at("A"), {});
  const BeliefState b = augment(reg, bank, principle("B", random_unit(rng, 6)), {}, 0.0025);
  CHECK(b.masses[0] == doctest::Approx(0.5));
  CHECK(b.masses[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(augment(reg, bank, principle("B", random_unit(rng, 6)), {}, 0.0025), ValidationError);
}

TEST_CASE("augment equals a from-scratch update over the extended set") {
  std::mt19937_64 rng(7);
  const std::size_t d = 10;
  const UnitVector truth = random_unit(rng, d);
  const auto hist = history_for(rng, truth, 12, d);
  PrincipleRegistry reg;
  ExpertBank bank;
  reg.add(principle("A", random_unit(rng, d)));
  reg.add(principle("B", random_unit(rng, d)));
  bank.refit_all(reg, hist);
  const Principle extra = principle("C", truth, 3);
  const BeliefState incremental = augment(reg, bank, extra, hist, 0.0025, 3);

  PrincipleRegistry reg2;
  ExpertBank bank2;
  for (const auto& p : reg.principles()) reg2.add(p);
  bank2.refit_all(reg2, hist);
  const BeliefState scratch = update_posterior(reg2, bank2, hist, 0.0025, 3);
  REQUIRE(incremental.masses.size() == scratch.masses.size());
  for (std::size_t i = 0; i < scratch.masses.size(); ++i) {
    CHECK(std::abs(incremental.masses[i] - scratch.masses[i]) < 1e-12);
  }
}

TEST_CASE("posterior favors the generating principle") {
  std::mt19937_64 rng(8);
  const std::size_t d = 16;
  const UnitVector truth = random_unit(rng, d);
  const auto hist = history_for(rng, truth, 30, d);
  PrincipleRegistry reg;
  ExpertBank bank;
  reg.add(principle("T", truth));
  reg.add(principle("W", random_unit(rng, d)));
  bank.refit_all(reg, hist);
  const BeliefState b = update_posterior(reg, bank, hist, 0.0025);
  CHECK(b.mass_of("T") > 0.5);
}

TEST_CASE("posterior is invariant under a rotation of the embedding space") {
  std::mt19937_64 rng(9);
  const std::size_t d = 8;
  const UnitVector truth = random_unit(rng, d);
  const auto hist = history_for(rng, truth, 10, d);
  const UnitVector u = random_unit(rng, d);
  PrincipleRegistry reg, reg_r;
  ExpertBank bank, bank_r;
  const UnitVector other = random_unit(rng, d);
  reg.add(principle("T", truth));
  reg.add(principle("W", other));
  reg_r.add(principle("T", reflect(truth, u)));
  reg_r.add(principle("W", reflect(other, u)));
  std::vector<Observation> hist_r = hist;
  for (auto& o : hist_r) o.embedding = reflect(o.embedding, u);
  bank.refit_all(reg, hist);
  bank_r.refit_all(reg_r, hist_r);
  const BeliefState a = update_posterior(reg, bank, hist, 0.0025);
  const BeliefState b = update_posterior(reg_r, bank_r, hist_r, 0.0025);
  for (std::size_t i = 0; i < a.masses.size(); ++i) CHECK(a.masses[i] == doctest::Approx(b.masses[i]).epsilon(1e-9));
}

TEST_CASE("update rejects bad inputs") {
  PrincipleRegistry reg;
  ExpertBank bank;
  CHECK_THROWS_AS(update_posterior(reg, bank, {}, 0.0025), ValidationError);
  std::mt19937_64 rng(10);
  reg.add(principle("A", random_unit(rng, 4)));
  CHECK_THROWS_AS(update_posterior(reg, bank, {}, 0.0025), ValidationError);  // no expert
  bank.fit(reg.at("A"), {});
  CHECK_THROWS_AS(update_posterior(reg, bank, {}, 0.0), ValidationError);
}

}  // TEST_SUITE
