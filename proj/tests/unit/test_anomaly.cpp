#include <cmath>
#include <random>

#include <doctest.h>

#include "evobo/anomaly.hpp"
#include "evobo/errors.hpp"

using namespace evobo;

namespace {

UnitVector unit(std::vector<double> v) { return UnitVector::normalized(std::move(v)); }

struct fixture {
  Principle p{"P000", "map statement", unit({1.0, 0.0, 0.0}), 0, PrincipleOrigin::initial, 1.0};
  std::vector<Observation> hist;
  GpExpert expert;
};

fixture smooth_fixture(int n, std::uint64_t seed) {
  fixture f;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (int i = 0; i < n; ++i) {
    UnitVector e = unit({g(rng), g(rng), g(rng)});
    f.hist.push_back({"h" + std::to_string(i), e, e[0], i, false});
  }
  f.expert = GpExpert::fit(training_set(f.p, f.hist));
  return f;
}

}  // namespace

TEST_SUITE("anomaly") {

TEST_CASE("score hand values") {
  CHECK(anomaly_score(1.5, 1.5, 0.3, 0.01) == 0.0);
  CHECK(std::abs(anomaly_score(2.0, 1.0, 0.75, 0.25) - (1.0 - std::exp(-1.0))) < 1e-12);
  CHECK(std::abs(anomaly_score(0.0, 1.0, 0.75, 0.25) - 0.6321206) < 1e-7);
  CHECK(std::abs(anomaly_score(3.0, 1.0, 0.9, 0.1) - (1.0 - std::exp(-2.0))) < 1e-12);
  CHECK(std::abs(anomaly_score(3.0, 1.0, 0.9, 0.1) - 0.8646647) < 1e-7);
  CHECK(std::abs(anomaly_score(5.0, 1.0, 0.9, 0.1) - (1.0 - std::exp(-4.0))) < 1e-12);
}

TEST_CASE("score monotonicity and bounds") {
  double prev = -1.0;
  for (double r = 0.0; r < 30.0; r += 0.5) {
    const double s = anomaly_score(r, 0.0, 1.0, 0.0025);
    CHECK(s >= 0.0);
    CHECK(s < 1.0);
    CHECK(s > prev);
    prev = s;
  }
  CHECK(anomaly_score(1.0, 0.0, 0.5, 0.01) > anomaly_score(1.0, 0.0, 1.0, 0.01));
  CHECK_THROWS_AS(anomaly_score(1.0, 0.0, 0.0, 0.0), ValidationError);
  CHECK_THROWS_AS(anomaly_score(1.0, 0.0, -1.0, 0.5), ValidationError);
}

TEST_CASE("analytic exceedance matches a normal tail") {
  CHECK(score_exceedance_probability(0.8) == doctest::Approx(std::erfc(std::log(5.0) / std::sqrt(2.0))));
}

TEST_CASE("empty history is not triggered") {
  fixture f = smooth_fixture(3, 1);
  const AnomalySet s = detect(std::span<const Observation>{}, f.expert, f.p, 0.8, 3, 0.0025);
  CHECK(s.records.empty());
  CHECK_FALSE(s.triggered);
}

TEST_CASE("outcomes at the predictive mean are never flagged") {
  fixture f = smooth_fixture(8, 2);
  std::vector<Observation> at_mean = f.hist;
  for (auto& o : at_mean) o.y = f.expert.predict(pair_features(o.embedding, f.p.embedding)).mean;
  const AnomalySet s = detect(at_mean, f.expert, f.p, 0.5, 1, 0.0025);
  CHECK(s.records.empty());
  CHECK_FALSE(s.triggered);
}

TEST_CASE("one constructed record at score 0.95 triggers with count 1") {
  fixture f = smooth_fixture(8, 3);
  std::vector<Observation> h{f.hist[0]};
  const Prediction p = f.expert.predict(pair_features(h[0].embedding, f.p.embedding));
  const double total = p.variance + 0.0025;
  h[0].y = p.mean + (-std::log(1.0 - 0.95)) * std::sqrt(total);
  const AnomalySet s = detect(h, f.expert, f.p, 0.8, 1, 0.0025);
  REQUIRE(s.records.size() == 1);
  CHECK(s.triggered);
  CHECK(s.records[0].hypothesis_id == h[0].hypothesis_id);
  CHECK(s.records[0].score == doctest::Approx(0.95).epsilon(1e-12));
}

TEST_CASE("near-one threshold flags no more than the tail rate") {
  fixture f = smooth_fixture(10, 4);
  std::mt19937_64 rng(44);
  std::normal_distribution<double> z;
  std::vector<Observation> h;
  for (int i = 0; i < 1000; ++i) {
    Observation o = f.hist[static_cast<std::size_t>(i % 10)];
    o.hypothesis_id = "s" + std::to_string(i);
    const Prediction p = f.expert.predict(pair_features(o.embedding, f.p.embedding));
    o.y = p.mean + std::sqrt(p.variance + 0.0025) * z(rng);
    h.push_back(o);
  }
  const AnomalySet s = detect(h, f.expert, f.p, 0.999, 3, 0.0025);
  CHECK(s.records.size() <= 3);
  CHECK_FALSE(s.triggered);
}

TEST_CASE("records are sorted and depend only on residuals") {
  fixture f = smooth_fixture(12, 5);
  std::vector<Observation> h = f.hist;
  for (std::size_t i = 0; i < h.size(); ++i) h[i].y += (i % 3 == 0) ? 3.0 : 0.0;
  const AnomalySet a = detect(h, f.expert, f.p, 0.5, 2, 0.0025);
  std::vector<Observation> rev(h.rbegin(), h.rend());
  const AnomalySet b = detect(rev, f.expert, f.p, 0.5, 2, 0.0025);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].hypothesis_id == b.records[i].hypothesis_id);
    if (i > 0) CHECK(a.records[i - 1].score >= a.records[i].score);
  }
  CHECK(a.triggered);
}

TEST_CASE("adaptive policy floors the percentile threshold") {
  fixture f = smooth_fixture(12, 6);
  ThresholdPolicy pol;
  pol.adaptive = true;
  pol.floor = 0.5;
  pol.count_threshold = 1;
  const AnomalySet s = detect(f.hist, f.expert, f.p, pol, 0.0025, 12);
  CHECK(s.threshold_used >= 0.5);
  CHECK_THROWS_AS(detect(f.hist, f.expert, f.p, 1.0, 1, 0.0025), ValidationError);
  CHECK_THROWS_AS(detect(f.hist, f.expert, f.p, 0.8, 0, 0.0025), ValidationError);
}

}  // TEST_SUITE
