#include "churnemb/errors.hpp"
#include "churnemb/synthgen.hpp"
#include "churnemb/trainer.hpp"

#include "doctest.h"

using namespace churnemb;

TEST_SUITE("synthgen") {

TEST_CASE("hazard solver") {
  const double h = solve_daily_hazard(0.05, 40);
  CHECK(h == doctest::Approx(0.0721575).epsilon(1e-6));
  CHECK(std::pow(1 - h, 40) == doctest::Approx(0.05));
  const double g = solve_daily_hazard(0.05, 40, 1.1);
  double s = 1.0;
  for (int k = 0; k < 40; ++k) s *= 1 - g * std::pow(1.1, k);
  CHECK(s == doctest::Approx(0.05).epsilon(1e-9));
  CHECK_THROWS_AS(solve_daily_hazard(1.5, 40), ConfigError);
  CHECK_THROWS_AS(solve_daily_hazard(0.05, 0), ConfigError);
}

TEST_CASE("calibrated retention without affinity") {
  // 2000 players give ~8000 relationships, so sampling noise (about 0.006 at
  // s = 0.5) stays well inside the tolerance.
  SynthConfig c;
  c.n_players = 2000;
  c.hazard_growth = 1.0;
  c.daily_hazard = solve_daily_hazard(0.05, 40);
  c.affinity_strength = 0.0;
  const auto r = generate(c);
  CHECK(r.relationships.size() > 6000);
  double worst = 0.0;
  for (const auto& row : r.survival) {
    worst = std::max(worst, std::abs(row.empirical - std::pow(1 - c.daily_hazard, row.age)));
  }
  CHECK(worst < 0.02);
  CHECK(r.survival[40].expected == doctest::Approx(0.05));
}

TEST_CASE("empirical survival tracks the closed form with affinity") {
  SynthConfig c;
  c.n_players = 2000;
  const auto r = generate(c);
  for (const auto& row : r.survival) CHECK(std::abs(row.empirical - row.expected) < 0.02);
  // Better matched pairs live longer.
  CHECK(survival_probability(c, 1.0, 30) > survival_probability(c, 0.0, 30));
  CHECK(survival_probability(c, 0.0, 40) == doctest::Approx(0.05).epsilon(1e-3));
}

TEST_CASE("schema dimensions follow the options") {
  SynthConfig c;
  c.tenure_features = false;
  CHECK(c.d() == c.trait_groups);
  CHECK(c.n_u() == c.trait_groups * c.trait_width);
  c.tenure_features = true;
  CHECK(c.buckets() == 16);
  CHECK(c.d() == c.trait_groups + 2);
  c.history_features = true;
  CHECK(c.d() == c.trait_groups + 4);
  const auto schema = synth_schema(c);
  CHECK(schema.d() == c.d());
  CHECK(schema.n_u == c.n_u());
  CHECK(schema.n_v == c.n_v());
  schema.validate();
}

TEST_CASE("generation is deterministic and self-consistent") {
  SynthConfig c;
  c.n_players = 60;
  c.n_games = 30;
  c.days = 50;
  c.history_features = true;
  const auto a = generate(c);
  const auto b = generate(c);
  CHECK(a.series.records().size() == b.series.records().size());
  CHECK(a.series.pairs() == b.series.pairs());
  CHECK(a.series.features_at(NodeId::player(3), 20) == b.series.features_at(NodeId::player(3), 20));
  a.series.validate();
  for (const auto& rel : a.relationships) CHECK(rel.lifetime >= 1);
  // Every pair on every edge day has features the schema can read.
  const auto schema = synth_schema(c);
  for (const auto& e : a.series.edges_at(25)) {
    const auto z = edge_vector(a.series, schema, e, 25);
    CHECK(z.size() == c.d());
    CHECK(z.allFinite());
  }
  c.seed = 2;
  CHECK(generate(c).series.records().size() != a.series.records().size());
}

TEST_CASE("tenure features place live pairs on a ring") {
  SynthConfig c;
  c.n_players = 30;
  c.n_games = 8;
  c.days = 40;
  const auto r = generate(c);
  const auto schema = synth_schema(c);
  const int cos_slot = c.trait_groups;
  for (const auto& e : r.series.edges_at(30)) {
    const auto z = edge_vector(r.series, schema, e, 30);
    const double radius = std::hypot(z[cos_slot], z[cos_slot + 1]);
    // Either the pair has started (on the ring) or it has not (at 0).
    CHECK((radius < 1e-12 || radius > 0.05));
    CHECK(radius <= 1.0 + 1e-12);
  }
}

TEST_CASE("config validation") {
  SynthConfig c;
  c.n_players = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SynthConfig{};
  c.tenure_period = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SynthConfig{};
  c.daily_hazard = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

}
