#include "churnemb/errors.hpp"
#include "churnemb/pipeline.hpp"
#include "churnemb/synthgen.hpp"
#include "support.hpp"

#include "doctest.h"

#include <sstream>

using namespace churnemb;

TEST_SUITE("pipeline") {

TEST_CASE("split keeps training reads before the boundary") {
  Rng rng(41);
  const auto schema = FeatureSchema::uniform(2, 2);
  for (int rep = 0; rep < 100; ++rep) {
    const auto s = testing::random_series(rng, {.days = 24});
    const auto split = split_series(s, schema, WalkConfig{}, 5, 2.0 / 3.0);
    int max_train = -1, min_test = 1 << 30;
    for (const auto& ex : split.train.examples) {
      max_train = std::max(max_train, ex.day);
      CHECK(ex.feature_day < split.boundary);
      if (ex.delta_next == 1) CHECK(ex.label_window_end < split.boundary);
    }
    for (const auto& ex : split.test) {
      min_test = std::min(min_test, ex.day);
      CHECK(ex.delta_next == 1);
    }
    CHECK(max_train < min_test);
    CHECK(min_test >= split.boundary);
  }
}

TEST_CASE("evaluation reports SS, RS and LR") {
  SynthConfig c;
  c.n_players = 60;
  c.n_games = 30;
  c.days = 60;
  c.window = 7;
  const auto syn = generate(c);
  TrainConfig t;
  t.epochs = 2;
  t.batch_size = 128;
  t.m = 8;
  t.pred_hidden = 8;
  const auto r = evaluate_series(syn.series, synth_schema(c), t);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[0].model == "SS");
  CHECK(r.rows[1].model == "RS");
  CHECK(r.rows[2].model == "LR");
  CHECK(r.ss.size() == r.test_examples);
  for (const auto& row : r.rows) {
    CHECK(row.auc >= 0.0);
    CHECK(row.auc <= 1.0);
  }
}

TEST_CASE("examples jsonl round-trip") {
  Rng rng(42);
  const auto s = testing::random_series(rng);
  const auto data = build_examples(s, FeatureSchema::uniform(2, 2), WalkConfig{}, 1);
  std::stringstream ss;
  write_examples_jsonl(ss, data.examples);
  const auto back = read_examples_jsonl(ss);
  REQUIRE(back.size() == data.examples.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    const auto& a = data.examples[i];
    const auto& b = back[i];
    CHECK(a.edge == b.edge);
    CHECK(a.day == b.day);
    CHECK(a.z == b.z);
    CHECK(a.z_next == b.z_next);
    CHECK(a.z_tuv == b.z_tuv);
    CHECK(a.t_uv == b.t_uv);
    CHECK(a.label == b.label);
    CHECK(a.delta_next == b.delta_next);
    CHECK(a.delta_hinge == b.delta_hinge);
    CHECK(a.in_d == b.in_d);
    CHECK(a.context_ids == b.context_ids);
    CHECK(a.negative_ids == b.negative_ids);
  }
}

}
