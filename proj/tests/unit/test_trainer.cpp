#include "churnemb/errors.hpp"
#include "churnemb/evalkit.hpp"
#include "churnemb/synthgen.hpp"
#include "churnemb/trainer.hpp"
#include "support.hpp"

#include "doctest.h"

#include <set>

using namespace churnemb;

namespace {

SynthConfig small_synth(std::uint64_t seed = 1) {
  SynthConfig s;
  s.n_players = 40;
  s.n_games = 20;
  s.days = 40;
  s.window = 5;
  s.seed = seed;
  return s;
}

TrainConfig small_train() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 64;
  c.m = 8;
  c.pred_hidden = 8;
  return c;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("examples read features only up to day i + 1") {
  Rng rng(21);
  const auto schema = FeatureSchema::uniform(2, 2);
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = testing::random_series(rng);
    const auto data = build_examples(s, schema, WalkConfig{}, 7);
    for (const auto& ex : data.examples) {
      CHECK(ex.feature_day == ex.day);
      CHECK(ex.label_window_begin == ex.day + 2);
      // Recomputing from a history that ends at i + 1 gives the same vectors.
      const auto cut = s.truncated(std::min(ex.day + 1, s.t_end()));
      CHECK(edge_vector(cut, schema, ex.edge, ex.day) == ex.z);
      if (ex.z_next) CHECK(edge_vector(cut, schema, ex.edge, ex.day + 1) == *ex.z_next);
      if (ex.z_tuv) CHECK(*ex.t_uv <= ex.day);
    }
  }
}

TEST_CASE("example flags follow the label definitions") {
  Rng rng(22);
  const auto s = testing::random_series(rng);
  const auto data = build_examples(s, FeatureSchema::uniform(2, 2), WalkConfig{}, 1);
  const int T = s.window();
  int labelled = 0, censored = 0;
  for (const auto& ex : data.examples) {
    CHECK(edge_exists(s, ex.edge, ex.day) == 1);
    const auto outcome = churn_label(s, ex.edge, ex.day);
    if (ex.delta_next == 1) {
      ++labelled;
      CHECK(ex.day + 1 + T <= s.t_end());
      CHECK(ex.label == outcome.churn());
    } else {
      ++censored;
    }
    CHECK(ex.in_d == (ex.day + 1 <= s.t_end() && edge_exists(s, ex.edge, ex.day + 1) == 1));
    CHECK(ex.context_ids.size() == ex.negative_ids.size());
    for (int id : ex.context_ids) CHECK(id < data.vocab.size());
  }
  CHECK(labelled > 0);
  CHECK(censored > 0);

  BuildOptions plain;
  plain.with_contexts = false;
  plain.first_day = 5;
  plain.last_day = 9;
  const auto sub = build_examples(s, FeatureSchema::uniform(2, 2), WalkConfig{}, 1, plain);
  CHECK(sub.vocab.size() == 0);
  for (const auto& ex : sub.examples) {
    CHECK(ex.day >= 5);
    CHECK(ex.day <= 9);
    CHECK(ex.context_ids.empty());
  }
  plain.first_day = 500;
  plain.last_day = 400;
  CHECK_THROWS_AS(build_examples(s, FeatureSchema::uniform(2, 2), WalkConfig{}, 1, plain),
                  EmptyDatasetError);
}

TEST_CASE("same seed, same losses") {
  const auto syn = generate(small_synth());
  const auto data = build_examples(syn.series, synth_schema(small_synth()), WalkConfig{}, 3);
  const auto cfg = small_train();
  const auto a = train(data.examples, data.vocab.size(), cfg);
  const auto b = train(data.examples, data.vocab.size(), cfg);
  REQUIRE(a.epochs.size() == 3);
  for (int e = 0; e < 3; ++e) {
    CHECK(a.epochs[e].loss.total == b.epochs[e].loss.total);
    CHECK(a.epochs[e].loss.unsupervised == b.epochs[e].loss.unsupervised);
  }
  auto other = cfg;
  other.seed = 2;
  const auto c = train(data.examples, data.vocab.size(), other);
  CHECK(c.epochs[0].loss.total != a.epochs[0].loss.total);
}

TEST_CASE("training lowers the loss and labels the run") {
  const auto syn = generate(small_synth(2));
  const auto data = build_examples(syn.series, synth_schema(small_synth(2)), WalkConfig{}, 3);
  auto cfg = small_train();
  cfg.epochs = 4;
  std::vector<EpochStats> seen;
  const auto r = train(data.examples, data.vocab.size(), cfg, [&](const EpochStats& s) { seen.push_back(s); });
  CHECK(seen.size() == 4);
  CHECK(r.label == "SS");
  CHECK(r.epochs.back().loss.total < r.epochs.front().loss.total);
  CHECK(r.epochs[1].lr == doctest::Approx(cfg.eta0 / 1.5));

  cfg.loss_weights.alpha = 0;
  cfg.loss_weights.beta = 0;
  CHECK(train(data.examples, data.vocab.size(), cfg).label == "RS");
}

TEST_CASE("modes agree on the supervised-only objective") {
  const auto syn = generate(small_synth(3));
  const auto data = build_examples(syn.series, synth_schema(small_synth(3)), WalkConfig{}, 3);
  auto cfg = small_train();
  cfg.loss_weights.alpha = 0;
  const auto co = train(data.examples, data.vocab.size(), cfg);
  cfg.mode = TrainMode::AlternateTrain;
  const auto alt = train(data.examples, data.vocab.size(), cfg);
  for (int e = 0; e < cfg.epochs; ++e) CHECK(co.epochs[e].loss.total == alt.epochs[e].loss.total);
}

TEST_CASE("alternate training runs both passes") {
  const auto syn = generate(small_synth(4));
  const auto data = build_examples(syn.series, synth_schema(small_synth(4)), WalkConfig{}, 3);
  auto cfg = small_train();
  cfg.mode = TrainMode::AlternateTrain;
  const auto r = train(data.examples, data.vocab.size(), cfg);
  CHECK(std::isfinite(r.epochs.back().loss.total));
  CHECK(parse_train_mode("co-train") == TrainMode::CoTrain);
  CHECK_THROWS_AS(parse_train_mode("both"), ConfigError);
}

TEST_CASE("divergence is reported with its epoch") {
  const auto syn = generate(small_synth(5));
  auto data = build_examples(syn.series, synth_schema(small_synth(5)), WalkConfig{}, 3);
  data.examples[0].z[0] = NAN;
  try {
    train(data.examples, data.vocab.size(), small_train());
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.epoch() == 0);
  }
}

TEST_CASE("config validation") {
  auto cfg = small_train();
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_train();
  cfg.loss_weights.alpha = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(train({}, 0, small_train()), EmptyDatasetError);
  CHECK(progress_header() == "epoch,loss_total,loss_s,loss_u,loss_t,loss_r,lr");
}

}
