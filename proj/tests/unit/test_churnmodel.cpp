#include "churnemb/churnmodel.hpp"
#include "churnemb/ctxwalk.hpp"
#include "churnemb/errors.hpp"
#include "support.hpp"

#include "doctest.h"

#include <sstream>

using namespace churnemb;

namespace {

double worst_gradient_error(ModelParams& p, const std::vector<TrainingExample>& batch,
                            const LossWeights& w, const LossOptions& o) {
  ModelGrads g;
  total_loss_and_grads(p, batch, w, g, o);
  auto pb = p.blocks();
  auto gb = g.blocks();
  double worst = 0.0;
  for (std::size_t k = 0; k < pb.size(); ++k) {
    const auto num = numeric_gradient([&] { return total_loss(p, batch, w, o).total; }, pb[k]);
    worst = std::max(worst, max_relative_error(num, gb[k]));
  }
  return worst;
}

}  // namespace

TEST_SUITE("churnmodel") {

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(3);
  auto p = testing::tiny_model(rng);
  const auto batch = testing::tiny_batch(rng);
  LossWeights w;
  w.alpha = 0.3;
  w.beta = 0.7;
  w.gamma = 0.1;
  for (auto mode : {ContextMode::NegativeSampling, ContextMode::FullSoftmax}) {
    for (auto scaling : {LossScaling::PerTerm, LossScaling::Sum}) {
      LossOptions o;
      o.context_mode = mode;
      o.scaling = scaling;
      CHECK(worst_gradient_error(p, batch, w, o) < 1e-4);
    }
  }
}

TEST_CASE("deeper stacks differentiate too") {
  Rng rng(8);
  ModelDims d;
  d.d = 5;
  d.m = 3;
  d.l_p = 2;
  d.l_n = 2;
  d.pred_hidden = 4;
  d.vocab = 8;
  auto p = ModelParams::init(d, rng);
  for (auto* s : {&p.embed, &p.pred}) {
    for (auto& l : s->layers) l.bias.setConstant(0.3);
  }
  const auto batch = testing::tiny_batch(rng, 5, 8);
  LossWeights w;
  w.alpha = 0.5;
  w.beta = 0.5;
  CHECK(worst_gradient_error(p, batch, w, {}) < 1e-4);
}

TEST_CASE("pieces add up to the total") {
  Rng rng(4);
  auto p = testing::tiny_model(rng);
  const auto batch = testing::tiny_batch(rng);
  LossWeights w;
  LossOptions o;
  o.scaling = LossScaling::Sum;
  const auto l = total_loss(p, batch, w, o);
  CHECK(l.supervised == doctest::Approx(supervised_loss(p, batch).value));
  CHECK(l.unsupervised == doctest::Approx(unsupervised_loss(p, batch)));
  CHECK(l.temporal == doctest::Approx(temporal_loss(p, batch)));
  CHECK(l.regularization == doctest::Approx(regularization_loss(p, w)));
  CHECK(l.total == doctest::Approx(l.supervised + w.alpha * l.unsupervised + w.beta * l.temporal +
                                   w.gamma * l.regularization));
}

TEST_CASE("accumulating twice doubles the gradient") {
  Rng rng(5);
  auto p = testing::tiny_model(rng);
  const auto batch = testing::tiny_batch(rng);
  ModelGrads once, twice = p.zeros_like();
  total_loss_and_grads(p, batch, LossWeights{}, once);
  accumulate_loss_and_grads(p, batch, LossWeights{}, twice);
  accumulate_loss_and_grads(p, batch, LossWeights{}, twice);
  CHECK((testing::flatten(twice) - 2 * testing::flatten(once)).cwiseAbs().maxCoeff() < 1e-12);
  ModelGrads wrong;
  CHECK_THROWS_AS(accumulate_loss_and_grads(p, batch, LossWeights{}, wrong), DimensionError);
}

TEST_CASE("supervised loss is the mean squared error over labelled examples") {
  auto p = testing::signed_identity();
  std::vector<TrainingExample> batch(3);
  batch[0].z = testing::scalar(testing::logit(0.2));
  batch[0].label = 1;
  batch[1].z = testing::scalar(testing::logit(0.7));
  batch[1].label = 0;
  batch[2].z = testing::scalar(testing::logit(0.9));
  batch[2].delta_next = 0;
  const auto l = supervised_loss(p, batch);
  CHECK(l.count == 2);
  CHECK(l.value == doctest::Approx((0.64 + 0.49) / 2));
  for (auto& ex : batch) ex.delta_next = 0;
  CHECK(supervised_loss(p, batch).all_censored());
  CHECK(supervised_loss(p, batch).value == 0.0);
}

TEST_CASE("censored labels do not move the supervised loss") {
  Rng rng(6);
  auto p = testing::tiny_model(rng);
  auto batch = testing::tiny_batch(rng);
  const auto base = total_loss(p, batch, LossWeights{});
  for (auto& ex : batch) {
    if (ex.delta_next == 0) ex.label = 1 - ex.label;
  }
  const auto flipped = total_loss(p, batch, LossWeights{});
  CHECK(flipped.supervised == base.supervised);
  CHECK(flipped.total == base.total);
}

TEST_CASE("temporal term cases") {
  const Eigen::VectorXd g = Eigen::VectorXd::Constant(3, 0.5);
  CHECK(temporal_term(g, g, 0.6, 0.4) == doctest::Approx(0.2));
  CHECK(temporal_term(g, g, 0.4, 0.6) == 0.0);
  const Eigen::VectorXd h = g + Eigen::VectorXd::Unit(3, 0) * 0.3;
  CHECK(temporal_term(g, h, 0.5, 0.5) == doctest::Approx(0.3));
}

TEST_CASE("temporal loss through a model") {
  auto p = testing::signed_identity();
  TrainingExample ex;
  ex.in_d = true;
  // Same z at i and i+1: nothing to penalize.
  ex.z = testing::scalar(0.8);
  ex.z_next = testing::scalar(0.8);
  const std::vector<TrainingExample> same{ex};
  CHECK(temporal_loss(p, same) == 0.0);

  // Past t_uv the hinge compares against f at t_uv: equal embeddings at i and
  // i+1, f(t_uv) = 0.6 and f(i+1) = 0.4.
  ex.z = testing::scalar(testing::logit(0.4));
  ex.z_next = ex.z;
  ex.delta_hinge = 0;
  ex.t_uv = 3;
  ex.z_tuv = testing::scalar(testing::logit(0.6));
  const std::vector<TrainingExample> censored{ex};
  CHECK(temporal_loss(p, censored) == doctest::Approx(0.2));
  ex.delta_hinge = 1;
  const std::vector<TrainingExample> plain{ex};
  CHECK(temporal_loss(p, plain) == 0.0);

  ex.delta_hinge = 0;
  ex.z_tuv.reset();
  const std::vector<TrainingExample> broken{ex};
  CHECK_THROWS_AS(temporal_loss(p, broken), ContractViolation);
}

TEST_CASE("temporal loss vanishes for a constant embedding") {
  // With a zero embedding layer g is the same for every z, so f is too.
  Rng rng(7);
  auto p = testing::tiny_model(rng);
  p.embed.layers[0].weight.setZero();
  const auto batch = testing::tiny_batch(rng);
  CHECK(temporal_loss(p, batch) == 0.0);
}

TEST_CASE("context log-likelihood values") {
  Rng rng(9);
  auto p = testing::tiny_model(rng, 6, 4, 4);
  p.ctx.setZero();
  const Eigen::VectorXd e = Eigen::VectorXd::Random(4);
  const std::vector<int> neg{1, 2};
  CHECK(context_log_likelihood(p, e, 0, neg) == doctest::Approx(3 * std::log(0.5)));
  CHECK(context_log_likelihood(p, e, 0, {}, ContextMode::FullSoftmax) == doctest::Approx(std::log(0.25)));
  CHECK_THROWS_AS(context_log_likelihood(p, e, 4, neg), RangeError);

  // Aligning the true row with the embedding raises the likelihood.
  const double before = context_log_likelihood(p, e, 0, neg);
  p.ctx.row(0) = e.transpose();
  CHECK(context_log_likelihood(p, e, 0, neg) > before);

  auto big = testing::tiny_model(rng, 6, 4, kFullSoftmaxLimit + 1);
  CHECK_THROWS_AS(context_log_likelihood(big, e, 0, {}, ContextMode::FullSoftmax), ContractViolation);
}

TEST_CASE("unsupervised loss skips examples without contexts") {
  Rng rng(10);
  auto p = testing::tiny_model(rng);
  auto batch = testing::tiny_batch(rng);
  for (auto& ex : batch) {
    ex.context_ids.clear();
    ex.negative_ids.clear();
  }
  CHECK(unsupervised_loss(p, batch) == 0.0);
  batch = testing::tiny_batch(rng);
  const double all = unsupervised_loss(p, batch);
  for (auto& ex : batch) ex.delta_curr = 0;
  CHECK(all > 0.0);
  CHECK(unsupervised_loss(p, batch) == 0.0);
}

TEST_CASE("regularization is squared L2 and skips the context table") {
  Rng rng(11);
  auto p = testing::tiny_model(rng);
  for (auto b : p.blocks()) std::fill(b.begin(), b.end(), 0.0);
  LossWeights w;
  CHECK(regularization_loss(p, w) == 0.0);
  p.w_s[0] = 2.0;
  p.ctx.setConstant(5.0);
  CHECK(regularization_loss(p, w) == 4.0);
  w.lambda[4] = 0.5;
  CHECK(regularization_loss(p, w) == 2.0);
}

TEST_CASE("touched context rows") {
  Rng rng(12);
  const auto batch = testing::tiny_batch(rng);
  const std::span<const TrainingExample> first(batch.data(), 1);
  CHECK(touched_context_rows(first, 8, ContextMode::NegativeSampling) == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(touched_context_rows(first, 8, ContextMode::FullSoftmax).size() == 8);
}

TEST_CASE("checkpoint round-trip is exact") {
  Rng rng(13);
  ModelDims d;
  d.d = 7;
  d.m = 5;
  d.l_p = 2;
  d.pred_hidden = 3;
  d.vocab = 11;
  const auto p = ModelParams::init(d, rng);
  std::stringstream ss;
  save_checkpoint(ss, p);
  const auto q = load_checkpoint(ss);
  CHECK(q.dims().l_p == 2);
  CHECK(q.dims().vocab == 11);
  auto a = p;
  auto b = q;
  CHECK(testing::flatten(a) == testing::flatten(b));
  const Eigen::VectorXd z = Eigen::VectorXd::Random(7);
  CHECK(predict_churn(p, z) == predict_churn(q, z));

  std::istringstream bad("not a checkpoint\n");
  CHECK_THROWS_AS(load_checkpoint(bad), ParseError);
}

TEST_CASE("batch scoring agrees with single scoring") {
  Rng rng(14);
  const auto p = testing::tiny_model(rng);
  const Eigen::MatrixXd z = Eigen::MatrixXd::Random(6, 9);
  const auto f = predict_churn_batch(p, z);
  for (int i = 0; i < 9; ++i) CHECK(f[i] == doctest::Approx(predict_churn(p, z.col(i))).epsilon(1e-14));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
}

}
