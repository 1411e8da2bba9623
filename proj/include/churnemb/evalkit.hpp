#pragma once

#include "churnemb/churnmodel.hpp"
#include "churnemb/errors.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace churnemb {

struct ScoredExample {
  double score = 0.0;
  int label = 0;  // 1 = churn
  int day = 0;
};

// Splits by distinct day: the first ceil(fraction * #days) days go to train.
// Works for anything with an int `day` member.
template <class Example>
std::pair<std::vector<Example>, std::vector<Example>> chronological_split(
    std::span<const Example> examples, double train_fraction);

// First day of the test side for the given set of days.
int split_boundary(std::vector<int> days, double train_fraction);

// Mann-Whitney AUC, ties count one half.
double auc(std::span<const ScoredExample> scored);

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
};

PrecisionRecall precision_recall(std::span<const ScoredExample> scored, double threshold = 0.5);

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

std::vector<RocPoint> roc_curve(std::span<const ScoredExample> scored);
void write_roc_csv(std::ostream& out, std::span<const RocPoint> points);

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double score(const Eigen::Ref<const Eigen::VectorXd>& z) const;
};

struct LogisticOptions {
  double l2 = 1.0;  // penalty l2/2 * |w|^2 on the summed log loss; bias is free
  int max_iter = 2000;
  double tolerance = 1e-8;
};

// Full-batch gradient descent with backtracking on the regularized log loss.
LogisticModel fit_logistic(std::span<const Eigen::VectorXd> z, std::span<const int> labels,
                           const LogisticOptions& options = {});

// Logistic regression on raw z of the labelled train examples, scored on test.
std::vector<ScoredExample> lr_baseline(std::span<const TrainingExample> train,
                                       std::span<const TrainingExample> test,
                                       const LogisticOptions& options = {});

// Model scores for labelled examples.
std::vector<ScoredExample> score_examples(const ModelParams& params,
                                          std::span<const TrainingExample> examples);

struct MetricsRow {
  std::string model;
  double auc = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

MetricsRow metrics_row(const std::string& model, std::span<const ScoredExample> scored,
                       double threshold = 0.5);
// `model,auc,recall,precision`
void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows);

// ---- template definitions ----

template <class Example>
std::pair<std::vector<Example>, std::vector<Example>> chronological_split(
    std::span<const Example> examples, double train_fraction) {
  std::vector<int> days;
  days.reserve(examples.size());
  for (const auto& ex : examples) days.push_back(ex.day);
  const int boundary = split_boundary(std::move(days), train_fraction);
  std::pair<std::vector<Example>, std::vector<Example>> out;
  for (const auto& ex : examples) (ex.day < boundary ? out.first : out.second).push_back(ex);
  return out;
}

}  // namespace churnemb
