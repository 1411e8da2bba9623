#include "churnemb/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace churnemb {

int split_boundary(std::vector<int> days, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw SplitError("train fraction must lie strictly between 0 and 1");
  }
  std::sort(days.begin(), days.end());
  days.erase(std::unique(days.begin(), days.end()), days.end());
  const auto n = static_cast<long>(days.size());
  if (n < 2) throw SplitError("chronological split needs at least two distinct days");
  // The small slack keeps e.g. 2/3 * 9 from rounding up to 7.
  long k = static_cast<long>(std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
  k = std::clamp(k, 1L, n - 1);
  return days[static_cast<std::size_t>(k)];
}

double auc(std::span<const ScoredExample> scored) {
  std::vector<std::pair<double, int>> v;
  v.reserve(scored.size());
  long long pos = 0;
  for (const auto& s : scored) {
    if (!std::isfinite(s.score)) throw ContractViolation("non-finite score");
    v.emplace_back(s.score, s.label);
    pos += s.label == 1 ? 1 : 0;
  }
  const long long neg = static_cast<long long>(v.size()) - pos;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("AUC needs both classes");
  std::sort(v.begin(), v.end());
  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < v.size()) {
    std::size_t j = i;
    long long p = 0;
    while (j < v.size() && v[j].first == v[i].first) p += v[j++].second == 1 ? 1 : 0;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    rank_sum += avg_rank * static_cast<double>(p);
    i = j;
  }
  const double u = rank_sum - static_cast<double>(pos) * static_cast<double>(pos + 1) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

PrecisionRecall precision_recall(std::span<const ScoredExample> scored, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ContractViolation("threshold must be in (0, 1)");
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  for (const auto& s : scored) {
    const bool predicted = s.score >= threshold;
    if (predicted && s.label == 1) ++tp;
    else if (predicted) ++fp;
    else if (s.label == 1) ++fn;
  }
  if (tp + fn == 0) throw UndefinedMetricError("recall undefined without positive labels");
  PrecisionRecall out;
  out.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return out;
}

std::vector<RocPoint> roc_curve(std::span<const ScoredExample> scored) {
  std::vector<ScoredExample> v(scored.begin(), scored.end());
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  double pos = 0;
  double neg = 0;
  for (const auto& s : v) (s.label == 1 ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw UndefinedMetricError("ROC needs both classes");
  std::vector<RocPoint> out{{1.0 + 1e-12, 0.0, 0.0}};
  double tp = 0;
  double fp = 0;
  for (std::size_t i = 0; i < v.size();) {
    const double t = v[i].score;
    while (i < v.size() && v[i].score == t) (v[i++].label == 1 ? tp : fp) += 1;
    out.push_back({t, fp / neg, tp / pos});
  }
  return out;
}

void write_roc_csv(std::ostream& out, std::span<const RocPoint> points) {
  out << "threshold,fpr,tpr\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g\n", p.threshold, p.fpr, p.tpr);
    out << buf;
  }
}

double LogisticModel::score(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  if (z.size() != weights.size()) throw DimensionError("logistic model input width");
  return sigmoid(weights.dot(z) + bias);
}

namespace {

struct Objective {
  const Eigen::MatrixXd& x;  // d x n
  const Eigen::VectorXd& y;
  double l2;

  double value(const Eigen::VectorXd& w, double b) const {
    const Eigen::VectorXd s = (x.transpose() * w).array() + b;
    double v = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      // -[y log sig(s) + (1-y) log sig(-s)]
      v -= y[i] * log_sigmoid(s[i]) + (1.0 - y[i]) * log_sigmoid(-s[i]);
    }
    return v + 0.5 * l2 * w.squaredNorm();
  }

  void gradient(const Eigen::VectorXd& w, double b, Eigen::VectorXd& gw, double& gb) const {
    Eigen::VectorXd r = (x.transpose() * w).array() + b;
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = sigmoid(r[i]) - y[i];
    gw = x * r + l2 * w;
    gb = r.sum();
  }
};

}  // namespace

LogisticModel fit_logistic(std::span<const Eigen::VectorXd> z, std::span<const int> labels,
                           const LogisticOptions& options) {
  if (z.empty() || z.size() != labels.size()) {
    throw ContractViolation("logistic fit needs matching, non-empty inputs");
  }
  const auto d = z.front().size();
  Eigen::MatrixXd x(d, static_cast<Eigen::Index>(z.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(z.size()));
  int pos = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i].size() != d) throw DimensionError("logistic inputs differ in width");
    x.col(static_cast<Eigen::Index>(i)) = z[i];
    y[static_cast<Eigen::Index>(i)] = labels[i];
    pos += labels[i] == 1 ? 1 : 0;
  }
  if (pos == 0 || pos == static_cast<int>(z.size())) {
    throw ContractViolation("logistic fit needs both classes in the training set");
  }
  const Objective obj{x, y, options.l2};
  LogisticModel m{Eigen::VectorXd::Zero(d), 0.0};
  double f = obj.value(m.weights, m.bias);
  double step = 1.0 / static_cast<double>(z.size());
  Eigen::VectorXd gw;
  double gb = 0.0;
  for (int it = 0; it < options.max_iter; ++it) {
    obj.gradient(m.weights, m.bias, gw, gb);
    const double gnorm2 = gw.squaredNorm() + gb * gb;
    if (std::sqrt(gnorm2) <= options.tolerance * static_cast<double>(z.size())) break;
    // Armijo backtracking; the step grows again after each success.
    step *= 2.0;
    for (;;) {
      const Eigen::VectorXd w = m.weights - step * gw;
      const double b = m.bias - step * gb;
      const double fn = obj.value(w, b);
      if (fn <= f - 0.5 * step * gnorm2 || step < 1e-20) {
        m.weights = w;
        m.bias = b;
        f = fn;
        break;
      }
      step *= 0.5;
    }
  }
  return m;
}

std::vector<ScoredExample> lr_baseline(std::span<const TrainingExample> train,
                                       std::span<const TrainingExample> test,
                                       const LogisticOptions& options) {
  std::vector<Eigen::VectorXd> z;
  std::vector<int> y;
  for (const auto& ex : train) {
    if (ex.delta_next != 1) continue;
    z.push_back(ex.z);
    y.push_back(ex.label);
  }
  if (z.empty()) throw EmptyDatasetError("no labelled training examples for the LR baseline");
  const LogisticModel model = fit_logistic(z, y, options);
  std::vector<ScoredExample> out;
  for (const auto& ex : test) {
    if (ex.delta_next != 1) continue;
    out.push_back({model.score(ex.z), ex.label, ex.day});
  }
  return out;
}

std::vector<ScoredExample> score_examples(const ModelParams& params,
                                          std::span<const TrainingExample> examples) {
  std::vector<const TrainingExample*> kept;
  for (const auto& ex : examples) {
    if (ex.delta_next == 1) kept.push_back(&ex);
  }
  std::vector<ScoredExample> out;
  if (kept.empty()) return out;
  Eigen::MatrixXd z(params.embed.input_dim(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (kept[i]->z.size() != z.rows()) throw DimensionError("example z width");
    z.col(static_cast<Eigen::Index>(i)) = kept[i]->z;
  }
  const Eigen::VectorXd s = predict_churn_batch(params, z);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    out.push_back({s[static_cast<Eigen::Index>(i)], kept[i]->label, kept[i]->day});
  }
  return out;
}

MetricsRow metrics_row(const std::string& model, std::span<const ScoredExample> scored,
                       double threshold) {
  const auto pr = precision_recall(scored, threshold);
  return {model, auc(scored), pr.recall, pr.precision};
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRow> rows) {
  out << "model,auc,recall,precision\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f\n", r.model.c_str(), r.auc, r.recall,
                  r.precision);
    out << buf;
  }
}

}  // namespace churnemb
