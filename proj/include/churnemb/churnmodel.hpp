#pragma once

#include "churnemb/bigraph.hpp"
#include "churnemb/netcore.hpp"
#include "churnemb/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace churnemb {

struct ModelDims {
  int d = 0;             // raw edge feature length
  int m = 50;            // embedding width
  int l_p = 1;           // embedding layers
  int l_n = 1;           // prediction layers
  int pred_hidden = 50;  // width of every prediction layer
  int vocab = 0;         // context softmax rows

  void validate() const;
};

// g = embed (d -> m), f = sigmoid(w_s . pred(g)), and the context softmax rows.
// Row-major so that one context's weights are contiguous.
using ContextTable = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelParams {
  DenseStack embed;
  DenseStack pred;
  Eigen::VectorXd w_s;
  ContextTable ctx;  // vocab x m

  static ModelParams init(const ModelDims& dims, Rng& rng);
  ModelParams zeros_like() const;
  ModelDims dims() const;

  // Every trainable block: embed layers, pred layers, w_s, ctx.
  std::vector<std::span<double>> blocks();
  std::vector<std::size_t> block_sizes() const;
};

using ModelGrads = ModelParams;

struct LossWeights {
  double alpha = 0.02;
  double beta = 0.01;
  double gamma = 1e-5;
  std::array<double, 5> lambda{1.0, 1.0, 1.0, 1.0, 1.0};

  void validate() const;
};

// One (edge, day i) instance.
struct TrainingExample {
  EdgeKey edge;
  int day = 0;
  Eigen::VectorXd z;  // z^(i)
  std::optional<Eigen::VectorXd> z_next;  // z^(i+1), set when in_d
  std::optional<Eigen::VectorXd> z_tuv;   // z^(t_uv)
  std::optional<int> t_uv;

  int label = 0;       // 1 = churn; defined only when delta_next == 1
  int delta_next = 1;  // outcome of e^(i+1) is determinable
  int delta_curr = 1;  // gates the context terms of this example
  bool in_d = false;   // edge in E^(i) and E^(i+1)
  // Censoring indicator used by the temporal hinge: 1 compares against
  // f(z^(i)), 0 against f(z^(t_uv)).
  int delta_hinge = 1;

  // Provenance for leakage checks: the newest feature day read for z, and the
  // play-record window that decided the label.
  int feature_day = 0;
  int label_window_begin = 0;
  int label_window_end = 0;

  std::vector<int> context_ids;
  std::vector<std::vector<int>> negative_ids;  // one list per context id
};

Eigen::VectorXd embed_edge(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& z);
double predict_churn(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& z);
// Scores for a batch laid out one edge per column.
Eigen::VectorXd predict_churn_batch(const ModelParams& params,
                                    const Eigen::Ref<const Eigen::MatrixXd>& z);

double sigmoid(double x);
double log_sigmoid(double x);

struct SupervisedLoss {
  double value = 0.0;
  int count = 0;  // examples with delta_next == 1
  bool all_censored() const { return count == 0; }
};

SupervisedLoss supervised_loss(const ModelParams& params, std::span<const TrainingExample> batch);

enum class ContextMode { NegativeSampling, FullSoftmax };

// Largest vocabulary the exact softmax mode accepts.
inline constexpr int kFullSoftmaxLimit = 64;

double context_log_likelihood(const ModelParams& params,
                              const Eigen::Ref<const Eigen::VectorXd>& embedding, int ctx_id,
                              std::span<const int> negative_ids,
                              ContextMode mode = ContextMode::NegativeSampling);

double unsupervised_loss(const ModelParams& params, std::span<const TrainingExample> batch,
                         ContextMode mode = ContextMode::NegativeSampling);
double temporal_loss(const ModelParams& params, std::span<const TrainingExample> batch);
// One in_d example's share: |g_next - g_i| + max(0, f_ref - f_next).
double temporal_term(const Eigen::Ref<const Eigen::VectorXd>& g_i,
                     const Eigen::Ref<const Eigen::VectorXd>& g_next, double f_ref, double f_next);
double regularization_loss(const ModelParams& params, const LossWeights& weights);

struct LossBreakdown {
  double total = 0.0;
  double supervised = 0.0;
  double unsupervised = 0.0;
  double temporal = 0.0;
  double regularization = 0.0;
  int supervised_count = 0;
};

// How L_U and L_T enter the total. Sum uses them as plain sums over the batch;
// PerTerm divides each by the number of terms it sums (log-sigmoid terms, or
// log-softmax terms in the exact mode, for L_U; in_d examples for L_T), the
// same way L_S is an average over labelled examples.
enum class LossScaling { Sum, PerTerm };

struct LossOptions {
  ContextMode context_mode = ContextMode::NegativeSampling;
  LossScaling scaling = LossScaling::PerTerm;
  // Terms to differentiate. Values of all terms are reported regardless.
  bool supervised = true;
  bool unsupervised = true;
  bool temporal = true;
  bool regularization = true;
};

// L = L_S + alpha L_U + beta L_T + gamma L_R with exact gradients. The
// unsupervised and temporal fields of the result are scaled as options.scaling
// says; unsupervised_loss() and temporal_loss() above are the plain sums. Throws
// DivergenceError when the loss is not finite.
LossBreakdown total_loss_and_grads(const ModelParams& params,
                                   std::span<const TrainingExample> batch,
                                   const LossWeights& weights, ModelGrads& grads,
                                   const LossOptions& options = {});

// As above but adds into `grads`, which must already have the model's shape.
// Lets a caller clear only the context rows it knows were touched.
LossBreakdown accumulate_loss_and_grads(const ModelParams& params,
                                        std::span<const TrainingExample> batch,
                                        const LossWeights& weights, ModelGrads& grads,
                                        const LossOptions& options = {});

// Same value without gradients.
LossBreakdown total_loss(const ModelParams& params, std::span<const TrainingExample> batch,
                         const LossWeights& weights, const LossOptions& options = {});

// Rows of the context table that can receive gradient from this batch, sorted.
std::vector<int> touched_context_rows(std::span<const TrainingExample> batch, int vocab,
                                      ContextMode mode);

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(std::ostream& out, const ModelParams& params);
ModelParams load_checkpoint(std::istream& in);

}  // namespace churnemb
