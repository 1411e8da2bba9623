#pragma once

#include "churnemb/bigraph.hpp"
#include "churnemb/churnmodel.hpp"
#include "churnemb/ctxwalk.hpp"
#include "churnemb/edgefeat.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace churnemb {

struct Dataset {
  std::vector<TrainingExample> examples;
  ContextVocabulary vocab;
};

struct BuildOptions {
  bool with_contexts = true;
  // Supervise only examples whose whole outcome window [i+2, i+1+T] is
  // observed. Without this, "retained" is decidable near the end of the
  // history while "churned" is not, which biases the labelled set.
  bool full_window_labels = true;
  // Restrict example days to [first_day, last_day]; defaults to [t0, t_end - 1].
  std::optional<int> first_day;
  std::optional<int> last_day;
};

// One example per (day i, edge in E^(i)). z^(i) and z^(i+1) read node features
// at days i and i+1, both before the label window [i+2, i+1+T]. Contexts are
// sampled once here with a per-(day, edge) stream derived from `seed`.
// Throws EmptyDatasetError when no day has an edge.
Dataset build_examples(const SnapshotSeries& series, const FeatureSchema& schema,
                       const WalkConfig& walk, std::uint64_t seed,
                       const BuildOptions& options = {});

// Raw z for a (player, game) pair on a day, for scoring edges never trained on.
Eigen::VectorXd edge_vector(const SnapshotSeries& series, const FeatureSchema& schema,
                            const EdgeKey& edge, int day);

enum class TrainMode { CoTrain, AlternateTrain };

const char* to_string(TrainMode m);
TrainMode parse_train_mode(const std::string& s);

struct TrainConfig {
  int epochs = 6;
  int batch_size = 1024;
  double eta0 = 0.017;
  TrainMode mode = TrainMode::CoTrain;
  std::uint64_t seed = 1;
  LossWeights loss_weights;
  WalkConfig walk;
  int m = 50;
  int l_p = 1;
  int l_n = 1;
  int pred_hidden = 50;
  ContextMode context_mode = ContextMode::NegativeSampling;
  LossScaling scaling = LossScaling::PerTerm;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  // Batch losses averaged over the epoch, taken before each update.
  LossBreakdown loss;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  ModelParams params;
  // "RS" when alpha = beta = 0 (supervised component only), else "SS".
  std::string label;
};

using ProgressFn = std::function<void(const EpochStats&)>;

// Runs cfg.epochs epochs on a single shard. Throws DivergenceError carrying the
// failing epoch index when the loss or a gradient stops being finite.
TrainReport train(std::vector<TrainingExample> examples, int vocab_size,
                  const TrainConfig& cfg, const ProgressFn& progress = {},
                  const ModelParams* initial = nullptr);

// `epoch,loss_total,loss_s,loss_u,loss_t,loss_r,lr`
std::string progress_header();
std::string progress_line(const EpochStats& s);

}  // namespace churnemb
