#pragma once

#include "churnemb/evalkit.hpp"
#include "churnemb/trainer.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace churnemb {

struct EvaluationOptions {
  double train_fraction = 2.0 / 3.0;
  double threshold = 0.5;
  bool include_rs = true;
  bool include_lr = true;
  ProgressFn progress;
};

struct EvaluationResult {
  int boundary = 0;  // first test day
  std::size_t train_examples = 0;
  std::size_t test_examples = 0;
  int vocab_size = 0;
  std::vector<MetricsRow> rows;  // SS (or RS when alpha = beta = 0), RS, LR
  std::vector<ScoredExample> ss;
  std::vector<ScoredExample> rs;
  std::vector<ScoredExample> lr;
  TrainReport ss_report;
};

// Chronological evaluation. Example days are split at a boundary day; the
// training side is rebuilt from the history truncated before the boundary, so
// no training label or context reads a play on or after it. Test examples are
// the labelled full-history examples from the boundary on, scored from z alone.
EvaluationResult evaluate_series(const SnapshotSeries& series, const FeatureSchema& schema,
                                 const TrainConfig& cfg, const EvaluationOptions& options = {});

// Same split as evaluate_series, exposed for inspection.
struct SplitData {
  int boundary = 0;
  Dataset train;
  std::vector<TrainingExample> test;
};

SplitData split_series(const SnapshotSeries& series, const FeatureSchema& schema,
                       const WalkConfig& walk, std::uint64_t seed, double train_fraction);

// Line formats used by the command-line tool.
void write_examples_jsonl(std::ostream& out, std::span<const TrainingExample> examples);
std::vector<TrainingExample> read_examples_jsonl(std::istream& in);
void write_vocab_csv(std::ostream& out, const ContextVocabulary& vocab);

}  // namespace churnemb
