#include "churnemb/trainer.hpp"

#include "churnemb/errors.hpp"

#include <chrono>
#include <cstdio>
#include <map>

namespace churnemb {

Eigen::VectorXd edge_vector(const SnapshotSeries& series, const FeatureSchema& schema,
                            const EdgeKey& edge, int day) {
  return edge_features(series.features_at(edge.player_node(), day),
                       series.features_at(edge.game_node(), day), schema);
}

namespace {

constexpr std::uint64_t kContextStream = 0x43545857;   // contexts
constexpr std::uint64_t kNegativeStream = 0x4e454753;  // negatives
constexpr std::uint64_t kShuffleStream = 0x53485546;
constexpr std::uint64_t kInitStream = 0x494e4954;

}  // namespace

Dataset build_examples(const SnapshotSeries& series, const FeatureSchema& schema,
                       const WalkConfig& walk, std::uint64_t seed,
                       const BuildOptions& options) {
  schema.validate();
  if (options.with_contexts) walk.validate();
  series.validate();
  const int first = options.first_day.value_or(series.t0());
  const int last = std::min(options.last_day.value_or(series.t_end() - 1), series.t_end() - 1);
  const int T = series.window();

  Dataset out;
  // Context pairs per example before ids exist; ids are assigned in example order.
  std::vector<std::vector<ContextPair>> pending;
  std::map<EdgeKey, std::optional<int>> t_uv_cache;

  for (int i = std::max(first, series.t0()); i <= last; ++i) {
    const auto edges = series.edges_at(i);
    if (edges.empty()) continue;
    std::optional<Snapshot> snap;
    std::optional<AugmentedIndex> aug;
    if (options.with_contexts) {
      snap.emplace(Snapshot::from_series(series, i));
      aug.emplace(build_augmented_index(*snap, walk));
    }
    for (const auto& e : edges) {
      TrainingExample ex;
      ex.edge = e;
      ex.day = i;
      ex.z = edge_vector(series, schema, e, i);
      ex.feature_day = i;
      ex.label_window_begin = i + 2;
      ex.label_window_end = std::min(i + 1 + T, series.t_end());  // records actually read

      const LabelOutcome outcome = churn_label(series, e, i);
      const bool window_seen = i + 1 + T <= series.t_end();
      ex.delta_next = outcome.delta == 1 && (window_seen || !options.full_window_labels) ? 1 : 0;
      ex.label = ex.delta_next == 1 ? outcome.churn() : 0;

      auto it = t_uv_cache.find(e);
      if (it == t_uv_cache.end()) {
        it = t_uv_cache.emplace(e, find_last_observed_timestamp(series, e)).first;
      }
      ex.t_uv = it->second;

      ex.in_d = edge_exists(series, e, i + 1) == 1;
      if (ex.in_d) {
        ex.z_next = edge_vector(series, schema, e, i + 1);
        // Past t_uv the next-day outcome is unknown and the hinge compares
        // against f at t_uv instead. Edges never fully observed keep the plain
        // day-to-day comparison.
        if (ex.t_uv && i + 1 > *ex.t_uv) ex.delta_hinge = 0;
      }
      if (ex.t_uv && (ex.delta_hinge == 0 || ex.delta_next == 0)) {
        ex.z_tuv = edge_vector(series, schema, e, *ex.t_uv);
      }

      if (options.with_contexts) {
        Rng rng(derive_seed(seed, kContextStream, static_cast<std::uint64_t>(i),
                            EdgeKeyHash{}(e)));
        pending.push_back(sample_contexts(e, *snap, *aug, walk, rng));
      }
      out.examples.push_back(std::move(ex));
    }
  }
  if (out.examples.empty()) throw EmptyDatasetError("no edges in the requested day range");

  if (options.with_contexts) {
    for (std::size_t k = 0; k < out.examples.size(); ++k) {
      for (const auto& pair : pending[k]) out.examples[k].context_ids.push_back(out.vocab.add(pair));
    }
    if (out.vocab.size() >= 2) {
      const NegativeSampler sampler(out.vocab, walk.negatives);
      for (std::size_t k = 0; k < out.examples.size(); ++k) {
        auto& ex = out.examples[k];
        Rng rng(derive_seed(seed, kNegativeStream, k));
        for (int id : ex.context_ids) {
          ex.negative_ids.push_back(sampler.sample(id, walk.negatives_per_context, rng));
        }
      }
    } else {
      // Too few pairs to contrast against; drop the contexts.
      for (auto& ex : out.examples) ex.context_ids.clear();
    }
  }
  return out;
}

const char* to_string(TrainMode m) {
  return m == TrainMode::CoTrain ? "cotrain" : "alternate";
}

TrainMode parse_train_mode(const std::string& s) {
  if (s == "cotrain" || s == "co-train" || s == "CoTrain") return TrainMode::CoTrain;
  if (s == "alternate" || s == "alternate-train" || s == "AlternateTrain") {
    return TrainMode::AlternateTrain;
  }
  throw ConfigError("unknown training mode '" + s + "' (cotrain|alternate)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(eta0 > 0.0)) throw ConfigError("eta0 must be > 0");
  loss_weights.validate();
  walk.validate();
  if (m < 1 || l_p < 1 || l_n < 1 || pred_hidden < 1) {
    throw ConfigError("layer sizes must be positive");
  }
}

namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& b) {
  acc.total += b.total;
  acc.supervised += b.supervised;
  acc.unsupervised += b.unsupervised;
  acc.temporal += b.temporal;
  acc.regularization += b.regularization;
  acc.supervised_count += b.supervised_count;
}

void scale(LossBreakdown& acc, double s) {
  acc.total *= s;
  acc.supervised *= s;
  acc.unsupervised *= s;
  acc.temporal *= s;
  acc.regularization *= s;
}

}  // namespace

TrainReport train(std::vector<TrainingExample> examples, int vocab_size, const TrainConfig& cfg,
                  const ProgressFn& progress, const ModelParams* initial) {
  cfg.validate();
  if (examples.empty()) throw EmptyDatasetError("no training examples");

  TrainReport report;
  report.label =
      cfg.loss_weights.alpha == 0.0 && cfg.loss_weights.beta == 0.0 ? "RS" : "SS";
  if (initial) {
    report.params = *initial;
  } else {
    ModelDims dims;
    dims.d = static_cast<int>(examples.front().z.size());
    dims.m = cfg.m;
    dims.l_p = cfg.l_p;
    dims.l_n = cfg.l_n;
    dims.pred_hidden = cfg.pred_hidden;
    dims.vocab = vocab_size;
    Rng rng(derive_seed(cfg.seed, kInitStream));
    report.params = ModelParams::init(dims, rng);
  }
  ModelParams& params = report.params;
  AdamState adam(params.block_sizes());
  ModelGrads grads = params.zeros_like();
  const LrSchedule schedule{cfg.eta0};
  const auto n = examples.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  LossOptions pass_unsup;
  pass_unsup.context_mode = cfg.context_mode;
  pass_unsup.scaling = cfg.scaling;
  pass_unsup.supervised = false;
  pass_unsup.temporal = false;
  LossOptions pass_sup;
  pass_sup.context_mode = cfg.context_mode;
  pass_sup.scaling = cfg.scaling;
  pass_sup.unsupervised = false;
  LossOptions joint;
  joint.context_mode = cfg.context_mode;
  joint.scaling = cfg.scaling;

  std::vector<LossOptions> passes;
  if (cfg.mode == TrainMode::CoTrain) {
    passes = {joint};
  } else {
    // With alpha = 0 the first pass would only shrink weights; skip it so that
    // both modes coincide for the supervised-only objective.
    if (cfg.loss_weights.alpha != 0.0) passes.push_back(pass_unsup);
    passes.push_back(pass_sup);
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr_at_epoch(schedule, epoch);
    Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream, static_cast<std::uint64_t>(epoch)));
    shuffle(examples, shuffle_rng);
    std::size_t batches = 0;
    try {
      for (std::size_t pass = 0; pass < passes.size(); ++pass) {
        const bool report_pass = pass + 1 == passes.size();
        for (std::size_t begin = 0; begin < n; begin += bs) {
          const std::span<const TrainingExample> batch(examples.data() + begin,
                                                       std::min(bs, n - begin));
          const auto loss =
              accumulate_loss_and_grads(params, batch, cfg.loss_weights, grads, passes[pass]);
          if (report_pass) {
            accumulate(stats.loss, loss);
            ++batches;
          }
          auto p = params.blocks();
          auto g = grads.blocks();
          // The context table is the last block; only rows this batch reaches move.
          SparseBlock ctx{p.size() - 1, {}};
          if (passes[pass].unsupervised && cfg.loss_weights.alpha != 0.0) {
            const auto m = static_cast<std::size_t>(params.ctx.cols());
            for (int r : touched_context_rows(batch, static_cast<int>(params.ctx.rows()),
                                              cfg.context_mode)) {
              for (std::size_t k = 0; k < m; ++k) ctx.indices.push_back(static_cast<std::size_t>(r) * m + k);
            }
          }
          adam_step(p, g, adam, stats.lr, std::span<const SparseBlock>(&ctx, 1));
          // Clear for the next batch; untouched context rows are still zero.
          for (std::size_t b = 0; b + 1 < g.size(); ++b) std::fill(g[b].begin(), g[b].end(), 0.0);
          for (auto i : ctx.indices) g.back()[i] = 0.0;
        }
      }
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch), epoch);
    }
    const int count = stats.loss.supervised_count;
    scale(stats.loss, 1.0 / static_cast<double>(batches));
    stats.loss.supervised_count = count;
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.epochs.push_back(stats);
    if (progress) progress(stats);
  }
  return report;
}

std::string progress_header() { return "epoch,loss_total,loss_s,loss_u,loss_t,loss_r,lr"; }

std::string progress_line(const EpochStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", s.epoch, s.loss.total,
                s.loss.supervised, s.loss.unsupervised, s.loss.temporal, s.loss.regularization,
                s.lr);
  return buf;
}

}  // namespace churnemb
