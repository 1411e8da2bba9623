// churnemb: synth | prepare | train | evaluate | predict | walk-dump
#include "churnemb/config.hpp"
#include "churnemb/errors.hpp"
#include "churnemb/pipeline.hpp"
#include "churnemb/synthgen.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace churnemb;

namespace {

// Files are written as <path>.partial and renamed on commit(); anything not
// committed is removed when the guard goes away.
class Outputs {
 public:
  ~Outputs() {
    for (const auto& p : pending_) {
      std::error_code ec;
      fs::remove(partial(p), ec);
    }
  }

  std::ofstream open(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(partial(p), std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    pending_.push_back(p);
    return out;
  }

  void commit() {
    for (const auto& p : pending_) fs::rename(partial(p), p);
    pending_.clear();
  }

 private:
  static fs::path partial(const fs::path& p) { return fs::path(p.string() + ".partial"); }
  std::vector<fs::path> pending_;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> window;
  std::optional<std::string> mode;
  std::optional<double> alpha;
  std::optional<double> beta;
  std::string out;
};

RunConfig resolve(const Common& c) {
  RunConfig cfg;
  if (!c.config.empty()) cfg = load_run_config(c.config);
  if (c.seed) {
    cfg.train.seed = *c.seed;
    cfg.synth.seed = *c.seed;
  }
  if (c.window) {
    cfg.window = *c.window;
    cfg.synth.window = *c.window;
  }
  if (c.mode) cfg.train.mode = parse_train_mode(*c.mode);
  if (c.alpha) cfg.train.loss_weights.alpha = *c.alpha;
  if (c.beta) cfg.train.loss_weights.beta = *c.beta;
  cfg.validate();
  return cfg;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read " + p.string());
  return in;
}

SnapshotSeries load_series(const fs::path& dir, int window) {
  auto plays_in = open_in(dir / "plays.csv");
  auto features_in = open_in(dir / "features.jsonl");
  const auto plays = read_plays_csv(plays_in);
  const auto features = read_features_jsonl(features_in);
  SeriesMeta meta;
  if (fs::exists(dir / "meta.json")) {
    auto meta_in = open_in(dir / "meta.json");
    meta = read_series_meta(meta_in);
  }
  auto series = assemble_series(plays, features, window, meta);
  series.validate();
  return series;
}

void add_common(CLI::App* sub, Common& c, bool training_flags) {
  sub->add_option("--config", c.config, "run config file (INI)")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--T", c.window, "churn window in days");
  if (training_flags) {
    sub->add_option("--mode", c.mode, "cotrain | alternate");
    sub->add_option("--alpha", c.alpha, "weight of the context loss");
    sub->add_option("--beta", c.beta, "weight of the temporal loss");
  }
}

int cmd_synth(const Common& c, std::optional<int> days) {
  RunConfig cfg;
  if (!c.config.empty()) cfg = load_run_config(c.config);
  if (days) cfg.synth.days = *days;
  if (c.seed) cfg.synth.seed = *c.seed;
  if (c.window) cfg.window = cfg.synth.window = *c.window;
  cfg.validate();
  const auto result = generate(cfg.synth);
  const fs::path out = c.out.empty() ? fs::path("data") : fs::path(c.out);
  Outputs files;
  {
    auto f = files.open(out / "plays.csv");
    write_plays_csv(f, result.series.records());
  }
  {
    auto f = files.open(out / "features.jsonl");
    write_features_jsonl(f, result.series);
  }
  {
    auto f = files.open(out / "meta.json");
    write_series_meta(f, result.series);
  }
  {
    auto f = files.open(out / "survival.csv");
    f << "age,at_risk,empirical,expected\n";
    char buf[128];
    for (const auto& r : result.survival) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f\n", r.age, r.at_risk, r.empirical,
                    r.expected);
      f << buf;
    }
  }
  {
    auto f = files.open(out / "config.ini");
    RunConfig written = cfg;
    written.data_dir = out.string();
    f << written.to_ini();
  }
  files.commit();
  std::cerr << "wrote " << result.series.records().size() << " plays for "
            << result.relationships.size() << " relationships to " << out.string() << "\n";
  return 0;
}

fs::path data_dir(const std::string& flag, const RunConfig& cfg) {
  return flag.empty() ? fs::path(cfg.data_dir) : fs::path(flag);
}

int cmd_prepare(const Common& c, const std::string& data) {
  const RunConfig cfg = resolve(c);
  const auto series = load_series(data_dir(data, cfg), cfg.window);
  const auto ds = build_examples(series, cfg.feature_schema(), cfg.train.walk, cfg.train.seed);
  if (ds.examples.empty()) throw EmptyDatasetError("no examples in " + data_dir(data, cfg).string());
  const fs::path out = c.out.empty() ? fs::path("prepared") : fs::path(c.out);
  Outputs files;
  {
    auto f = files.open(out / "examples.jsonl");
    write_examples_jsonl(f, ds.examples);
  }
  {
    auto f = files.open(out / "vocab.csv");
    write_vocab_csv(f, ds.vocab);
  }
  {
    // Same rows in the layout `predict` reads.
    auto f = files.open(out / "edges.csv");
    f << "player,game,day";
    for (Eigen::Index k = 0; k < ds.examples.front().z.size(); ++k) f << ",z" << k;
    f << "\n";
    char buf[32];
    for (const auto& ex : ds.examples) {
      f << ex.edge.player << ',' << ex.edge.game << ',' << ex.day;
      for (double v : ex.z) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        f << buf;
      }
      f << "\n";
    }
  }
  files.commit();
  std::cerr << ds.examples.size() << " examples, " << ds.vocab.size() << " context pairs\n";
  return 0;
}

int vocab_extent(const std::vector<TrainingExample>& examples) {
  int top = -1;
  for (const auto& ex : examples) {
    for (int id : ex.context_ids) top = std::max(top, id);
    for (const auto& list : ex.negative_ids) {
      for (int id : list) top = std::max(top, id);
    }
  }
  return top + 1;
}

int cmd_train(const Common& c, const std::string& data, const std::string& examples_path) {
  const RunConfig cfg = resolve(c);
  std::vector<TrainingExample> examples;
  int vocab = 0;
  if (!examples_path.empty()) {
    auto in = open_in(examples_path);
    examples = read_examples_jsonl(in);
    vocab = vocab_extent(examples);
  } else {
    const auto series = load_series(data_dir(data, cfg), cfg.window);
    auto ds = build_examples(series, cfg.feature_schema(), cfg.train.walk, cfg.train.seed);
    vocab = ds.vocab.size();
    examples = std::move(ds.examples);
  }
  const fs::path out = c.out.empty() ? fs::path("model.ckpt") : fs::path(c.out);
  Outputs files;
  auto report_file = files.open(fs::path(out.string() + ".report.csv"));
  report_file << "# run " << (cfg.train.loss_weights.alpha == 0.0 && cfg.train.loss_weights.beta == 0.0 ? "RS" : "SS") << "\n";
  report_file << progress_header() << "\n";
  std::cout << progress_header() << std::endl;
  const auto report = train(std::move(examples), vocab, cfg.train, [&](const EpochStats& s) {
    const auto line = progress_line(s);
    std::cout << line << std::endl;
    report_file << line << "\n";
  });
  report_file.close();
  {
    auto f = files.open(out);
    save_checkpoint(f, report.params);
  }
  files.commit();
  std::cerr << "run " << report.label << " (" << to_string(cfg.train.mode) << "), checkpoint "
            << out.string() << "\n";
  return 0;
}

int cmd_evaluate(const Common& c, const std::string& data, const std::string& roc) {
  const RunConfig cfg = resolve(c);
  const auto series = load_series(data_dir(data, cfg), cfg.window);
  EvaluationOptions opts;
  opts.train_fraction = cfg.train_fraction;
  opts.threshold = cfg.threshold;
  opts.progress = [](const EpochStats& s) { std::cerr << progress_line(s) << "\n"; };
  const auto r = evaluate_series(series, cfg.feature_schema(), cfg.train, opts);
  const fs::path out = c.out.empty() ? fs::path("metrics.csv") : fs::path(c.out);
  Outputs files;
  {
    auto f = files.open(out);
    write_metrics_csv(f, r.rows);
  }
  if (!roc.empty()) {
    auto f = files.open(roc);
    f << "model,threshold,fpr,tpr\n";
    auto emit = [&](const std::string& name, const std::vector<ScoredExample>& s) {
      if (s.empty()) return;
      char buf[160];
      for (const auto& p : roc_curve(s)) {
        std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g\n", name.c_str(), p.threshold,
                      p.fpr, p.tpr);
        f << buf;
      }
    };
    emit(r.rows.front().model, r.ss);
    emit("RS", r.rs);
    emit("LR", r.lr);
  }
  files.commit();
  std::ifstream echo(out);
  std::cout << echo.rdbuf();
  std::cerr << "split boundary day " << r.boundary << ": " << r.train_examples
            << " train / " << r.test_examples << " test examples\n";
  return 0;
}

// Edge-feature file: header `player,game,day,z0,...`, one edge per line.
int cmd_predict(const Common& c, const std::string& checkpoint, const std::string& edges) {
  auto ck = open_in(checkpoint);
  const ModelParams params = load_checkpoint(ck);
  auto in = open_in(edges);
  std::string line;
  if (!std::getline(in, line) || line.rfind("player,game,day", 0) != 0) {
    throw ParseError("edge feature file must start with header player,game,day,z0,...");
  }
  const fs::path out = c.out.empty() ? fs::path("scores.csv") : fs::path(c.out);
  Outputs files;
  auto f = files.open(out);
  f << "player,game,day,score\n";
  int lineno = 1;
  const int d = params.embed.input_dim();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ParseError("edge features line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(values.size()) != 3 + d) {
      throw DimensionError("edge features line " + std::to_string(lineno) + ": expected " +
                           std::to_string(d) + " feature columns");
    }
    const Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(values.data() + 3, d);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.10g\n", static_cast<int>(values[0]),
                  static_cast<int>(values[1]), static_cast<int>(values[2]),
                  predict_churn(params, z));
    f << buf;
  }
  f.close();
  files.commit();
  return 0;
}

int cmd_walk_dump(const Common& c, const std::string& data, int day, int limit) {
  const RunConfig cfg = resolve(c);
  const auto series = load_series(data_dir(data, cfg), cfg.window);
  const Snapshot snap = Snapshot::from_series(series, day);
  const AugmentedIndex aug = build_augmented_index(snap, cfg.train.walk);
  const fs::path out = c.out.empty() ? fs::path("contexts.csv") : fs::path(c.out);
  Outputs files;
  auto f = files.open(out);
  f << "day,player,game,context_player,context_game\n";
  int n = 0;
  for (const auto& e : series.edges_at(day)) {
    if (limit > 0 && n++ >= limit) break;
    Rng rng(derive_seed(cfg.train.seed, static_cast<std::uint64_t>(day), EdgeKeyHash{}(e)));
    for (const auto& ctx : sample_contexts(e, snap, aug, cfg.train.walk, rng)) {
      f << day << ',' << e.player << ',' << e.game << ',' << ctx.player << ',' << ctx.game << "\n";
    }
  }
  f.close();
  files.commit();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Churn prediction with semi-supervised edge embeddings"};
  app.require_subcommand(1);

  Common common;
  std::optional<int> days;
  std::string data;
  std::string examples_path;
  std::string roc;
  std::string checkpoint;
  std::string edges;
  int day = 0;
  int limit = 0;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common(synth, common, false);
  synth->add_option("--days", days, "observation length in days");
  synth->add_option("--out", common.out, "output directory (default: data)");

  auto* prepare = app.add_subcommand("prepare", "build training examples and the context vocabulary");
  add_common(prepare, common, false);
  prepare->add_option("--data", data, "dataset directory");
  prepare->add_option("--out", common.out, "output directory (default: prepared)");

  auto* trn = app.add_subcommand("train", "train a model and write a checkpoint");
  add_common(trn, common, true);
  trn->add_option("--data", data, "dataset directory");
  trn->add_option("--examples", examples_path, "examples.jsonl from prepare");
  trn->add_option("--out", common.out, "checkpoint path (default: model.ckpt)");

  auto* eval = app.add_subcommand("evaluate", "chronological evaluation of SS, RS and LR");
  add_common(eval, common, true);
  eval->add_option("--data", data, "dataset directory");
  eval->add_option("--roc", roc, "also write ROC points to this CSV");
  eval->add_option("--out", common.out, "metrics CSV (default: metrics.csv)");

  auto* pred = app.add_subcommand("predict", "score edges from their feature vectors");
  pred->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
  pred->add_option("--edges", edges, "edge feature CSV")->required();
  pred->add_option("--out", common.out, "scores CSV (default: scores.csv)");

  auto* walk = app.add_subcommand("walk-dump", "sample contexts for the edges of one day");
  add_common(walk, common, false);
  walk->add_option("--data", data, "dataset directory");
  walk->add_option("--day", day, "snapshot day")->required();
  walk->add_option("--limit", limit, "at most this many edges (0 = all)");
  walk->add_option("--out", common.out, "contexts CSV (default: contexts.csv)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (synth->parsed()) return cmd_synth(common, days);
    if (prepare->parsed()) return cmd_prepare(common, data);
    if (trn->parsed()) return cmd_train(common, data, examples_path);
    if (eval->parsed()) return cmd_evaluate(common, data, roc);
    if (pred->parsed()) return cmd_predict(common, checkpoint, edges);
    if (walk->parsed()) return cmd_walk_dump(common, data, day, limit);
  } catch (const DivergenceError& e) {
    std::cerr << "error: training diverged at epoch " << e.epoch() << ": " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
