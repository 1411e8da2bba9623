#include "churnemb/pipeline.hpp"

#include "churnemb/errors.hpp"

#include <json.hpp>

#include <istream>
#include <ostream>

namespace churnemb {

SplitData split_series(const SnapshotSeries& series, const FeatureSchema& schema,
                       const WalkConfig& walk, std::uint64_t seed, double train_fraction) {
  BuildOptions plain;
  plain.with_contexts = false;
  Dataset full = build_examples(series, schema, walk, seed, plain);
  std::vector<int> days;
  for (const auto& ex : full.examples) days.push_back(ex.day);

  SplitData out;
  out.boundary = split_boundary(std::move(days), train_fraction);
  const SnapshotSeries history = series.truncated(out.boundary - 1);
  out.train = build_examples(history, schema, walk, seed);
  for (const auto& ex : out.train.examples) {
    if (ex.day >= out.boundary || ex.feature_day >= out.boundary ||
        (ex.delta_next == 1 && ex.label_window_end >= out.boundary)) {
      throw ContractViolation("training example reads past the split boundary");
    }
  }
  for (auto& ex : full.examples) {
    if (ex.day >= out.boundary && ex.delta_next == 1) out.test.push_back(std::move(ex));
  }
  if (out.test.empty()) throw SplitError("no labelled test examples after the boundary");
  return out;
}

EvaluationResult evaluate_series(const SnapshotSeries& series, const FeatureSchema& schema,
                                 const TrainConfig& cfg, const EvaluationOptions& options) {
  cfg.validate();
  SplitData split = split_series(series, schema, cfg.walk, cfg.seed, options.train_fraction);
  EvaluationResult r;
  r.boundary = split.boundary;
  r.train_examples = split.train.examples.size();
  r.test_examples = split.test.size();
  r.vocab_size = split.train.vocab.size();

  r.ss_report = train(split.train.examples, split.train.vocab.size(), cfg, options.progress);
  r.ss = score_examples(r.ss_report.params, split.test);
  r.rows.push_back(metrics_row(r.ss_report.label, r.ss, options.threshold));

  const bool already_rs = r.ss_report.label == "RS";
  if (options.include_rs && !already_rs) {
    TrainConfig rs_cfg = cfg;
    rs_cfg.loss_weights.alpha = 0.0;
    rs_cfg.loss_weights.beta = 0.0;
    // Without L_U the context table never moves; leave it out.
    std::vector<TrainingExample> plain = split.train.examples;
    for (auto& ex : plain) {
      ex.context_ids.clear();
      ex.negative_ids.clear();
    }
    const TrainReport rs = train(std::move(plain), 0, rs_cfg);
    r.rs = score_examples(rs.params, split.test);
    r.rows.push_back(metrics_row("RS", r.rs, options.threshold));
  }
  if (options.include_lr) {
    r.lr = lr_baseline(split.train.examples, split.test);
    r.rows.push_back(metrics_row("LR", r.lr, options.threshold));
  }
  return r;
}

// ---- line formats -----------------------------------------------------------

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void write_examples_jsonl(std::ostream& out, std::span<const TrainingExample> examples) {
  for (const auto& ex : examples) {
    nlohmann::json j;
    j["player"] = ex.edge.player;
    j["game"] = ex.edge.game;
    j["day"] = ex.day;
    j["z"] = to_std(ex.z);
    if (ex.z_next) j["z_next"] = to_std(*ex.z_next);
    if (ex.z_tuv) j["z_tuv"] = to_std(*ex.z_tuv);
    if (ex.t_uv) j["t_uv"] = *ex.t_uv;
    j["label"] = ex.label;
    j["delta_next"] = ex.delta_next;
    j["delta_curr"] = ex.delta_curr;
    j["in_d"] = ex.in_d;
    j["delta_hinge"] = ex.delta_hinge;
    j["feature_day"] = ex.feature_day;
    j["label_window"] = {ex.label_window_begin, ex.label_window_end};
    j["contexts"] = ex.context_ids;
    j["negatives"] = ex.negative_ids;
    out << j.dump() << '\n';
  }
}

std::vector<TrainingExample> read_examples_jsonl(std::istream& in) {
  std::vector<TrainingExample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TrainingExample ex;
      ex.edge = {j.at("player").get<int>(), j.at("game").get<int>()};
      ex.day = j.at("day").get<int>();
      ex.z = to_eigen(j.at("z").get<std::vector<double>>());
      if (j.contains("z_next")) ex.z_next = to_eigen(j["z_next"].get<std::vector<double>>());
      if (j.contains("z_tuv")) ex.z_tuv = to_eigen(j["z_tuv"].get<std::vector<double>>());
      if (j.contains("t_uv")) ex.t_uv = j["t_uv"].get<int>();
      ex.label = j.at("label").get<int>();
      ex.delta_next = j.at("delta_next").get<int>();
      ex.delta_curr = j.at("delta_curr").get<int>();
      ex.in_d = j.at("in_d").get<bool>();
      ex.delta_hinge = j.at("delta_hinge").get<int>();
      ex.feature_day = j.at("feature_day").get<int>();
      ex.label_window_begin = j.at("label_window").at(0).get<int>();
      ex.label_window_end = j.at("label_window").at(1).get<int>();
      ex.context_ids = j.at("contexts").get<std::vector<int>>();
      ex.negative_ids = j.at("negatives").get<std::vector<std::vector<int>>>();
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("examples line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_vocab_csv(std::ostream& out, const ContextVocabulary& vocab) {
  out << "id,player,game,count\n";
  const auto counts = vocab.counts();
  for (int id = 0; id < vocab.size(); ++id) {
    const auto& p = vocab.pair(id);
    out << id << ',' << p.player << ',' << p.game << ',' << counts[static_cast<std::size_t>(id)]
        << '\n';
  }
}

}  // namespace churnemb
