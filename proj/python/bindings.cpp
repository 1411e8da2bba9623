#include "churnemb/config.hpp"
#include "churnemb/errors.hpp"
#include "churnemb/evalkit.hpp"
#include "churnemb/pipeline.hpp"
#include "churnemb/synthgen.hpp"
#include "churnemb/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>

namespace py = pybind11;
using namespace churnemb;

namespace {

// Column-per-example matrices are awkward in numpy; hand out rows instead.
Eigen::MatrixXd stack_rows(const std::vector<TrainingExample>& examples) {
  if (examples.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(examples.size()), examples.front().z.size());
  for (std::size_t i = 0; i < examples.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = examples[i].z.transpose();
  return out;
}

template <class F>
py::array_t<int> int_column(const std::vector<TrainingExample>& examples, F get) {
  py::array_t<int> out(static_cast<py::ssize_t>(examples.size()));
  auto w = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < examples.size(); ++i) w(static_cast<py::ssize_t>(i)) = get(examples[i]);
  return out;
}

py::array_t<double> scores_of(const std::vector<ScoredExample>& s) {
  py::array_t<double> out(static_cast<py::ssize_t>(s.size()));
  auto w = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < s.size(); ++i) w(static_cast<py::ssize_t>(i)) = s[i].score;
  return out;
}

py::array_t<int> labels_of(const std::vector<ScoredExample>& s) {
  py::array_t<int> out(static_cast<py::ssize_t>(s.size()));
  auto w = out.mutable_unchecked<1>();
  for (std::size_t i = 0; i < s.size(); ++i) w(static_cast<py::ssize_t>(i)) = s[i].label;
  return out;
}

std::vector<ScoredExample> zip_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
  std::vector<ScoredExample> out;
  out.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out.push_back({scores[i], labels[i], 0});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Churn prediction with semi-supervised edge embeddings on player-game graphs";

  auto base = py::register_exception<Error>(m, "ChurnembError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<RangeError>(m, "RangeError", base.ptr());
  py::register_exception<ContractViolation>(m, "ContractViolation", base.ptr());
  py::register_exception<NotFound>(m, "NotFound", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<EmptyDatasetError>(m, "EmptyDatasetError", base.ptr());
  py::register_exception<VocabularyError>(m, "VocabularyError", base.ptr());
  py::register_exception<SplitError>(m, "SplitError", base.ptr());
  py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", base.ptr());
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());

  py::class_<FeatureSchema>(m, "FeatureSchema")
      .def_static("uniform", &FeatureSchema::uniform, py::arg("n_groups"), py::arg("group_width"))
      .def_readonly("n_u", &FeatureSchema::n_u)
      .def_readonly("n_v", &FeatureSchema::n_v)
      .def_property_readonly("d", &FeatureSchema::d)
      .def("__repr__", [](const FeatureSchema& s) { return format_schema_section(s); });

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("n_players", &SynthConfig::n_players)
      .def_readwrite("n_games", &SynthConfig::n_games)
      .def_readwrite("days", &SynthConfig::days)
      .def_readwrite("window", &SynthConfig::window)
      .def_readwrite("trait_groups", &SynthConfig::trait_groups)
      .def_readwrite("trait_width", &SynthConfig::trait_width)
      .def_readwrite("trait_noise", &SynthConfig::trait_noise)
      .def_readwrite("history_features", &SynthConfig::history_features)
      .def_readwrite("tenure_features", &SynthConfig::tenure_features)
      .def_readwrite("tenure_period", &SynthConfig::tenure_period)
      .def_readwrite("relationships_per_player", &SynthConfig::relationships_per_player)
      .def_readwrite("daily_hazard", &SynthConfig::daily_hazard)
      .def_readwrite("hazard_growth", &SynthConfig::hazard_growth)
      .def_readwrite("feature_drift", &SynthConfig::feature_drift)
      .def_readwrite("affinity_strength", &SynthConfig::affinity_strength)
      .def_readwrite("seed", &SynthConfig::seed)
      .def_property_readonly("d", &SynthConfig::d)
      .def("validate", &SynthConfig::validate);

  m.def("solve_daily_hazard", &solve_daily_hazard, py::arg("survival"), py::arg("age"),
        py::arg("growth") = 1.0);
  m.def("synth_schema", &synth_schema, py::arg("config"));

  py::class_<SnapshotSeries>(m, "SnapshotSeries")
      .def_property_readonly("t0", &SnapshotSeries::t0)
      .def_property_readonly("t_end", &SnapshotSeries::t_end)
      .def_property_readonly("window", &SnapshotSeries::window)
      .def_property_readonly("n_players", &SnapshotSeries::n_players)
      .def_property_readonly("n_games", &SnapshotSeries::n_games)
      .def("plays", [](const SnapshotSeries& s) {
        const auto& r = s.records();
        py::array_t<int> out({static_cast<py::ssize_t>(r.size()), py::ssize_t{3}});
        auto w = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < r.size(); ++i) {
          const auto k = static_cast<py::ssize_t>(i);
          w(k, 0) = r[i].player;
          w(k, 1) = r[i].game;
          w(k, 2) = r[i].day;
        }
        return out;
      }, "Play records as an (n, 3) array of player, game, day.")
      .def("edges_at", [](const SnapshotSeries& s, int t) {
        std::vector<std::pair<int, int>> out;
        for (const auto& e : s.edges_at(t)) out.emplace_back(e.player, e.game);
        return out;
      }, py::arg("day"))
      .def("player_features", [](const SnapshotSeries& s, int u, int day) {
        return Eigen::VectorXd(s.features_at(NodeId::player(u), day));
      }, py::arg("player"), py::arg("day"))
      .def("game_features", [](const SnapshotSeries& s, int v, int day) {
        return Eigen::VectorXd(s.features_at(NodeId::game(v), day));
      }, py::arg("game"), py::arg("day"))
      .def("edge_vector", [](const SnapshotSeries& s, const FeatureSchema& schema, int u, int v, int day) {
        return edge_vector(s, schema, {u, v}, day);
      }, py::arg("schema"), py::arg("player"), py::arg("game"), py::arg("day"));

  py::class_<SynthResult>(m, "SynthResult")
      .def_readonly("series", &SynthResult::series)
      .def_property_readonly("survival", [](const SynthResult& r) {
        std::vector<std::tuple<int, double, double>> out;
        for (const auto& row : r.survival) out.emplace_back(row.age, row.empirical, row.expected);
        return out;
      }, "(age, empirical, expected) survival rows.")
      .def_property_readonly("relationship_count",
                             [](const SynthResult& r) { return r.relationships.size(); });

  m.def("generate", &generate, py::arg("config"), py::call_guard<py::gil_scoped_release>());

  py::class_<WalkConfig>(m, "WalkConfig")
      .def(py::init<>())
      .def_readwrite("epsilon", &WalkConfig::epsilon)
      .def_readwrite("p", &WalkConfig::p)
      .def_readwrite("q", &WalkConfig::q)
      .def_readwrite("walk_len", &WalkConfig::walk_len)
      .def_readwrite("contexts_per_edge", &WalkConfig::contexts_per_edge)
      .def_readwrite("k_aug", &WalkConfig::k_aug)
      .def_readwrite("negatives_per_context", &WalkConfig::negatives_per_context);

  py::class_<LossWeights>(m, "LossWeights")
      .def(py::init<>())
      .def_readwrite("alpha", &LossWeights::alpha)
      .def_readwrite("beta", &LossWeights::beta)
      .def_readwrite("gamma", &LossWeights::gamma)
      .def_readwrite("lambda_", &LossWeights::lambda);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("eta0", &TrainConfig::eta0)
      .def_property("mode", [](const TrainConfig& c) { return std::string(to_string(c.mode)); },
                    [](TrainConfig& c, const std::string& s) { c.mode = parse_train_mode(s); })
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("loss_weights", &TrainConfig::loss_weights)
      .def_readwrite("walk", &TrainConfig::walk)
      .def_readwrite("m", &TrainConfig::m)
      .def_readwrite("l_p", &TrainConfig::l_p)
      .def_readwrite("l_n", &TrainConfig::l_n)
      .def_readwrite("pred_hidden", &TrainConfig::pred_hidden)
      .def("validate", &TrainConfig::validate);

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("window", &RunConfig::window)
      .def_readwrite("train_fraction", &RunConfig::train_fraction)
      .def_readwrite("threshold", &RunConfig::threshold)
      .def_readwrite("train", &RunConfig::train)
      .def_readwrite("synth", &RunConfig::synth)
      .def("feature_schema", &RunConfig::feature_schema)
      .def("validate", &RunConfig::validate)
      .def("to_ini", &RunConfig::to_ini);
  m.def("load_run_config", &load_run_config, py::arg("path"));

  py::class_<Dataset>(m, "Dataset")
      .def("__len__", [](const Dataset& d) { return d.examples.size(); })
      .def_property_readonly("vocab_size", [](const Dataset& d) { return d.vocab.size(); })
      .def_property_readonly("z", [](const Dataset& d) { return stack_rows(d.examples); },
                             "Edge feature vectors, one row per example.")
      .def_property_readonly("days", [](const Dataset& d) {
        return int_column(d.examples, [](const TrainingExample& e) { return e.day; });
      })
      .def_property_readonly("labels", [](const Dataset& d) {
        return int_column(d.examples, [](const TrainingExample& e) { return e.label; });
      })
      .def_property_readonly("labelled", [](const Dataset& d) {
        return int_column(d.examples, [](const TrainingExample& e) { return e.delta_next; });
      });

  m.def("build_examples",
        [](const SnapshotSeries& s, const FeatureSchema& schema, const WalkConfig& walk,
           std::uint64_t seed, bool with_contexts) {
          BuildOptions o;
          o.with_contexts = with_contexts;
          return build_examples(s, schema, walk, seed, o);
        },
        py::arg("series"), py::arg("schema"), py::arg("walk") = WalkConfig{}, py::arg("seed") = 1,
        py::arg("with_contexts") = true, py::call_guard<py::gil_scoped_release>());

  py::class_<ModelParams>(m, "Model")
      .def_property_readonly("input_dim", [](const ModelParams& p) { return p.embed.input_dim(); })
      .def_property_readonly("embedding_dim", [](const ModelParams& p) { return p.embed.output_dim(); })
      .def("predict", [](const ModelParams& p, const Eigen::MatrixXd& z) {
        return Eigen::VectorXd(predict_churn_batch(p, z.transpose()));
      }, py::arg("z"), "Churn probabilities for an (n, d) array of edge vectors.")
      .def("embed", [](const ModelParams& p, const Eigen::VectorXd& z) { return embed_edge(p, z); },
           py::arg("z"))
      .def("save", [](const ModelParams& p, const std::string& path) {
        std::ofstream out(path);
        if (!out) throw ConfigError("cannot write " + path);
        save_checkpoint(out, p);
      }, py::arg("path"))
      .def_static("load", [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read " + path);
        return load_checkpoint(in);
      }, py::arg("path"));

  m.def("train",
        [](const Dataset& data, const TrainConfig& cfg) {
          auto report = train(data.examples, data.vocab.size(), cfg);
          std::vector<double> losses;
          for (const auto& e : report.epochs) losses.push_back(e.loss.total);
          return py::make_tuple(std::move(report.params), losses);
        },
        py::arg("dataset"), py::arg("config") = TrainConfig{},
        "Returns (model, per-epoch mean losses).");

  m.def("evaluate",
        [](const SnapshotSeries& s, const FeatureSchema& schema, const TrainConfig& cfg,
           double train_fraction, double threshold) {
          EvaluationOptions o;
          o.train_fraction = train_fraction;
          o.threshold = threshold;
          EvaluationResult r;
          {
            py::gil_scoped_release release;
            r = evaluate_series(s, schema, cfg, o);
          }
          py::dict out;
          for (const auto& row : r.rows) {
            py::dict d;
            d["auc"] = row.auc;
            d["recall"] = row.recall;
            d["precision"] = row.precision;
            out[py::str(row.model)] = d;
          }
          out["boundary"] = r.boundary;
          out["labels"] = labels_of(r.ss);
          out["ss_scores"] = scores_of(r.ss);
          out["rs_scores"] = scores_of(r.rs);
          out["lr_scores"] = scores_of(r.lr);
          return out;
        },
        py::arg("series"), py::arg("schema"), py::arg("config") = TrainConfig{},
        py::arg("train_fraction") = 2.0 / 3.0, py::arg("threshold") = 0.5,
        "Chronological SS / RS / LR evaluation; metrics keyed by model name.");

  m.def("auc",
        [](const std::vector<double>& scores, const std::vector<int>& labels) {
          return auc(zip_scores(scores, labels));
        },
        py::arg("scores"), py::arg("labels"));
}
