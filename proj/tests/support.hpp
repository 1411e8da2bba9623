#pragma once

// Fixtures shared by the unit tests and the acceptance runner.

#include "churnemb/bigraph.hpp"
#include "churnemb/churnmodel.hpp"
#include "churnemb/ctxwalk.hpp"
#include "churnemb/edgefeat.hpp"
#include "churnemb/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <map>
#include <vector>

namespace churnemb::testing {

// Four players and four games. Games: v0=(1,0), v1=(0.6,0.8), v2=(0.5,sqrt(.75)),
// v3=(0,1). Edges u0-v0 u0-v2 u1-v0 u1-v3 u2-v1 u3-v0 u3-v3. Augmented links are
// set by hand, including a one-way link and a negative similarity:
//   v0 -> v1 .8   v1 -> v0 .8, v3 .3   v3 -> v1 .3
//   u0 -> u1 .6   u1 -> u0 .6, u2 -.2
// With prev = v0, curr = u0, p = 1, q = 0.05 the candidates are v0 (weight 1),
// v1 in N1 (0.8 / 0.05 = 16) and v2 in N2 adjacent to u0 (0.5 / 0.05 = 10).
struct ToyGraph {
  Snapshot snapshot{4, 4};
  AugmentedIndex aug{4, 4};
  WalkConfig cfg;

  ToyGraph() {
    const EdgeKey edges[] = {{0, 0}, {0, 2}, {1, 0}, {1, 3}, {2, 1}, {3, 0}, {3, 3}};
    for (const auto& e : edges) snapshot.add_edge(e);
    auto vec = [](double a, double b) {
      Eigen::VectorXd v(2);
      v << a, b;
      return v;
    };
    snapshot.set_features(NodeId::game(0), vec(1, 0));
    snapshot.set_features(NodeId::game(1), vec(0.6, 0.8));
    snapshot.set_features(NodeId::game(2), vec(0.5, std::sqrt(0.75)));
    snapshot.set_features(NodeId::game(3), vec(0, 1));
    snapshot.set_features(NodeId::player(0), vec(1, 0));
    snapshot.set_features(NodeId::player(1), vec(1, 1));
    snapshot.set_features(NodeId::player(2), vec(0, 1));
    snapshot.set_features(NodeId::player(3), vec(0.6, 0.8));
    snapshot.finalize();

    aug.set(NodeId::game(0), {{1, 0.8}});
    aug.set(NodeId::game(1), {{0, 0.8}, {3, 0.3}});
    aug.set(NodeId::game(3), {{1, 0.3}});
    aug.set(NodeId::player(0), {{1, 0.6}});
    aug.set(NodeId::player(1), {{0, 0.6}, {2, -0.2}});

    cfg.p = 1.0;
    cfg.q = 0.05;
  }

  std::vector<NodeId> nodes() const {
    std::vector<NodeId> out;
    for (int i = 0; i < 4; ++i) out.push_back(NodeId::player(i));
    for (int i = 0; i < 4; ++i) out.push_back(NodeId::game(i));
    return out;
  }
};

// Reference kernel written straight from the definition: breadth-first
// distances over the combined graph (bipartite edges both ways, augmented links
// in their listed direction), then a weight for every node of the graph.
// Negative similarities count as zero. Returns one probability per node in
// ToyGraph::nodes() order, or all zeros when the walker is stuck.
inline std::vector<double> brute_force_transition(const Snapshot& s, const AugmentedIndex& aug,
                                                  const std::vector<NodeId>& nodes, NodeId prev,
                                                  NodeId curr, const WalkConfig& cfg) {
  std::map<NodeId, int> dist;
  std::deque<NodeId> queue{prev};
  dist[prev] = 0;
  while (!queue.empty()) {
    const NodeId a = queue.front();
    queue.pop_front();
    std::vector<NodeId> next;
    for (int b : s.neighbors(a)) next.push_back({opposite(a.kind), b});
    for (const auto& l : aug.neighbors(a)) next.push_back({a.kind, l.index});
    for (const auto& b : next) {
      if (dist.count(b)) continue;
      dist[b] = dist[a] + 1;
      queue.push_back(b);
    }
  }
  auto aug_sim = [&](NodeId o) {
    for (const auto& l : aug.neighbors(prev)) {
      if (l.index == o.index) return l.similarity;
    }
    return 0.0;
  };

  std::vector<double> w(nodes.size(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const NodeId o = nodes[k];
    if (o.kind != prev.kind) continue;
    const auto it = dist.find(o);
    if (it == dist.end()) continue;
    if (it->second == 0) {
      w[k] = 1.0 / cfg.p;
    } else if (it->second == 1) {
      w[k] = std::max(aug_sim(o), 0.0) / cfg.q;
    } else if (it->second == 2) {
      const double e = s.adjacent(curr, o) ? 1.0 : 0.0;
      w[k] = std::max(s.similarity(prev, o), 0.0) * e / cfg.q;
    }
    total += w[k];
  }
  if (total > 0.0) {
    for (double& x : w) x /= total;
  }
  return w;
}

// Dense view of transition_distribution over a node list.
inline std::vector<double> dense_transition(const Snapshot& s, const AugmentedIndex& aug,
                                            const std::vector<NodeId>& nodes, NodeId prev,
                                            NodeId curr, const WalkConfig& cfg) {
  std::vector<double> out(nodes.size(), 0.0);
  for (const auto& t : transition_distribution(s, aug, prev, curr, cfg)) {
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k] == t.node) out[k] += t.probability;
    }
  }
  return out;
}

inline Eigen::VectorXd random_vector(Rng& rng, int n, double lo = -1.0, double hi = 1.0) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = uniform_real(rng, lo, hi);
  return v;
}

// A model with positive biases so that ReLU units sit away from their kink.
inline ModelParams tiny_model(Rng& rng, int d = 6, int m = 4, int vocab = 8) {
  ModelDims dims;
  dims.d = d;
  dims.m = m;
  dims.pred_hidden = 5;
  dims.vocab = vocab;
  ModelParams p = ModelParams::init(dims, rng);
  for (auto* stack : {&p.embed, &p.pred}) {
    for (auto& l : stack->layers) l.bias = random_vector(rng, static_cast<int>(l.bias.size()), 0.1, 0.5);
  }
  return p;
}

// 16 examples mixing labelled, censored, in_d and hinge-censored cases, two
// contexts each with two negatives.
inline std::vector<TrainingExample> tiny_batch(Rng& rng, int d = 6, int vocab = 8) {
  std::vector<TrainingExample> batch;
  for (int b = 0; b < 16; ++b) {
    TrainingExample ex;
    ex.day = b;
    ex.z = random_vector(rng, d);
    ex.label = b % 3 == 0 ? 1 : 0;
    ex.delta_next = b % 4 == 3 ? 0 : 1;
    ex.in_d = b % 2 == 0;
    if (ex.in_d) {
      ex.z_next = random_vector(rng, d);
      if (b % 4 == 2) {
        ex.delta_hinge = 0;
        ex.z_tuv = random_vector(rng, d);
        ex.t_uv = b - 1;
      }
    }
    for (int k = 0; k < 2; ++k) {
      ex.context_ids.push_back((b + k) % vocab);
      ex.negative_ids.push_back({(b + k + 1) % vocab, (b + k + 3) % vocab});
    }
    batch.push_back(ex);
  }
  return batch;
}

struct RandomSeriesOptions {
  int n_players = 6;
  int n_games = 5;
  int days = 30;
  int window = 3;
  double play_rate = 0.15;
  int width = 4;  // node feature length; pairs with FeatureSchema::uniform(2, 2)
};

// Random plays and daily random node features over [0, days - 1].
inline SnapshotSeries random_series(Rng& rng, const RandomSeriesOptions& o = {}) {
  SnapshotSeries s(0, o.days - 1, o.window, o.n_players, o.n_games);
  for (int u = 0; u < o.n_players; ++u) {
    for (int v = 0; v < o.n_games; ++v) {
      for (int t = 0; t < o.days; ++t) {
        if (uniform01(rng) < o.play_rate) s.add_play({u, v, t});
      }
    }
  }
  for (int t = 0; t < o.days; ++t) {
    for (int u = 0; u < o.n_players; ++u) s.player_features().set(u, t, random_vector(rng, o.width));
    for (int v = 0; v < o.n_games; ++v) s.game_features().set(v, t, random_vector(rng, o.width));
  }
  return s;
}

inline double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

// f(z) = sigmoid(z[0]) exactly: g = (relu(x), relu(-x)), pred copies g, and
// w_s = (1, -1).
inline ModelParams signed_identity() {
  ModelDims d;
  d.d = 1;
  d.m = 2;
  d.pred_hidden = 2;
  d.vocab = 0;
  Rng rng(0);
  ModelParams p = ModelParams::init(d, rng);
  p.embed.layers[0].weight << 1, -1;
  p.embed.layers[0].bias.setZero();
  p.pred.layers[0].weight.setIdentity();
  p.pred.layers[0].bias.setZero();
  p.w_s << 1, -1;
  return p;
}

inline Eigen::VectorXd scalar(double x) { return Eigen::VectorXd::Constant(1, x); }
inline double logit(double f) { return std::log(f / (1 - f)); }

// All gradient blocks as one vector.
inline Eigen::VectorXd flatten(ModelGrads& g) {
  std::vector<double> v;
  for (auto b : g.blocks()) v.insert(v.end(), b.begin(), b.end());
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace churnemb::testing
