#pragma once

#include "churnemb/bigraph.hpp"
#include "churnemb/rng.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace churnemb {

enum class NegativeDistribution { Uniform, Unigram075 };

struct WalkConfig {
  double epsilon = 1.0;  // augmented-edge filter: similarity > 1 - epsilon
  double p = 1.0;        // return weight 1/p
  double q = 0.05;       // in-out weight sim/q
  int walk_len = 8;
  int contexts_per_edge = 4;
  int k_aug = 10;
  int negatives_per_context = 5;
  NegativeDistribution negatives = NegativeDistribution::Uniform;

  void validate() const;
};

// One day of the attributed bipartite graph: edges E^(t) and node features.
class Snapshot {
 public:
  Snapshot(int n_players, int n_games, int day = 0);

  static Snapshot from_series(const SnapshotSeries& series, int day);

  // Building interface; call finalize() once all edges are in.
  void add_edge(const EdgeKey& e);
  void set_features(NodeId node, Eigen::VectorXd x);
  void finalize();

  int day() const { return day_; }
  int node_count(NodeKind k) const {
    return k == NodeKind::Player ? n_players_ : n_games_;
  }
  bool has_edge(const EdgeKey& e) const;
  bool adjacent(NodeId a, NodeId b) const;
  std::span<const int> neighbors(NodeId node) const;
  const Eigen::VectorXd& features(NodeId node) const;
  double similarity(NodeId a, NodeId b) const;
  std::size_t edge_count() const { return edge_count_; }

 private:
  int n_players_;
  int n_games_;
  int day_;
  std::size_t edge_count_ = 0;
  std::vector<std::vector<int>> player_adj_;
  std::vector<std::vector<int>> game_adj_;
  std::vector<Eigen::VectorXd> player_x_;
  std::vector<Eigen::VectorXd> game_x_;
};

struct AugmentedNeighbor {
  int index = 0;
  double similarity = 0.0;
};

// Same-type similarity links used by the walker only. Lists are directed:
// entry b in the list of a means the walker may hop a -> b.
class AugmentedIndex {
 public:
  AugmentedIndex(int n_players, int n_games);

  std::span<const AugmentedNeighbor> neighbors(NodeId node) const;
  void set(NodeId node, std::vector<AugmentedNeighbor> list);
  bool contains(NodeId from, int to_index) const;
  std::size_t link_count() const;

 private:
  std::vector<std::vector<AugmentedNeighbor>> player_;
  std::vector<std::vector<AugmentedNeighbor>> game_;
};

// Exact top-k_aug same-type neighbors by cosine above 1 - epsilon; ties go to
// the lower index.
AugmentedIndex build_augmented_index(const Snapshot& snapshot, const WalkConfig& cfg);

struct Transition {
  NodeId node;
  double probability = 0.0;
};

// Next-node distribution for a walker that just moved prev -> curr. Only nodes
// of prev's kind receive mass. An empty result means the walker is stuck.
std::vector<Transition> transition_distribution(const Snapshot& snapshot,
                                                const AugmentedIndex& aug,
                                                NodeId prev, NodeId curr,
                                                const WalkConfig& cfg);

// A context of an edge. Same (player, game) layout as EdgeKey but need not be
// an edge of the snapshot.
using ContextPair = EdgeKey;

// Up to C distinct context pairs of `seed` gathered from attributed walks that
// start with the traversal player -> game. The seed itself is never returned.
std::vector<ContextPair> sample_contexts(const EdgeKey& seed, const Snapshot& snapshot,
                                         const AugmentedIndex& aug,
                                         const WalkConfig& cfg, Rng& rng);

// Dense integer ids for context pairs, assigned in insertion order.
class ContextVocabulary {
 public:
  int add(const ContextPair& pair);
  std::optional<int> find(const ContextPair& pair) const;
  const ContextPair& pair(int id) const { return pairs_.at(id); }
  int size() const { return static_cast<int>(pairs_.size()); }
  // Number of times add() saw each id.
  std::span<const long long> counts() const { return counts_; }

 private:
  std::unordered_map<ContextPair, int, EdgeKeyHash> ids_;
  std::vector<ContextPair> pairs_;
  std::vector<long long> counts_;
};

// n ids drawn i.i.d. uniformly from the vocabulary with `exclude` removed.
std::vector<int> sample_negatives(const ContextVocabulary& vocab, int exclude, int n,
                                  Rng& rng);

// Sampler with a fixed distribution over the vocabulary. Unigram075 weights
// ids by count^0.75.
class NegativeSampler {
 public:
  NegativeSampler(const ContextVocabulary& vocab, NegativeDistribution dist);
  std::vector<int> sample(int exclude, int n, Rng& rng) const;

 private:
  int size_;
  NegativeDistribution dist_;
  std::vector<double> cumulative_;
};

}  // namespace churnemb
