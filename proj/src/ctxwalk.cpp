#include "churnemb/ctxwalk.hpp"

#include "churnemb/edgefeat.hpp"
#include "churnemb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace churnemb {

void WalkConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must be in (0, 1]");
  if (!(p > 0.0) || !(q > 0.0)) throw ConfigError("p and q must be positive");
  if (walk_len < 1) throw ConfigError("walk_len must be >= 1");
  if (contexts_per_edge < 1) throw ConfigError("contexts_per_edge must be >= 1");
  if (k_aug < 1) throw ConfigError("k_aug must be >= 1");
  if (negatives_per_context < 1) throw ConfigError("negatives_per_context must be >= 1");
}

// ---- Snapshot ---------------------------------------------------------------

Snapshot::Snapshot(int n_players, int n_games, int day)
    : n_players_(n_players),
      n_games_(n_games),
      day_(day),
      player_adj_(n_players),
      game_adj_(n_games),
      player_x_(n_players),
      game_x_(n_games) {}

Snapshot Snapshot::from_series(const SnapshotSeries& series, int day) {
  Snapshot s(series.n_players(), series.n_games(), day);
  for (const auto& e : series.edges_at(day)) s.add_edge(e);
  for (NodeKind kind : {NodeKind::Player, NodeKind::Game}) {
    const auto& table = series.features(kind);
    const Eigen::Index width = std::max<Eigen::Index>(table.width(), 0);
    for (int i = 0; i < table.node_count(); ++i) {
      s.set_features({kind, i}, table.covers(i, day) ? table.at(i, day)
                                                     : Eigen::VectorXd::Zero(width));
    }
  }
  s.finalize();
  return s;
}

void Snapshot::add_edge(const EdgeKey& e) {
  if (e.player < 0 || e.player >= n_players_ || e.game < 0 || e.game >= n_games_) {
    throw RangeError("snapshot edge references unknown node");
  }
  player_adj_[e.player].push_back(e.game);
  game_adj_[e.game].push_back(e.player);
}

void Snapshot::set_features(NodeId node, Eigen::VectorXd x) {
  auto& v = node.kind == NodeKind::Player ? player_x_ : game_x_;
  v.at(node.index) = std::move(x);
}

void Snapshot::finalize() {
  edge_count_ = 0;
  for (auto* adj : {&player_adj_, &game_adj_}) {
    for (auto& list : *adj) {
      std::sort(list.begin(), list.end());
      list.erase(std::unique(list.begin(), list.end()), list.end());
    }
  }
  for (const auto& list : player_adj_) edge_count_ += list.size();
}

bool Snapshot::has_edge(const EdgeKey& e) const {
  if (e.player < 0 || e.player >= n_players_) return false;
  const auto& list = player_adj_[e.player];
  return std::binary_search(list.begin(), list.end(), e.game);
}

bool Snapshot::adjacent(NodeId a, NodeId b) const {
  if (a.kind == b.kind) return false;
  return a.kind == NodeKind::Player ? has_edge({a.index, b.index})
                                    : has_edge({b.index, a.index});
}

std::span<const int> Snapshot::neighbors(NodeId node) const {
  const auto& adj = node.kind == NodeKind::Player ? player_adj_ : game_adj_;
  return adj.at(node.index);
}

const Eigen::VectorXd& Snapshot::features(NodeId node) const {
  const auto& v = node.kind == NodeKind::Player ? player_x_ : game_x_;
  return v.at(node.index);
}

double Snapshot::similarity(NodeId a, NodeId b) const {
  const auto& xa = features(a);
  const auto& xb = features(b);
  if (xa.size() != xb.size() || xa.size() == 0) return 0.0;
  return cosine_similarity(xa, xb);
}

// ---- AugmentedIndex ---------------------------------------------------------

AugmentedIndex::AugmentedIndex(int n_players, int n_games)
    : player_(n_players), game_(n_games) {}

std::span<const AugmentedNeighbor> AugmentedIndex::neighbors(NodeId node) const {
  const auto& v = node.kind == NodeKind::Player ? player_ : game_;
  return v.at(node.index);
}

void AugmentedIndex::set(NodeId node, std::vector<AugmentedNeighbor> list) {
  auto& v = node.kind == NodeKind::Player ? player_ : game_;
  v.at(node.index) = std::move(list);
}

bool AugmentedIndex::contains(NodeId from, int to_index) const {
  for (const auto& n : neighbors(from)) {
    if (n.index == to_index) return true;
  }
  return false;
}

std::size_t AugmentedIndex::link_count() const {
  std::size_t n = 0;
  for (const auto& l : player_) n += l.size();
  for (const auto& l : game_) n += l.size();
  return n;
}

AugmentedIndex build_augmented_index(const Snapshot& snapshot, const WalkConfig& cfg) {
  cfg.validate();
  AugmentedIndex index(snapshot.node_count(NodeKind::Player),
                       snapshot.node_count(NodeKind::Game));
  const double threshold = 1.0 - cfg.epsilon;
  for (NodeKind kind : {NodeKind::Player, NodeKind::Game}) {
    const int n = snapshot.node_count(kind);
    if (n < 2) continue;
    Eigen::Index width = 0;
    for (int i = 0; i < n; ++i) {
      width = std::max(width, snapshot.features({kind, i}).size());
    }
    if (width == 0) continue;
    // Row-normalized feature matrix; zero rows stay zero so their cosine is 0.
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, width);
    for (int i = 0; i < n; ++i) {
      const auto& f = snapshot.features({kind, i});
      if (f.size() != width) continue;
      const double norm = f.norm();
      if (norm > 0.0) x.row(i) = f.transpose() / norm;
    }
    const Eigen::MatrixXd sims = x * x.transpose();
    std::vector<AugmentedNeighbor> cand;
    for (int i = 0; i < n; ++i) {
      cand.clear();
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double s = std::clamp(0.5 * (sims(i, j) + sims(j, i)), -1.0, 1.0);
        if (s > threshold) cand.push_back({j, s});
      }
      const auto keep = std::min<std::size_t>(cand.size(), cfg.k_aug);
      std::partial_sort(cand.begin(), cand.begin() + keep, cand.end(),
                        [](const AugmentedNeighbor& a, const AugmentedNeighbor& b) {
                          if (a.similarity != b.similarity) return a.similarity > b.similarity;
                          return a.index < b.index;
                        });
      cand.resize(keep);
      index.set({kind, i}, cand);
    }
  }
  return index;
}

// ---- transitions ------------------------------------------------------------

namespace {

bool sorted_intersect(std::span<const int> a, std::span<const int> b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      return true;
    }
  }
  return false;
}

// Same-type o is two hops from prev: through a shared bipartite neighbor or
// through one intermediate augmented link.
bool two_hops(const Snapshot& snap, const AugmentedIndex& aug, NodeId prev, NodeId o) {
  if (sorted_intersect(snap.neighbors(prev), snap.neighbors(o))) return true;
  for (const auto& a : aug.neighbors(prev)) {
    if (a.index != o.index && aug.contains({prev.kind, a.index}, o.index)) return true;
  }
  return false;
}

}  // namespace

std::vector<Transition> transition_distribution(const Snapshot& snapshot,
                                                const AugmentedIndex& aug,
                                                NodeId prev, NodeId curr,
                                                const WalkConfig& cfg) {
  if (prev.kind == curr.kind) {
    throw ContractViolation("transition_distribution needs prev and curr of opposite kinds");
  }
  const NodeKind kind = prev.kind;
  std::vector<Transition> out;
  out.push_back({prev, 1.0 / cfg.p});

  const auto n1 = aug.neighbors(prev);
  auto in_n1 = [&](int idx) {
    return std::any_of(n1.begin(), n1.end(),
                       [idx](const AugmentedNeighbor& a) { return a.index == idx; });
  };
  for (const auto& a : n1) {
    if (a.index == prev.index) continue;
    out.push_back({{kind, a.index}, std::max(a.similarity, 0.0) / cfg.q});
  }
  // Distance-2 candidates only count when adjacent to curr, so enumerate curr's
  // neighbors (all of prev's kind) instead of the whole two-hop ball.
  for (int o : snapshot.neighbors(curr)) {
    if (o == prev.index || in_n1(o)) continue;
    const NodeId node{kind, o};
    if (!two_hops(snapshot, aug, prev, node)) continue;
    out.push_back({node, std::max(snapshot.similarity(prev, node), 0.0) / cfg.q});
  }

  double total = 0.0;
  for (const auto& t : out) total += t.probability;
  if (!(total > 0.0) || !std::isfinite(total)) return {};
  std::erase_if(out, [](const Transition& t) { return t.probability <= 0.0; });
  for (auto& t : out) t.probability /= total;
  return out;
}

std::vector<ContextPair> sample_contexts(const EdgeKey& seed, const Snapshot& snapshot,
                                         const AugmentedIndex& aug,
                                         const WalkConfig& cfg, Rng& rng) {
  if (!snapshot.has_edge(seed)) {
    throw ContractViolation("sample_contexts seed (" + std::to_string(seed.player) +
                            "," + std::to_string(seed.game) + ") is not an edge");
  }
  const auto want = static_cast<std::size_t>(cfg.contexts_per_edge);
  std::vector<ContextPair> out;
  std::set<ContextPair> seen{seed};
  const int max_walks = 5 * cfg.contexts_per_edge;
  for (int w = 0; w < max_walks && out.size() < want; ++w) {
    NodeId prev = seed.player_node();
    NodeId curr = seed.game_node();
    for (int step = 0; step < cfg.walk_len && out.size() < want; ++step) {
      const auto dist = transition_distribution(snapshot, aug, prev, curr, cfg);
      if (dist.empty()) break;
      const double u = uniform01(rng);
      double acc = 0.0;
      NodeId next = dist.back().node;
      for (const auto& t : dist) {
        acc += t.probability;
        if (u < acc) {
          next = t.node;
          break;
        }
      }
      const ContextPair pair = curr.kind == NodeKind::Player
                                   ? ContextPair{curr.index, next.index}
                                   : ContextPair{next.index, curr.index};
      if (seen.insert(pair).second) out.push_back(pair);
      prev = curr;
      curr = next;
    }
  }
  return out;
}

// ---- vocabulary and negatives ---------------------------------------------------

int ContextVocabulary::add(const ContextPair& pair) {
  auto [it, inserted] = ids_.try_emplace(pair, size());
  if (inserted) {
    pairs_.push_back(pair);
    counts_.push_back(0);
  }
  ++counts_[it->second];
  return it->second;
}

std::optional<int> ContextVocabulary::find(const ContextPair& pair) const {
  auto it = ids_.find(pair);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<int> sample_negatives(const ContextVocabulary& vocab, int exclude, int n,
                                  Rng& rng) {
  return NegativeSampler(vocab, NegativeDistribution::Uniform).sample(exclude, n, rng);
}

NegativeSampler::NegativeSampler(const ContextVocabulary& vocab, NegativeDistribution dist)
    : size_(vocab.size()), dist_(dist) {
  if (size_ < 2) {
    throw VocabularyError("negative sampling needs a vocabulary of at least 2 contexts");
  }
  if (dist_ == NegativeDistribution::Unigram075) {
    cumulative_.reserve(size_);
    double acc = 0.0;
    for (long long c : vocab.counts()) {
      acc += std::pow(static_cast<double>(std::max<long long>(c, 1)), 0.75);
      cumulative_.push_back(acc);
    }
  }
}

std::vector<int> NegativeSampler::sample(int exclude, int n, Rng& rng) const {
  std::vector<int> out;
  out.reserve(std::max(n, 0));
  for (int k = 0; k < n; ++k) {
    if (dist_ == NegativeDistribution::Uniform) {
      const bool excluding = exclude >= 0 && exclude < size_;
      int id = static_cast<int>(
          uniform_index(rng, static_cast<std::uint64_t>(excluding ? size_ - 1 : size_)));
      if (excluding && id >= exclude) ++id;
      out.push_back(id);
    } else {
      int id;
      do {
        const double u = uniform01(rng) * cumulative_.back();
        id = static_cast<int>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) -
                              cumulative_.begin());
        id = std::min(id, size_ - 1);
      } while (id == exclude);
      out.push_back(id);
    }
  }
  return out;
}

}  // namespace churnemb
