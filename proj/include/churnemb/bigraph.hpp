#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace churnemb {

enum class NodeKind : std::uint8_t { Player = 0, Game = 1 };

inline NodeKind opposite(NodeKind k) {
  return k == NodeKind::Player ? NodeKind::Game : NodeKind::Player;
}

const char* to_string(NodeKind k);

struct NodeId {
  NodeKind kind = NodeKind::Player;
  int index = 0;

  static constexpr NodeId player(int i) { return {NodeKind::Player, i}; }
  static constexpr NodeId game(int i) { return {NodeKind::Game, i}; }

  friend constexpr auto operator<=>(const NodeId&, const NodeId&) = default;
};

// A player-game pair. Orientation is fixed: player first.
struct EdgeKey {
  int player = 0;
  int game = 0;

  NodeId player_node() const { return NodeId::player(player); }
  NodeId game_node() const { return NodeId::game(game); }

  friend constexpr auto operator<=>(const EdgeKey&, const EdgeKey&) = default;
};

struct EdgeKeyHash {
  std::size_t operator()(const EdgeKey& e) const noexcept {
    return std::hash<std::uint64_t>{}(
        (static_cast<std::uint64_t>(static_cast<std::uint32_t>(e.player)) << 32) |
        static_cast<std::uint32_t>(e.game));
  }
};

struct PlayRecord {
  int player = 0;
  int game = 0;
  int day = 0;
};

using FeatureVector = Eigen::VectorXd;

// Per-node feature history for one node kind. An entry set at day d applies to
// every day >= d until the next entry; lookups never see entries from later days.
class FeatureTable {
 public:
  FeatureTable() = default;
  explicit FeatureTable(int node_count) : entries_(node_count) {}

  int node_count() const { return static_cast<int>(entries_.size()); }

  void set(int index, int day, FeatureVector values);

  // Latest entry with entry day <= day. Throws NotFound when there is none.
  const FeatureVector& at(int index, int day) const;
  bool covers(int index, int day) const;

  const std::map<int, FeatureVector>& history(int index) const;

  // Length of the stored vectors, or -1 when the table is empty.
  Eigen::Index width() const;

 private:
  std::vector<std::map<int, FeatureVector>> entries_;
};

enum class ChurnLabel : std::uint8_t { Churned, Retained, Censored };

const char* to_string(ChurnLabel l);

// Outcome of the next-day existence indicator for an edge present at day t.
// delta == 0 exactly when the outcome is censored, in which case e_next is empty.
struct LabelOutcome {
  ChurnLabel label = ChurnLabel::Censored;
  int delta = 0;
  std::optional<int> e_next;

  // 1 for churn, 0 for retained. Only meaningful when delta == 1.
  int churn() const { return label == ChurnLabel::Churned ? 1 : 0; }
};

// Observed play history over the inclusive day range [t0, t_end] with churn
// window length `window` (T), plus per-day node features.
class SnapshotSeries {
 public:
  SnapshotSeries(int t0, int t_end, int window, int n_players, int n_games);

  int t0() const { return t0_; }
  int t_end() const { return t_end_; }
  int window() const { return window_; }
  int n_players() const { return n_players_; }
  int n_games() const { return n_games_; }

  void add_play(const PlayRecord& r);

  FeatureTable& player_features() { return player_features_; }
  FeatureTable& game_features() { return game_features_; }
  const FeatureTable& player_features() const { return player_features_; }
  const FeatureTable& game_features() const { return game_features_; }
  const FeatureTable& features(NodeKind k) const {
    return k == NodeKind::Player ? player_features_ : game_features_;
  }
  const FeatureVector& features_at(NodeId node, int day) const;

  // Throws ContractViolation if a node referenced by a play has no features at t0.
  void validate() const;

  const std::vector<PlayRecord>& records() const { return records_; }

  // Sorted distinct play days of an edge (empty span for unknown edges).
  std::span<const int> play_days(const EdgeKey& e) const;
  bool has_play_in(const EdgeKey& e, int first_day, int last_day) const;

  // Every pair with at least one play record, in (player, game) order.
  std::vector<EdgeKey> pairs() const;

  // E^(t): pairs with a play in [t+1, t+T].
  std::vector<EdgeKey> edges_at(int t) const;

  // Copy observed only up to last_day: later records are dropped and t_end
  // becomes last_day. Feature entries after last_day are dropped too.
  SnapshotSeries truncated(int last_day) const;

 private:
  int t0_;
  int t_end_;
  int window_;
  int n_players_;
  int n_games_;
  std::vector<PlayRecord> records_;
  std::map<EdgeKey, std::vector<int>> days_;
  FeatureTable player_features_;
  FeatureTable game_features_;
};

// e_uv^(t): 1 iff a play of the edge falls in [t+1, t+T].
int edge_exists(const SnapshotSeries& s, const EdgeKey& e, int t);

// Outcome for e_uv^(t+1) given e_uv^(t) = 1.
LabelOutcome churn_label(const SnapshotSeries& s, const EdgeKey& e, int t);

// t_uv: last day t with e_uv^(t) = 1 whose outcome window [t+2, t+1+T] lies
// fully inside the observation. Throws NotFound when no such day exists.
int last_observed_timestamp(const SnapshotSeries& s, const EdgeKey& e);
std::optional<int> find_last_observed_timestamp(const SnapshotSeries& s,
                                                const EdgeKey& e);

// ---- text formats ----------------------------------------------------------

// `player,game,day` with header. Fractional days are floored.
std::vector<PlayRecord> read_plays_csv(std::istream& in);
void write_plays_csv(std::ostream& out, std::span<const PlayRecord> records);

struct FeatureRecord {
  NodeKind kind = NodeKind::Player;
  int index = 0;
  int day = 0;
  std::vector<double> values;
};

// One JSON object per line: {"kind":"player"|"game","index":i,"day":d,"values":[...]}.
std::vector<FeatureRecord> read_features_jsonl(std::istream& in);
void write_features_jsonl(std::ostream& out, const SnapshotSeries& s);

struct SeriesMeta {
  std::optional<int> t0;
  std::optional<int> t_end;
  std::optional<int> n_players;
  std::optional<int> n_games;
};

// Assemble a series from parsed records. Unset meta fields are inferred from
// the data (min/max day, max index + 1).
SnapshotSeries assemble_series(std::span<const PlayRecord> plays,
                               std::span<const FeatureRecord> features,
                               int window, const SeriesMeta& meta = {});

SeriesMeta read_series_meta(std::istream& in);
void write_series_meta(std::ostream& out, const SnapshotSeries& s);

}  // namespace churnemb
