#include "churnemb/bigraph.hpp"

#include "churnemb/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace churnemb {

const char* to_string(NodeKind k) {
  return k == NodeKind::Player ? "player" : "game";
}

const char* to_string(ChurnLabel l) {
  switch (l) {
    case ChurnLabel::Churned:
      return "churned";
    case ChurnLabel::Retained:
      return "retained";
    case ChurnLabel::Censored:
      return "censored";
  }
  return "?";
}

// ---- FeatureTable -----------------------------------------------------------

void FeatureTable::set(int index, int day, FeatureVector values) {
  if (index < 0 || index >= node_count()) {
    throw RangeError("feature index " + std::to_string(index) +
                     " outside [0, " + std::to_string(node_count()) + ")");
  }
  if (!values.allFinite()) {
    throw ContractViolation("non-finite feature value for node " +
                            std::to_string(index));
  }
  const Eigen::Index w = width();
  if (w >= 0 && values.size() != w) {
    throw DimensionError("feature length " + std::to_string(values.size()) +
                         " differs from table width " + std::to_string(w));
  }
  entries_[index][day] = std::move(values);
}

const FeatureVector& FeatureTable::at(int index, int day) const {
  if (index < 0 || index >= node_count()) {
    throw RangeError("feature index " + std::to_string(index) + " out of range");
  }
  const auto& h = entries_[index];
  auto it = h.upper_bound(day);
  if (it == h.begin()) {
    throw NotFound("no features for node " + std::to_string(index) +
                   " at or before day " + std::to_string(day));
  }
  return std::prev(it)->second;
}

bool FeatureTable::covers(int index, int day) const {
  if (index < 0 || index >= node_count()) return false;
  const auto& h = entries_[index];
  return h.upper_bound(day) != h.begin();
}

const std::map<int, FeatureVector>& FeatureTable::history(int index) const {
  return entries_.at(index);
}

Eigen::Index FeatureTable::width() const {
  for (const auto& h : entries_) {
    if (!h.empty()) return h.begin()->second.size();
  }
  return -1;
}

// ---- SnapshotSeries ---------------------------------------------------------

SnapshotSeries::SnapshotSeries(int t0, int t_end, int window, int n_players,
                               int n_games)
    : t0_(t0),
      t_end_(t_end),
      window_(window),
      n_players_(n_players),
      n_games_(n_games),
      player_features_(n_players),
      game_features_(n_games) {
  if (t0 > t_end) throw ConfigError("series requires t0 <= t_end");
  if (window < 1) throw ConfigError("churn window T must be >= 1");
  if (n_players < 0 || n_games < 0) throw ConfigError("negative node count");
}

void SnapshotSeries::add_play(const PlayRecord& r) {
  if (r.player < 0 || r.player >= n_players_ || r.game < 0 || r.game >= n_games_) {
    throw RangeError("play record references unknown node (" +
                     std::to_string(r.player) + "," + std::to_string(r.game) + ")");
  }
  if (r.day < t0_ || r.day > t_end_) {
    throw RangeError("play day " + std::to_string(r.day) + " outside [" +
                     std::to_string(t0_) + ", " + std::to_string(t_end_) + "]");
  }
  records_.push_back(r);
  auto& days = days_[EdgeKey{r.player, r.game}];
  auto it = std::lower_bound(days.begin(), days.end(), r.day);
  if (it == days.end() || *it != r.day) days.insert(it, r.day);
}

const FeatureVector& SnapshotSeries::features_at(NodeId node, int day) const {
  return features(node.kind).at(node.index, day);
}

void SnapshotSeries::validate() const {
  for (const auto& [edge, days] : days_) {
    if (!player_features_.covers(edge.player, days.front()) ||
        !game_features_.covers(edge.game, days.front())) {
      throw ContractViolation("features missing for pair (" +
                              std::to_string(edge.player) + "," +
                              std::to_string(edge.game) + ")");
    }
  }
}

std::span<const int> SnapshotSeries::play_days(const EdgeKey& e) const {
  auto it = days_.find(e);
  if (it == days_.end()) return {};
  return it->second;
}

bool SnapshotSeries::has_play_in(const EdgeKey& e, int first_day,
                                 int last_day) const {
  if (first_day > last_day) return false;
  auto days = play_days(e);
  auto it = std::lower_bound(days.begin(), days.end(), first_day);
  return it != days.end() && *it <= last_day;
}

std::vector<EdgeKey> SnapshotSeries::pairs() const {
  std::vector<EdgeKey> out;
  out.reserve(days_.size());
  for (const auto& kv : days_) out.push_back(kv.first);
  return out;
}

std::vector<EdgeKey> SnapshotSeries::edges_at(int t) const {
  if (t < t0_ || t > t_end_) {
    throw RangeError("day " + std::to_string(t) + " outside series");
  }
  std::vector<EdgeKey> out;
  for (const auto& [edge, days] : days_) {
    auto it = std::lower_bound(days.begin(), days.end(), t + 1);
    if (it != days.end() && *it <= t + window_) out.push_back(edge);
  }
  return out;
}

SnapshotSeries SnapshotSeries::truncated(int last_day) const {
  if (last_day < t0_ || last_day > t_end_) {
    throw RangeError("truncation day outside series");
  }
  SnapshotSeries out(t0_, last_day, window_, n_players_, n_games_);
  for (const auto& r : records_) {
    if (r.day <= last_day) out.add_play(r);
  }
  auto copy = [last_day](const FeatureTable& from, FeatureTable& to) {
    for (int i = 0; i < from.node_count(); ++i) {
      for (const auto& [day, values] : from.history(i)) {
        if (day <= last_day) to.set(i, day, values);
      }
    }
  };
  copy(player_features_, out.player_features_);
  copy(game_features_, out.game_features_);
  return out;
}

// ---- labels -----------------------------------------------------------------

namespace {

void check_day(const SnapshotSeries& s, int t) {
  if (t < s.t0() || t > s.t_end()) {
    throw RangeError("day " + std::to_string(t) + " outside [" +
                     std::to_string(s.t0()) + ", " + std::to_string(s.t_end()) + "]");
  }
}

}  // namespace

int edge_exists(const SnapshotSeries& s, const EdgeKey& e, int t) {
  check_day(s, t);
  return s.has_play_in(e, t + 1, t + s.window()) ? 1 : 0;
}

LabelOutcome churn_label(const SnapshotSeries& s, const EdgeKey& e, int t) {
  if (edge_exists(s, e, t) != 1) {
    throw ContractViolation("churn_label called on a non-edge at day " +
                            std::to_string(t));
  }
  const int T = s.window();
  if (s.has_play_in(e, t + 2, t + 1 + T)) {
    return {ChurnLabel::Retained, 1, 1};
  }
  if (t + 1 + T <= s.t_end()) {
    return {ChurnLabel::Churned, 1, 0};
  }
  return {ChurnLabel::Censored, 0, std::nullopt};
}

std::optional<int> find_last_observed_timestamp(const SnapshotSeries& s,
                                                const EdgeKey& e) {
  const int T = s.window();
  // Latest day whose outcome window closes inside the observation.
  const int last_full = s.t_end() - T - 1;
  if (last_full < s.t0()) return std::nullopt;
  // e^(t) = 1 needs a play in [t+1, t+T]. The latest play p <= last_full + T
  // witnesses every t in [p - T, p - 1]; nothing later can be witnessed.
  auto days = s.play_days(e);
  auto it = std::upper_bound(days.begin(), days.end(), last_full + T);
  if (it == days.begin()) return std::nullopt;
  const int witness = *std::prev(it);
  const int t = std::min(last_full, witness - 1);
  if (t < s.t0()) return std::nullopt;
  return t;
}

int last_observed_timestamp(const SnapshotSeries& s, const EdgeKey& e) {
  auto t = find_last_observed_timestamp(s, e);
  if (!t) {
    throw NotFound("pair (" + std::to_string(e.player) + "," +
                   std::to_string(e.game) + ") has no fully observed label day");
  }
  return *t;
}

// ---- text formats -----------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& s, int line_no) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<int>(v);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad integer '" + s + "'");
  }
}

int parse_day(const std::string& s, int line_no) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return static_cast<int>(std::floor(v));
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad day '" + s + "'");
  }
}

}  // namespace

std::vector<PlayRecord> read_plays_csv(std::istream& in) {
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  std::vector<PlayRecord> out;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    auto f = split_csv(line);
    for (auto& x : f) x = trim(x);
    if (!header_seen) {
      if (f.size() != 3 || f[0] != "player" || f[1] != "game" || f[2] != "day") {
        throw ParseError("plays file must start with header 'player,game,day'");
      }
      header_seen = true;
      continue;
    }
    if (f.size() != 3) {
      throw ParseError("line " + std::to_string(line_no) + ": expected 3 fields");
    }
    out.push_back({parse_int(f[0], line_no), parse_int(f[1], line_no),
                   parse_day(f[2], line_no)});
  }
  if (!header_seen) throw ParseError("plays file is empty");
  return out;
}

void write_plays_csv(std::ostream& out, std::span<const PlayRecord> records) {
  out << "player,game,day\n";
  for (const auto& r : records) {
    out << r.player << ',' << r.game << ',' << r.day << '\n';
  }
}

std::vector<FeatureRecord> read_features_jsonl(std::istream& in) {
  std::vector<FeatureRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FeatureRecord r;
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "player") {
        r.kind = NodeKind::Player;
      } else if (kind == "game") {
        r.kind = NodeKind::Game;
      } else {
        throw ParseError("unknown kind '" + kind + "'");
      }
      r.index = j.at("index").get<int>();
      r.day = static_cast<int>(std::floor(j.at("day").get<double>()));
      r.values = j.at("values").get<std::vector<double>>();
      out.push_back(std::move(r));
    } catch (const ParseError& e) {
      throw ParseError("features line " + std::to_string(line_no) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("features line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_features_jsonl(std::ostream& out, const SnapshotSeries& s) {
  for (NodeKind kind : {NodeKind::Player, NodeKind::Game}) {
    const auto& table = s.features(kind);
    for (int i = 0; i < table.node_count(); ++i) {
      for (const auto& [day, values] : table.history(i)) {
        nlohmann::json j;
        j["kind"] = to_string(kind);
        j["index"] = i;
        j["day"] = day;
        j["values"] = std::vector<double>(values.data(), values.data() + values.size());
        out << j.dump() << '\n';
      }
    }
  }
}

SnapshotSeries assemble_series(std::span<const PlayRecord> plays,
                               std::span<const FeatureRecord> features,
                               int window, const SeriesMeta& meta) {
  int lo = std::numeric_limits<int>::max();
  int hi = std::numeric_limits<int>::min();
  int max_player = -1;
  int max_game = -1;
  for (const auto& p : plays) {
    lo = std::min(lo, p.day);
    hi = std::max(hi, p.day);
    max_player = std::max(max_player, p.player);
    max_game = std::max(max_game, p.game);
  }
  for (const auto& f : features) {
    lo = std::min(lo, f.day);
    hi = std::max(hi, f.day);
    (f.kind == NodeKind::Player ? max_player : max_game) =
        std::max(f.kind == NodeKind::Player ? max_player : max_game, f.index);
  }
  if (lo > hi && (!meta.t0 || !meta.t_end)) {
    throw EmptyDatasetError("no play or feature records");
  }
  SnapshotSeries s(meta.t0.value_or(lo), meta.t_end.value_or(hi), window,
                   meta.n_players.value_or(max_player + 1),
                   meta.n_games.value_or(max_game + 1));
  for (const auto& f : features) {
    auto& table = f.kind == NodeKind::Player ? s.player_features() : s.game_features();
    table.set(f.index, f.day,
              Eigen::Map<const Eigen::VectorXd>(f.values.data(),
                                                static_cast<Eigen::Index>(f.values.size())));
  }
  for (const auto& p : plays) s.add_play(p);
  s.validate();
  return s;
}

SeriesMeta read_series_meta(std::istream& in) {
  SeriesMeta m;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.contains("t0")) m.t0 = j["t0"].get<int>();
    if (j.contains("t_end")) m.t_end = j["t_end"].get<int>();
    if (j.contains("n_players")) m.n_players = j["n_players"].get<int>();
    if (j.contains("n_games")) m.n_games = j["n_games"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("series meta: ") + e.what());
  }
  return m;
}

void write_series_meta(std::ostream& out, const SnapshotSeries& s) {
  nlohmann::json j;
  j["t0"] = s.t0();
  j["t_end"] = s.t_end();
  j["n_players"] = s.n_players();
  j["n_games"] = s.n_games();
  j["window"] = s.window();
  out << j.dump(2) << '\n';
}

}  // namespace churnemb
