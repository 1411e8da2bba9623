#include "churnemb/edgefeat.hpp"

#include "churnemb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace churnemb {

void FeatureSchema::validate() const {
  if (d() < 1) throw ConfigError("feature schema needs at least one group");
  for (const auto& g : groups) {
    if (g.player.begin < 0 || g.player.end > n_u || g.player.size() <= 0 ||
        g.game.begin < 0 || g.game.end > n_v || g.game.size() <= 0) {
      throw ConfigError("feature group slice outside node feature range");
    }
    if (g.player.size() != g.game.size()) {
      throw ConfigError("paired feature slices must have equal length");
    }
  }
  for (int c : player_passthrough) {
    if (c < 0 || c >= n_u) throw ConfigError("passthrough column out of range");
  }
}

FeatureSchema FeatureSchema::uniform(int n_groups, int group_width) {
  FeatureSchema s;
  s.n_u = s.n_v = n_groups * group_width;
  for (int k = 0; k < n_groups; ++k) {
    const Slice sl{k * group_width, (k + 1) * group_width};
    s.groups.push_back({sl, sl});
  }
  return s;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine of vectors with lengths " +
                         std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& a,
                         const Eigen::Ref<const Eigen::VectorXd>& b) {
  return cosine_similarity(std::span<const double>(a.data(), a.size()),
                           std::span<const double>(b.data(), b.size()));
}

EdgeFeatureVector edge_features(const Eigen::Ref<const Eigen::VectorXd>& x_u,
                                const Eigen::Ref<const Eigen::VectorXd>& x_v,
                                const FeatureSchema& schema) {
  if (x_u.size() != schema.n_u || x_v.size() != schema.n_v) {
    throw DimensionError("node features (" + std::to_string(x_u.size()) + ", " +
                         std::to_string(x_v.size()) + ") do not match schema (" +
                         std::to_string(schema.n_u) + ", " +
                         std::to_string(schema.n_v) + ")");
  }
  EdgeFeatureVector z(schema.d());
  Eigen::Index k = 0;
  for (const auto& g : schema.groups) {
    z[k++] = cosine_similarity(x_u.segment(g.player.begin, g.player.size()),
                               x_v.segment(g.game.begin, g.game.size()));
  }
  for (int c : schema.player_passthrough) z[k++] = x_u[c];
  return z;
}

namespace {

Slice parse_slice(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("slice '" + s + "' lacks ':'");
  try {
    return {std::stoi(s.substr(0, colon)), std::stoi(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ConfigError("bad slice '" + s + "'");
  }
}

}  // namespace

FeatureSchema parse_schema_section(
    const std::vector<std::pair<std::string, std::string>>& entries) {
  FeatureSchema s;
  for (const auto& [key, value] : entries) {
    if (key == "n_u") {
      s.n_u = std::stoi(value);
    } else if (key == "n_v") {
      s.n_v = std::stoi(value);
    } else if (key == "group") {
      std::istringstream ss(value);
      std::string p, g;
      if (!(ss >> p >> g)) throw ConfigError("group needs 'p0:p1 g0:g1'");
      s.groups.push_back({parse_slice(p), parse_slice(g)});
    } else if (key == "passthrough") {
      std::istringstream ss(value);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) s.player_passthrough.push_back(std::stoi(item));
      }
    } else {
      throw ConfigError("unknown [features] key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

std::string format_schema_section(const FeatureSchema& schema) {
  std::ostringstream out;
  out << "[features]\n";
  out << "n_u = " << schema.n_u << "\n";
  out << "n_v = " << schema.n_v << "\n";
  for (const auto& g : schema.groups) {
    out << "group = " << g.player.begin << ':' << g.player.end << ' '
        << g.game.begin << ':' << g.game.end << "\n";
  }
  if (!schema.player_passthrough.empty()) {
    out << "passthrough = ";
    for (std::size_t i = 0; i < schema.player_passthrough.size(); ++i) {
      out << (i ? "," : "") << schema.player_passthrough[i];
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace churnemb
