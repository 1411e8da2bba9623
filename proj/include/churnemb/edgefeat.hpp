#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace churnemb {

// Half-open index range [begin, end) into a node feature vector.
struct Slice {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  friend bool operator==(const Slice&, const Slice&) = default;
};

// One edge feature: cosine between a player slice and a game slice of equal length.
struct SliceGroup {
  Slice player;
  Slice game;
  friend bool operator==(const SliceGroup&, const SliceGroup&) = default;
};

// How raw node features of length n_u (players) and n_v (games) reduce to the
// d-dimensional edge feature vector. Passthrough columns copy a player value
// into z verbatim and are off by default.
struct FeatureSchema {
  int n_u = 0;
  int n_v = 0;
  std::vector<SliceGroup> groups;
  std::vector<int> player_passthrough;

  int d() const {
    return static_cast<int>(groups.size() + player_passthrough.size());
  }

  // Throws ConfigError when the invariants do not hold.
  void validate() const;

  // Equal-width groups laid side by side over both vectors.
  static FeatureSchema uniform(int n_groups, int group_width);
};

using EdgeFeatureVector = Eigen::VectorXd;

// Cosine of two equal-length vectors; 0 when either has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);
double cosine_similarity(const Eigen::Ref<const Eigen::VectorXd>& a,
                         const Eigen::Ref<const Eigen::VectorXd>& b);

EdgeFeatureVector edge_features(const Eigen::Ref<const Eigen::VectorXd>& x_u,
                                const Eigen::Ref<const Eigen::VectorXd>& x_v,
                                const FeatureSchema& schema);

// `[features]` section body: one `group = p0:p1 g0:g1` line per group, plus
// `n_u`, `n_v` and optional `passthrough = i,j,...`.
FeatureSchema parse_schema_section(const std::vector<std::pair<std::string, std::string>>& entries);
std::string format_schema_section(const FeatureSchema& schema);

}  // namespace churnemb
