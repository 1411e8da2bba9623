#pragma once

#include "churnemb/bigraph.hpp"
#include "churnemb/edgefeat.hpp"

#include <cstdint>
#include <vector>

namespace churnemb {

// Base daily hazard h with prod_{k < age} (1 - h growth^k) = survival; the
// closed form 1 - survival^(1/age) when growth is 1.
double solve_daily_hazard(double survival, int age, double growth = 1.0);

struct SynthConfig {
  int n_players = 500;
  int n_games = 200;
  int days = 120;
  int window = 14;  // T

  // Latent traits: trait_groups slices of trait_width values per node. Each
  // group is the node's taste vector plus independent noise of scale
  // trait_noise, and becomes one cosine feature of z.
  int trait_groups = 4;
  int trait_width = 2;
  double trait_noise = 0.1;

  // Optional play-history features: decayed play counts per game bucket for
  // players, a one-hot bucket for games. Adds two cosine features to z.
  bool history_features = false;
  int history_buckets = 16;
  double short_decay = 0.5;
  double long_decay = 0.9;

  // Optional tenure features: per game bucket, the age of the player's live
  // relationship as a unit phase (cos, sin) of 2 pi * age / tenure_period.
  // Games carry one-hots on the cos slot and on the sin slot, so z gains two
  // cosine features. Live pairs land on a ring; pairs not in play sit at 0.
  bool tenure_features = true;
  double tenure_period = 60.0;

  double relationships_per_player = 4.0;  // Poisson mean
  // 5% of neutral (a = 0) relationships survive 40 days under this growth.
  double daily_hazard = 0.0062735;
  double hazard_growth = 1.1;  // per day of relationship age
  double feature_drift = 0.02;
  double affinity_strength = 0.6;
  std::uint64_t seed = 1;

  // Schema dimensions implied by the settings above.
  int n_u() const;
  int n_v() const;
  int d() const;
  int buckets() const;

  void validate() const;
};

// The cosine-group schema that reads the generated features.
FeatureSchema synth_schema(const SynthConfig& cfg);

struct Relationship {
  EdgeKey edge;
  int start = 0;
  int lifetime = 0;        // days alive in the full simulation, >= 1
  bool observed_end = false;  // start + lifetime - 1 < last observed day
  double affinity = 0.0;
};

struct SurvivalRow {
  int age = 0;
  int at_risk = 0;        // relationships alive at this age
  double empirical = 0.0;  // fraction of all relationships alive at this age
  double expected = 0.0;   // mean closed-form survival over relationships
};

struct SynthResult {
  SnapshotSeries series;
  std::vector<Relationship> relationships;
  // Built from uncensored lifetimes, for diagnostics.
  std::vector<SurvivalRow> survival;
};

// Closed-form probability that a relationship with affinity a is still alive
// at the given age.
double survival_probability(const SynthConfig& cfg, double affinity, int age);

SynthResult generate(const SynthConfig& cfg);

}  // namespace churnemb
