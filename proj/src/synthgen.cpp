#include "churnemb/synthgen.hpp"

#include "churnemb/errors.hpp"
#include "churnemb/rng.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace churnemb {

double solve_daily_hazard(double survival, int age, double growth) {
  if (!(survival > 0.0 && survival < 1.0) || age < 1 || !(growth > 0.0)) {
    throw ConfigError("hazard solve needs survival in (0, 1), age >= 1 and growth > 0");
  }
  if (growth == 1.0) return 1.0 - std::pow(survival, 1.0 / age);
  auto surv = [&](double h) {
    double s = 1.0;
    for (int k = 0; k < age; ++k) s *= 1.0 - std::min(1.0, h * std::pow(growth, k));
    return s;
  };
  // surv is decreasing in h; the hazard must stay below 1 at age 0.
  double lo = 0.0;
  double hi = 1.0;
  if (surv(0.0) <= survival || surv(hi) > survival) {
    throw ConfigError("no daily hazard in (0, 1) reaches the requested survival");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (surv(mid) > survival ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

int SynthConfig::buckets() const {
  return history_features || tenure_features ? std::min(history_buckets, n_games) : 0;
}

int SynthConfig::n_u() const {
  return trait_groups * trait_width + (history_features ? 2 * buckets() : 0) +
         (tenure_features ? 2 * buckets() : 0);
}
int SynthConfig::n_v() const {
  return trait_groups * trait_width + (history_features ? buckets() : 0) +
         (tenure_features ? 4 * buckets() : 0);
}
int SynthConfig::d() const {
  return trait_groups + (history_features ? 2 : 0) + (tenure_features ? 2 : 0);
}

void SynthConfig::validate() const {
  if (n_players < 1 || n_games < 1) throw ConfigError("synth needs players and games");
  if (window < 1) throw ConfigError("window T must be >= 1");
  if (days <= window) throw ConfigError("days must exceed the churn window T");
  if (trait_groups < 1 || trait_width < 1) throw ConfigError("trait layout must be positive");
  if (!(trait_noise >= 0.0)) throw ConfigError("trait_noise must be >= 0");
  if ((history_features || tenure_features) && history_buckets < 1) {
    throw ConfigError("history_buckets must be >= 1");
  }
  if (tenure_features && !(tenure_period > 0.0)) throw ConfigError("tenure_period must be > 0");
  if (!(short_decay > 0.0 && short_decay < 1.0) || !(long_decay > 0.0 && long_decay < 1.0)) {
    throw ConfigError("history decays must be in (0, 1)");
  }
  if (!(relationships_per_player > 0.0)) throw ConfigError("relationships_per_player must be > 0");
  if (!(daily_hazard > 0.0 && daily_hazard < 1.0)) throw ConfigError("daily_hazard must be in (0, 1)");
  if (!(hazard_growth > 0.0)) throw ConfigError("hazard_growth must be > 0");
  if (!(feature_drift >= 0.0)) throw ConfigError("feature_drift must be >= 0");
  if (!(affinity_strength >= 0.0 && affinity_strength < 1.0)) {
    // At 1 the hazard of a perfectly matched pair would vanish.
    throw ConfigError("affinity_strength must be in [0, 1)");
  }
}

FeatureSchema synth_schema(const SynthConfig& cfg) {
  cfg.validate();
  FeatureSchema s;
  s.n_u = cfg.n_u();
  s.n_v = cfg.n_v();
  const int w = cfg.trait_width;
  for (int g = 0; g < cfg.trait_groups; ++g) s.groups.push_back({{g * w, (g + 1) * w}, {g * w, (g + 1) * w}});
  const int b = cfg.buckets();
  int pu = cfg.trait_groups * w;
  int pv = pu;
  if (cfg.history_features) {
    const Slice game{pv, pv + b};
    s.groups.push_back({{pu, pu + b}, game});          // recent activity share
    s.groups.push_back({{pu + b, pu + 2 * b}, game});  // long-run activity share
    pu += 2 * b;
    pv += b;
  }
  if (cfg.tenure_features) {
    s.groups.push_back({{pu, pu + 2 * b}, {pv, pv + 2 * b}});          // cos of tenure phase
    s.groups.push_back({{pu, pu + 2 * b}, {pv + 2 * b, pv + 4 * b}});  // sin of tenure phase
  }
  s.validate();
  return s;
}

namespace {

double daily_hazard_at(const SynthConfig& cfg, double affinity, int age) {
  const double h = cfg.daily_hazard * std::pow(cfg.hazard_growth, age) *
                   (1.0 - cfg.affinity_strength * affinity);
  return std::clamp(h, 1e-12, 1.0 - 1e-12);
}

int poisson(Rng& rng, double mean) {
  const double limit = std::exp(-mean);
  int k = 0;
  double p = uniform01(rng);
  while (p > limit) {
    ++k;
    p *= uniform01(rng);
  }
  return k;
}

Eigen::VectorXd normal_vector(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = standard_normal(rng);
  return v;
}

}  // namespace

double survival_probability(const SynthConfig& cfg, double affinity, int age) {
  double s = 1.0;
  for (int k = 0; k < age; ++k) s *= 1.0 - daily_hazard_at(cfg, affinity, k);
  return s;
}

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int t0 = 0;
  const int t_end = cfg.days - 1;
  const int tw = cfg.trait_groups * cfg.trait_width;

  std::vector<Eigen::VectorXd> player_traits;
  std::vector<Eigen::VectorXd> game_traits;
  auto traits = [&] {
    const Eigen::VectorXd taste = normal_vector(rng, cfg.trait_width);
    Eigen::VectorXd x(tw);
    for (int g = 0; g < cfg.trait_groups; ++g) {
      x.segment(g * cfg.trait_width, cfg.trait_width) =
          taste + cfg.trait_noise * normal_vector(rng, cfg.trait_width);
    }
    return x;
  };
  for (int u = 0; u < cfg.n_players; ++u) player_traits.push_back(traits());
  for (int v = 0; v < cfg.n_games; ++v) game_traits.push_back(traits());
  auto affinity = [&](int u, int v) {
    return cosine_similarity(player_traits[u], game_traits[v]);
  };

  SynthResult out{SnapshotSeries(t0, t_end, cfg.window, cfg.n_players, cfg.n_games), {}, {}};

  // Adoption and lifetimes.
  const int max_age = 50 * cfg.days;
  std::vector<double> weight(cfg.n_games);
  for (int u = 0; u < cfg.n_players; ++u) {
    const int k = std::min(poisson(rng, cfg.relationships_per_player), cfg.n_games);
    for (int v = 0; v < cfg.n_games; ++v) weight[v] = 1.0 + cfg.affinity_strength * affinity(u, v);
    for (int pick = 0; pick < k; ++pick) {
      double total = 0.0;
      for (double w : weight) total += w;
      double r = uniform01(rng) * total;
      int v = -1;
      for (int g = 0; g < cfg.n_games; ++g) {
        if (weight[g] <= 0.0) continue;
        v = g;  // the last candidate absorbs rounding at the tail
        if (r < weight[g]) break;
        r -= weight[g];
      }
      weight[v] = 0.0;

      Relationship rel;
      rel.edge = {u, v};
      rel.affinity = affinity(u, v);
      rel.start = t0 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(cfg.days)));
      int life = 1;
      while (life < max_age && uniform01(rng) >= daily_hazard_at(cfg, rel.affinity, life - 1)) {
        ++life;
      }
      rel.lifetime = life;
      rel.observed_end = rel.start + life - 1 < t_end;
      out.relationships.push_back(rel);
    }
  }
  std::sort(out.relationships.begin(), out.relationships.end(),
            [](const Relationship& a, const Relationship& b) { return a.edge < b.edge; });

  // Plays on every alive day inside the observation.
  for (const auto& rel : out.relationships) {
    const int last = std::min(t_end, rel.start + rel.lifetime - 1);
    for (int day = rel.start; day <= last; ++day) out.series.add_play({rel.edge.player, rel.edge.game, day});
  }

  // Features.
  const int nb = cfg.buckets();
  const bool daily = cfg.feature_drift > 0.0 || cfg.history_features || cfg.tenure_features;
  std::vector<Eigen::VectorXd> recent(cfg.n_players, Eigen::VectorXd::Zero(nb));
  std::vector<Eigen::VectorXd> longrun(cfg.n_players, Eigen::VectorXd::Zero(nb));
  // Plays per day, grouped by player.
  std::vector<std::vector<EdgeKey>> plays_by_day(cfg.days);
  for (const auto& r : out.series.records()) plays_by_day[r.day - t0].push_back({r.player, r.game});
  std::map<EdgeKey, int> started;
  for (const auto& rel : out.relationships) started[rel.edge] = rel.start;
  const double pi = std::acos(-1.0);
  std::vector<Eigen::VectorXd> tenure(cfg.n_players, Eigen::VectorXd::Zero(2 * nb));

  for (int day = t0; day <= t_end; ++day) {
    if (day > t0 && !daily) break;
    if (cfg.history_features) {
      for (int u = 0; u < cfg.n_players; ++u) {
        recent[u] *= cfg.short_decay;
        longrun[u] *= cfg.long_decay;
      }
      // Activity through the end of `day` is known on `day`.
      for (const auto& e : plays_by_day[day - t0]) {
        recent[e.player][e.game % nb] += 1.0;
        longrun[e.player][e.game % nb] += 1.0;
      }
    }
    if (cfg.tenure_features) {
      for (auto& t : tenure) t.setZero();
      // On a bucket collision the later game in play order wins.
      for (const auto& e : plays_by_day[day - t0]) {
        const double phase = 2.0 * pi * (day - started.at(e)) / cfg.tenure_period;
        tenure[e.player][2 * (e.game % nb)] = std::cos(phase);
        tenure[e.player][2 * (e.game % nb) + 1] = std::sin(phase);
      }
    }
    for (int u = 0; u < cfg.n_players; ++u) {
      Eigen::VectorXd x(cfg.n_u());
      x.head(tw) = player_traits[u];
      if (cfg.feature_drift > 0.0) x.head(tw) += cfg.feature_drift * normal_vector(rng, tw);
      if (cfg.history_features) {
        x.segment(tw, nb) = recent[u];
        x.segment(tw + nb, nb) = longrun[u];
      }
      if (cfg.tenure_features) x.tail(2 * nb) = tenure[u];
      out.series.player_features().set(u, day, std::move(x));
    }
    for (int v = 0; v < cfg.n_games; ++v) {
      Eigen::VectorXd x(cfg.n_v());
      x.head(tw) = game_traits[v];
      if (cfg.feature_drift > 0.0) x.head(tw) += cfg.feature_drift * normal_vector(rng, tw);
      if (cfg.history_features) {
        x.segment(tw, nb).setZero();
        x[tw + v % nb] = 1.0;
      }
      if (cfg.tenure_features) {
        x.tail(4 * nb).setZero();
        x[x.size() - 4 * nb + 2 * (v % nb)] = 1.0;
        x[x.size() - 2 * nb + 2 * (v % nb) + 1] = 1.0;
      }
      out.series.game_features().set(v, day, std::move(x));
    }
  }

  // Survival table over full simulated lifetimes.
  std::vector<double> expected(cfg.days + 1, 0.0);
  std::vector<int> at_risk(cfg.days + 1, 0);
  for (const auto& rel : out.relationships) {
    double s = 1.0;
    for (int age = 0; age <= cfg.days; ++age) {
      expected[age] += s;
      at_risk[age] += rel.lifetime > age ? 1 : 0;
      s *= 1.0 - daily_hazard_at(cfg, rel.affinity, age);
    }
  }
  const auto n = static_cast<double>(out.relationships.size());
  for (int age = 0; age <= cfg.days; ++age) {
    out.survival.push_back({age, at_risk[age], n > 0 ? at_risk[age] / n : 0.0,
                            n > 0 ? expected[age] / n : 0.0});
  }
  return out;
}

}  // namespace churnemb
