#include "churnemb/config.hpp"

#include "churnemb/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <sstream>

namespace churnemb {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != static_cast<double>(static_cast<int>(d))) {
    throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
  }
  return static_cast<int>(d);
}

bool to_bool(const std::string& key, const std::string& v) {
  std::string s = v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

[[noreturn]] void unknown(const std::string& section, const std::string& key) {
  throw ConfigError("unknown key '" + key + "' in [" + section + "]");
}

}  // namespace

IniFile parse_ini(std::istream& in) {
  IniFile out;
  std::string section;
  out[section];
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      out[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    out[section].emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void RunConfig::apply(const IniFile& ini) {
  for (const auto& [section, entries] : ini) {
    if (section == "features") {
      if (!entries.empty()) schema = parse_schema_section(entries);
      continue;
    }
    for (const auto& [key, value] : entries) {
      if (section.empty() || section == "run") {
        if (key == "T" || key == "window") window = to_int(key, value);
        else if (key == "train_fraction") train_fraction = to_double(key, value);
        else if (key == "threshold") threshold = to_double(key, value);
        else if (key == "data_dir") data_dir = value;
        else unknown(section, key);
      } else if (section == "walk") {
        auto& w = train.walk;
        if (key == "epsilon") w.epsilon = to_double(key, value);
        else if (key == "p") w.p = to_double(key, value);
        else if (key == "q") w.q = to_double(key, value);
        else if (key == "walk_len") w.walk_len = to_int(key, value);
        else if (key == "contexts") w.contexts_per_edge = to_int(key, value);
        else if (key == "k_aug") w.k_aug = to_int(key, value);
        else if (key == "negatives") w.negatives_per_context = to_int(key, value);
        else if (key == "negative_distribution") {
          if (value == "uniform") w.negatives = NegativeDistribution::Uniform;
          else if (value == "unigram075") w.negatives = NegativeDistribution::Unigram075;
          else throw ConfigError("negative_distribution must be uniform or unigram075");
        } else unknown(section, key);
      } else if (section == "loss") {
        auto& l = train.loss_weights;
        if (key == "alpha") l.alpha = to_double(key, value);
        else if (key == "beta") l.beta = to_double(key, value);
        else if (key == "gamma") l.gamma = to_double(key, value);
        else if (key.size() == 7 && key.rfind("lambda", 0) == 0 && key[6] >= '0' && key[6] <= '4') {
          l.lambda[key[6] - '0'] = to_double(key, value);
        } else unknown(section, key);
      } else if (section == "train") {
        if (key == "epochs") train.epochs = to_int(key, value);
        else if (key == "batch") train.batch_size = to_int(key, value);
        else if (key == "eta0") train.eta0 = to_double(key, value);
        else if (key == "mode") train.mode = parse_train_mode(value);
        else if (key == "seed") train.seed = static_cast<std::uint64_t>(to_double(key, value));
        else if (key == "m") train.m = to_int(key, value);
        else if (key == "l_p") train.l_p = to_int(key, value);
        else if (key == "l_n") train.l_n = to_int(key, value);
        else if (key == "pred_hidden") train.pred_hidden = to_int(key, value);
        else if (key == "context_mode") {
          if (value == "negative_sampling") train.context_mode = ContextMode::NegativeSampling;
          else if (value == "full_softmax") train.context_mode = ContextMode::FullSoftmax;
          else throw ConfigError("context_mode must be negative_sampling or full_softmax");
        } else if (key == "loss_scaling") {
          if (value == "per_term") train.scaling = LossScaling::PerTerm;
          else if (value == "sum") train.scaling = LossScaling::Sum;
          else throw ConfigError("loss_scaling must be per_term or sum");
        } else unknown(section, key);
      } else if (section == "synth") {
        auto& s = synth;
        if (key == "players") s.n_players = to_int(key, value);
        else if (key == "games") s.n_games = to_int(key, value);
        else if (key == "days") s.days = to_int(key, value);
        else if (key == "trait_groups") s.trait_groups = to_int(key, value);
        else if (key == "trait_width") s.trait_width = to_int(key, value);
        else if (key == "trait_noise") s.trait_noise = to_double(key, value);
        else if (key == "history_features") s.history_features = to_bool(key, value);
        else if (key == "history_buckets") s.history_buckets = to_int(key, value);
        else if (key == "short_decay") s.short_decay = to_double(key, value);
        else if (key == "long_decay") s.long_decay = to_double(key, value);
        else if (key == "tenure_features") s.tenure_features = to_bool(key, value);
        else if (key == "tenure_period") s.tenure_period = to_double(key, value);
        else if (key == "relationships_per_player") s.relationships_per_player = to_double(key, value);
        else if (key == "daily_hazard") s.daily_hazard = to_double(key, value);
        else if (key == "hazard_growth") s.hazard_growth = to_double(key, value);
        else if (key == "feature_drift") s.feature_drift = to_double(key, value);
        else if (key == "affinity_strength") s.affinity_strength = to_double(key, value);
        else if (key == "seed") s.seed = static_cast<std::uint64_t>(to_double(key, value));
        else unknown(section, key);
      } else {
        throw ConfigError("unknown section [" + section + "]");
      }
    }
  }
  synth.window = window;
}

void RunConfig::validate() const {
  if (window < 1) throw ConfigError("T must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must be in (0, 1)");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("threshold must be in (0, 1)");
  train.validate();
  synth.validate();
  feature_schema().validate();
}

FeatureSchema RunConfig::feature_schema() const { return schema ? *schema : synth_schema(synth); }

std::string RunConfig::to_ini() const {
  std::ostringstream o;
  o.precision(17);
  const auto& w = train.walk;
  const auto& l = train.loss_weights;
  o << "[run]\nT = " << window << "\ntrain_fraction = " << train_fraction
    << "\nthreshold = " << threshold << "\ndata_dir = " << data_dir << "\n\n";
  o << "[walk]\nepsilon = " << w.epsilon << "\np = " << w.p << "\nq = " << w.q
    << "\nwalk_len = " << w.walk_len << "\ncontexts = " << w.contexts_per_edge
    << "\nk_aug = " << w.k_aug << "\nnegatives = " << w.negatives_per_context
    << "\nnegative_distribution = "
    << (w.negatives == NegativeDistribution::Uniform ? "uniform" : "unigram075") << "\n\n";
  o << "[loss]\nalpha = " << l.alpha << "\nbeta = " << l.beta << "\ngamma = " << l.gamma << "\n";
  for (int k = 0; k < 5; ++k) o << "lambda" << k << " = " << l.lambda[k] << "\n";
  o << "\n[train]\nepochs = " << train.epochs << "\nbatch = " << train.batch_size
    << "\neta0 = " << train.eta0 << "\nmode = " << to_string(train.mode)
    << "\nseed = " << train.seed << "\nm = " << train.m << "\nl_p = " << train.l_p
    << "\nl_n = " << train.l_n << "\npred_hidden = " << train.pred_hidden << "\ncontext_mode = "
    << (train.context_mode == ContextMode::FullSoftmax ? "full_softmax" : "negative_sampling")
    << "\nloss_scaling = " << (train.scaling == LossScaling::Sum ? "sum" : "per_term") << "\n\n";
  const auto& s = synth;
  o << "[synth]\nplayers = " << s.n_players << "\ngames = " << s.n_games << "\ndays = " << s.days
    << "\ntrait_groups = " << s.trait_groups << "\ntrait_width = " << s.trait_width
    << "\ntrait_noise = " << s.trait_noise << "\nhistory_features = " << (s.history_features ? "true" : "false")
    << "\nhistory_buckets = " << s.history_buckets << "\nshort_decay = " << s.short_decay
    << "\nlong_decay = " << s.long_decay
    << "\ntenure_features = " << (s.tenure_features ? "true" : "false")
    << "\ntenure_period = " << s.tenure_period
    << "\nrelationships_per_player = " << s.relationships_per_player
    << "\ndaily_hazard = " << s.daily_hazard << "\nhazard_growth = " << s.hazard_growth
    << "\nfeature_drift = " << s.feature_drift << "\naffinity_strength = " << s.affinity_strength
    << "\nseed = " << s.seed << "\n\n";
  o << format_schema_section(feature_schema());
  return o.str();
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  RunConfig cfg;
  cfg.apply(parse_ini(in));
  return cfg;
}

}  // namespace churnemb
