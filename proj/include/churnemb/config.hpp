#pragma once

#include "churnemb/edgefeat.hpp"
#include "churnemb/synthgen.hpp"
#include "churnemb/trainer.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace churnemb {

// Flat `key = value` lines grouped under `[section]` headers. `#` and `;`
// start comments. Keys before any header belong to section "".
using IniSection = std::vector<std::pair<std::string, std::string>>;
using IniFile = std::map<std::string, IniSection>;

IniFile parse_ini(std::istream& in);

struct RunConfig {
  int window = 14;  // T
  double train_fraction = 2.0 / 3.0;
  double threshold = 0.5;
  std::optional<FeatureSchema> schema;  // falls back to the synth layout
  TrainConfig train;
  SynthConfig synth;
  std::string data_dir = ".";

  // Applies every recognised key; unknown sections or keys are ConfigErrors.
  void apply(const IniFile& ini);
  void validate() const;
  FeatureSchema feature_schema() const;
  std::string to_ini() const;
};

RunConfig load_run_config(const std::string& path);

}  // namespace churnemb
