#pragma once

#include <string>
#include <vector>

#include "plvio/observability.hpp"
#include "plvio/simulator.hpp"

namespace plvio {

struct ExperimentConfig {
  SimConfig sim;
  std::vector<Variant> variants{Variant::Msckf, Variant::Iekf, Variant::PlvMsckf, Variant::PlvIekf};
  std::string output_dir = "out";
  bool nees_full_state = false;
  int threads = 0;
  ObsCheckOptions obs;
};

// Strict parse: unknown keys and wrong types throw ConfigError naming the key path;
// malformed JSON throws ParseError. Missing keys keep their defaults.
ExperimentConfig parse_config(const std::string& json_text);
// Throws ConfigError when the file cannot be read.
ExperimentConfig load_config(const std::string& path);
// Fully resolved configuration (every key), accepted back by parse_config.
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace plvio
