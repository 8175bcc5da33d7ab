// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "roclab/attacks.hpp"
#include "roclab/defense.hpp"

namespace roclab {

struct DatasetConfig {
  std::size_t classes = 10;
  std::size_t image_size = 16;
  std::size_t train = 5000;
  std::size_t eval_per_class = 50;
  std::size_t targets = 20;
  std::uint64_t seed = 1;
};

struct AttackConfig {
  std::string kind = "none";
  std::size_t adv_class = 0;
  std::size_t captions_per_target = 50;
  std::size_t num_targets = 16;
  std::size_t num_poisons = 150;
  double blend_alpha = 0.2;
  double warp_strength = 1.5;
  std::size_t patch_size = 4;
  double noise_sigma = 0.01;
  double feature_suppression = 0.8;
  double rate_ceiling = 0.2;
  std::string adaptive_pairs;  // e.g. "0:1,2:3"
  std::size_t count_per_pair = 15;
  std::uint64_t seed = 2;
};

struct DefenseSectionConfig {
  std::string mode = "none";  // none | roclip | inmodality
  double pool_fraction = 0.02;
  std::size_t k = 3;
  bool augment = false;
};

struct TrainSectionConfig {
  std::size_t epochs = 30;
  std::size_t batch = 64;
  double lr = 1e-3;
  std::size_t hidden_dim = 64;
  std::size_t feature_dim = 32;
  std::size_t proj_dim = 16;
  bool record_match_trace = false;
  std::uint64_t seed = 3;
};

struct EvalSectionConfig {
  std::size_t backdoor_eval_count = 300;
  double probe_train_fraction = 0.5;
  std::size_t probe_epochs = 300;
  double probe_lr = 0.5;
  std::uint64_t seed = 4;
};

struct RunConfig {
  DatasetConfig dataset;
  AttackConfig attack;
  DefenseSectionConfig defense;
  TrainSectionConfig train;
  EvalSectionConfig eval;
  std::string output_dir = "out";
};

// Parses the sectioned key=value config format. Unknown sections or
// keys are hard errors (BadConfig), as are malformed values.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical serialization; the config digest embedded in artifacts is
// the SHA-256 of this string.
std::string canonical_config(const RunConfig& cfg);
std::string config_digest(const RunConfig& cfg);

// Applies a --seed override: section seeds become seed, seed+1, ...
void override_seeds(RunConfig& cfg, std::uint64_t seed);

// Conversions to module-level configs.
AttackSpec to_attack_spec(const RunConfig& cfg, const Taxonomy& tax);
DefenseConfig to_defense_config(const RunConfig& cfg);
TrainConfig to_train_config(const RunConfig& cfg);

}  // namespace roclab
