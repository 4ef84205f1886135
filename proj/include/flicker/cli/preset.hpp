#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "flicker/agents/qnet.hpp"
#include "flicker/cli/config_tree.hpp"
#include "flicker/envs/scenario.hpp"
#include "flicker/training/config.hpp"
#include "flicker/training/trainer.hpp"

namespace flicker {

// Everything one run needs: the scenario with its domains, the method and the
// training and model hyperparameters.
struct Preset {
  std::string name;
  std::filesystem::path source;
  std::shared_ptr<Scenario> scenario;
  DomainMode domain_mode = DomainMode::Ood1;
  Method method = Method::Flicker;
  bool domain_aware = true;
  // Per-type upper bound on entities seen in training; empty means the
  // in-domain upper bounds.
  std::vector<int> n_train_override;
  TrainConfig train;
  ModelConfig model;

  std::vector<int> n_train() const;
  // Model config completed from the scenario (feature width, slots, types).
  ModelConfig model_config() const;
  TrainSetup train_setup() const;
  void validate() const;
};

// Directory searched for preset names: FLICKERSIM_PRESET_DIR if set, else the
// source tree's presets/ directory.
std::filesystem::path preset_dir();

// A path to an existing file, or a preset name looked up recursively under preset_dir().
std::filesystem::path resolve_preset(const std::string& name_or_path);

// Reads the file, resolves includes (relative to the including file), checks
// every file against the schema and builds the preset. Throws ConfigError.
ConfigNode load_config_tree(const std::filesystem::path& path);
Preset load_preset(const std::string& name_or_path);
Preset preset_from_tree(const ConfigNode& root, const std::string& name);

}  // namespace flicker
