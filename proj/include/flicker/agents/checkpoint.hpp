#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "flicker/agents/qnet.hpp"
#include "flicker/tensor/parameters.hpp"

namespace flicker {

// Raised when a checkpoint's architecture or tensor shapes differ from the
// network it is loaded into.
class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary layout: magic "FLKCKPT1", format version, model description, then
// every parameter as (name, rank, dims..., float64 data).
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ParameterSet& params);

// Reads the stored model description only.
ModelConfig read_checkpoint_config(const std::filesystem::path& path);

// Loads values into params; names and shapes must match exactly.
void load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected, ParameterSet& params);

void write_model_config(std::ostream& os, const ModelConfig& config);
ModelConfig read_model_config(std::istream& is);
void write_parameters(std::ostream& os, const ParameterSet& params);
void read_parameters(std::istream& is, ParameterSet& params);

}  // namespace flicker
