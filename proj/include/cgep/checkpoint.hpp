#pragma once

// Binary weight snapshots: a magic header, a caller-supplied JSON metadata
// block (config snapshot), then per-parameter name/shape records with raw
// float32 payloads. Loading writes values into an existing model's tensors
// by name and fails on any missing, extra, or reshaped parameter.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cgep/autograd.hpp"

namespace cgep {

void save_checkpoint(const std::filesystem::path& file,
                     const std::vector<std::pair<std::string, Tensor<float>>>& params,
                     const std::string& meta_json);

// Reads only the metadata block (for config-compatibility checks).
std::string checkpoint_meta(const std::filesystem::path& file);

// Loads weights into the passed tensors; returns the metadata block.
std::string load_checkpoint(const std::filesystem::path& file,
                            std::vector<std::pair<std::string, Tensor<float>>> params);

}  // namespace cgep
