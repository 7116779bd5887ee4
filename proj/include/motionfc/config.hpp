#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "motionfc/predict.hpp"
#include "motionfc/train.hpp"

namespace motionfc {

/// The run-config document with every key present. `null` marks values that
/// are filled in from the dataset shape (2D vs 3D) at resolve time.
nlohmann::json default_run_config();

/// Merges `overrides` into `base`. Keys must already exist in `base`;
/// otherwise the error names the dotted key.
void merge_config(nlohmann::json& base, const nlohmann::json& overrides,
                  const std::string& prefix = "");
/// Applies "a.b.c=value"; the value is parsed as JSON when possible and
/// taken as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& assignment);

nlohmann::json load_run_config(const std::optional<std::filesystem::path>& path,
                               const std::vector<std::string>& overrides);

struct SweepGrid {
  std::vector<double> scale;
  std::vector<std::size_t> num_blocks;
  std::vector<std::size_t> hidden_channels;
  std::size_t jobs = 1;
};

struct RunConfig {
  TrainConfig train;
  FusionConfig fusion;
  SweepGrid sweep;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> train_data;
  std::optional<std::filesystem::path> validation_data;
  std::filesystem::path output_dir;
  /// The document with every null filled in.
  nlohmann::json resolved;
};

/// Fills dataset-dependent defaults and converts to typed configs.
RunConfig resolve_run_config(const nlohmann::json& config, std::size_t joints, std::size_t dims);

}  // namespace motionfc
