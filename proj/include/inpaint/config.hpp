#pragma once

// Run configuration: flat text, one "key = value" per line, '#' starts a
// comment. Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "inpaint/model.hpp"

namespace inpaint {

struct RunConfig {
  std::string image, mask;
  std::string out = "out";
  ModelConfig model;
  double lambda = 0.5;
  bool no_tte = false;
  bool no_bridge = false;
  DiffusionMode diffusion = DiffusionMode::kIncremental;
  SelectionStrategy selection = SelectionStrategy::kJointMass;
  double avg_threshold = 0.0;
  std::uint64_t seed = 0;
  LossWeights weights;
  Reduction reduction = Reduction::kMean;
  std::size_t steps = 200;
  double lr = 1e-4;
  std::size_t batch = 4;
  std::size_t train_images = 8;
  double mask_coverage = 0.25;

  /// Checks every field and the model geometry; throws ConfigError.
  void validate() const;
  PipelineOptions pipeline() const;
  bool operator==(const RunConfig&) const = default;
};

/// Geometry of the toy training run: 32×32 inputs, 8×8 decoder resolution.
RunConfig toy_config();

/// Starts from `base` and applies every key present in `text`.
RunConfig parse_config(const std::string& text, const RunConfig& base = {});
std::string serialize_config(const RunConfig& config);
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});

}  // namespace inpaint
