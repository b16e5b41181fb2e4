#pragma once

// End-to-end inpainting pipeline.
//
//   masked image -> backbone -> 1×1 projection + positions -> encoder -> refs
//   masked image -> downsample -> patches -> embedding + positions
//     -> coarse fill -> decoder stack + selection loop -> pixel head
//     -> decoder-resolution output -> upsampled, known pixels restored

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "inpaint/backbone.hpp"
#include "inpaint/coarse_fill.hpp"
#include "inpaint/decoder.hpp"
#include "inpaint/encoder.hpp"
#include "inpaint/losses.hpp"

namespace inpaint {

/// Invalid configuration value; field() is the offending config key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::invalid_argument("config field '" + field + "': " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};


struct ModelConfig {
  std::size_t height = 64, width = 64;
  std::size_t decoder_factor = 4;
  std::size_t patch = 4;
  std::size_t dim = 64;  // shared by encoder and decoder
  std::size_t heads = 4;
  std::size_t encoder_layers = 4;
  std::size_t decoder_layers = 4;
  std::vector<std::size_t> backbone_channels{3, 16, 32, 48, 64};
  std::vector<std::size_t> perceptual_channels{3, 8, 16, 32};
  PositionalKind positional = PositionalKind::kLearned;
  Activation activation = Activation::kRelu;

  /// Throws ConfigError naming the first inconsistent field.
  void validate() const;
  std::size_t decoder_height() const { return height / decoder_factor; }
  std::size_t decoder_width() const { return width / decoder_factor; }
  std::size_t grid_h() const { return decoder_height() / patch; }
  std::size_t grid_w() const { return decoder_width() / patch; }
  std::size_t patch_count() const { return grid_h() * grid_w(); }
  std::size_t reference_count() const;
  bool operator==(const ModelConfig&) const = default;
};

struct PipelineOptions {
  double lambda = 0.5;
  bool bridge = true;
  bool tte = true;
  DiffusionMode mode = DiffusionMode::kIncremental;
  SelectionStrategy strategy = SelectionStrategy::kJointMass;
  double avg_threshold = 0.0;
  /// Keep encoder attention and coarse-fill rows in the result.
  bool inspect = false;
};

struct PipelineResult {
  Image masked_decoder;  // I'_m
  Mask mask_decoder;
  DecoderImage decoder_out;  // I'_out
  Image output;              // I_out
  Tensor refs;
  DiffusionResult diffusion;
  std::vector<std::vector<Tensor>> encoder_attention;
  std::vector<FillRecord> fills;
};

class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  /// Texture references for a masked full-resolution image.
  Tensor references(const Image& masked, const PipelineOptions& options,
                    std::vector<std::vector<Tensor>>* attention = nullptr) const;

  /// Runs the pipeline on `image` with `mask` applied; the unmasked pixels of
  /// `image` are never read.
  PipelineResult run(const Image& image, const Mask& mask, const PipelineOptions& options) const;

  NamedParams named_parameters() const;
  std::vector<Tensor> backbone_parameters() const;
  std::vector<Tensor> transformer_parameters() const;

  ConvStack backbone;
  Projection1x1 projection;
  Tensor encoder_positions;
  std::vector<EncoderLayer> encoder;
  Tensor patch_weight, patch_bias;
  Tensor decoder_positions;
  CoarseFillAttention cfa;
  std::vector<DecoderLayer> decoder;
  PixelHead head;

 private:
  ModelConfig config_;
};

/// Losses between I'_out and the downsampled ground truth.
LossBundle pipeline_loss(const Model& model, const PerceptualNet& phi, const Image& image, const Mask& mask,
                         const PipelineOptions& options, const LossWeights& weights = {},
                         Reduction reduction = Reduction::kMean);

}  // namespace inpaint
