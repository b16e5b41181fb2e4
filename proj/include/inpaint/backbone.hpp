#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "inpaint/image.hpp"
#include "inpaint/random.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

struct ConvStage {
  Tensor weight;  // {out, in, 3, 3}
  Tensor bias;    // {out}
};

/// Stack of 3×3 stride-2 zero-padded convolutions, each followed by relu.
class ConvStack {
 public:
  ConvStack() = default;
  /// channels = {in, c1, c2, ...}; one stage per consecutive pair.
  ConvStack(const std::vector<std::size_t>& channels, Rng& rng, bool trainable);

  std::size_t stage_count() const { return stages_.size(); }
  std::size_t reduction() const { return std::size_t{1} << stages_.size(); }
  std::size_t out_channels() const;

  /// Post-relu activation of every stage for a {C,H,W} input.
  std::vector<Tensor> forward(const Tensor& chw) const;
  /// Final activation as rows [cells × C] in raster cell order.
  Tensor extract_features(const Tensor& chw) const;
  Tensor extract_features(const Image& img) const;

  std::vector<ConvStage>& stages() { return stages_; }
  const std::vector<ConvStage>& stages() const { return stages_; }
  void named_parameters(const std::string& prefix, std::vector<std::pair<std::string, Tensor>>& out) const;

 private:
  std::vector<ConvStage> stages_;
};

/// {C, H, W} activation -> [H·W × C].
Tensor channels_to_rows(const Tensor& chw);

/// 1×1 projection of backbone feature rows to texture vectors.
struct Projection1x1 {
  Tensor weight;  // [C × d]
  Tensor bias;    // [d]

  Projection1x1() = default;
  Projection1x1(std::size_t in_dim, std::size_t out_dim, Rng& rng);
  Tensor project(const Tensor& rows) const;
};

/// Frozen random-feature stand-in for the perceptual network.
class PerceptualNet {
 public:
  PerceptualNet() = default;
  PerceptualNet(const std::vector<std::size_t>& channels, std::uint64_t seed);

  std::vector<Tensor> features(const Tensor& chw) const { return net_.forward(chw); }
  std::vector<Tensor> features(const Image& img) const { return net_.forward(image_to_chw(img)); }
  std::size_t reduction() const { return net_.reduction(); }
  const ConvStack& net() const { return net_; }

 private:
  ConvStack net_;
};

}  // namespace inpaint
