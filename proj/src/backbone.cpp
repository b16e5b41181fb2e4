#include "inpaint/backbone.hpp"

#include <cmath>

namespace inpaint {

ConvStack::ConvStack(const std::vector<std::size_t>& channels, Rng& rng, bool trainable) {
  if (channels.size() < 2) throw std::invalid_argument("ConvStack: need at least one stage");
  for (std::size_t s = 0; s + 1 < channels.size(); ++s) {
    const std::size_t in = channels[s], out = channels[s + 1];
    const double stddev = std::sqrt(2.0 / static_cast<double>(9 * in));
    stages_.push_back({gaussian({out, in, 3, 3}, stddev, rng, trainable), Tensor::zeros({out}, trainable)});
  }
}

std::size_t ConvStack::out_channels() const { return stages_.back().weight.dim(0); }

std::vector<Tensor> ConvStack::forward(const Tensor& chw) const {
  if (chw.rank() != 3) throw DimensionError("ConvStack: expected {C,H,W} input");
  const std::size_t r = reduction();
  if (chw.dim(1) % r != 0 || chw.dim(2) % r != 0) {
    throw ExtentError("ConvStack: extent " + std::to_string(chw.dim(1)) + "x" +
                      std::to_string(chw.dim(2)) + " not divisible by " + std::to_string(r));
  }
  std::vector<Tensor> acts;
  Tensor x = chw;
  for (const auto& stage : stages_) {
    x = relu(conv2d(x, stage.weight, stage.bias, 2, 1));
    acts.push_back(x);
  }
  return acts;
}

Tensor channels_to_rows(const Tensor& chw) {
  const std::size_t c = chw.dim(0), cells = chw.dim(1) * chw.dim(2);
  return transpose(reshape(chw, {c, cells}));
}

Tensor ConvStack::extract_features(const Tensor& chw) const {
  return channels_to_rows(forward(chw).back());
}

Tensor ConvStack::extract_features(const Image& img) const {
  return extract_features(image_to_chw(img));
}

void ConvStack::named_parameters(const std::string& prefix,
                                 std::vector<std::pair<std::string, Tensor>>& out) const {
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    out.emplace_back(prefix + ".stage" + std::to_string(s) + ".weight", stages_[s].weight);
    out.emplace_back(prefix + ".stage" + std::to_string(s) + ".bias", stages_[s].bias);
  }
}

Projection1x1::Projection1x1(std::size_t in_dim, std::size_t out_dim, Rng& rng)
    : weight(xavier_uniform(in_dim, out_dim, rng)), bias(Tensor::zeros({out_dim}, true)) {}

Tensor Projection1x1::project(const Tensor& rows) const {
  if (rows.cols() != weight.rows()) {
    throw DimensionError("project: feature width " + std::to_string(rows.cols()) +
                         " vs projection " + shape_string(weight.shape()));
  }
  return linear(rows, weight, bias);
}

PerceptualNet::PerceptualNet(const std::vector<std::size_t>& channels, std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0x9e7f);
  net_ = ConvStack(channels, rng, false);
}

}  // namespace inpaint
