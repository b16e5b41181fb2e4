#pragma once

#include <string>
#include <utility>
#include <vector>

#include "inpaint/random.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormParams {
  Tensor gain;  // {d}
  Tensor bias;  // {d}

  static LayerNormParams init(std::size_t dim);
  Tensor apply(const Tensor& x) const { return layer_norm(x, gain, bias, kLayerNormEps); }
};

/// Two fully connected layers, dim -> hidden -> dim.
struct FeedForward {
  Tensor w1, b1, w2, b2;

  static FeedForward init(std::size_t dim, std::size_t hidden, Rng& rng);
  Tensor forward(const Tensor& x, Activation act) const;
};

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

void append_params(NamedParams& out, const std::string& prefix, const LayerNormParams& ln);
void append_params(NamedParams& out, const std::string& prefix, const FeedForward& ffn);

/// softmax(q·kᵀ / sqrt(d))·v for one head; returns the attention weights
/// through `weights` when non-null.
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, Tensor* weights = nullptr);

}  // namespace inpaint
