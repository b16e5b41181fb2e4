#include "inpaint/layers.hpp"

#include <cmath>

namespace inpaint {

LayerNormParams LayerNormParams::init(std::size_t dim) {
  return {Tensor::full({dim}, 1.0, true), Tensor::zeros({dim}, true)};
}

FeedForward FeedForward::init(std::size_t dim, std::size_t hidden, Rng& rng) {
  FeedForward f;
  f.w1 = xavier_uniform(dim, hidden, rng);
  f.b1 = Tensor::zeros({hidden}, true);
  f.w2 = xavier_uniform(hidden, dim, rng);
  f.b2 = Tensor::zeros({dim}, true);
  return f;
}

Tensor FeedForward::forward(const Tensor& x, Activation act) const {
  return linear(activate(linear(x, w1, b1), act), w2, b2);
}

void append_params(NamedParams& out, const std::string& prefix, const LayerNormParams& ln) {
  out.emplace_back(prefix + ".gain", ln.gain);
  out.emplace_back(prefix + ".bias", ln.bias);
}

void append_params(NamedParams& out, const std::string& prefix, const FeedForward& ffn) {
  out.emplace_back(prefix + ".w1", ffn.w1);
  out.emplace_back(prefix + ".b1", ffn.b1);
  out.emplace_back(prefix + ".w2", ffn.w2);
  out.emplace_back(prefix + ".b2", ffn.b2);
}

Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, Tensor* weights) {
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor a = softmax_rows(scale(matmul_nt(q, k), inv_sqrt));
  if (weights != nullptr) *weights = a;
  return matmul(a, v);
}

}  // namespace inpaint
