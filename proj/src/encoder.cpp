#include "inpaint/encoder.hpp"

#include <stdexcept>

namespace inpaint {

EncoderLayer EncoderLayer::init(std::size_t dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw std::invalid_argument("encoder: d_E=" + std::to_string(dim) + " is not divisible by " +
                                std::to_string(heads) + " heads");
  }
  const std::size_t head_dim = dim / heads;
  EncoderLayer layer;
  for (std::size_t j = 0; j < heads; ++j) {
    layer.query.push_back(xavier_uniform(dim, head_dim, rng));
    layer.key.push_back(xavier_uniform(dim, head_dim, rng));
    layer.value.push_back(xavier_uniform(dim, head_dim, rng));
  }
  layer.fuse = xavier_uniform(heads * head_dim, dim, rng);
  layer.ffn = FeedForward::init(dim, 4 * dim, rng);
  layer.ln_attention = LayerNormParams::init(dim);
  layer.ln_ffn = LayerNormParams::init(dim);
  return layer;
}

void EncoderLayer::append_params(NamedParams& out, const std::string& prefix) const {
  for (std::size_t j = 0; j < heads(); ++j) {
    const std::string h = prefix + ".head" + std::to_string(j);
    out.emplace_back(h + ".query", query[j]);
    out.emplace_back(h + ".key", key[j]);
    out.emplace_back(h + ".value", value[j]);
  }
  out.emplace_back(prefix + ".fuse", fuse);
  inpaint::append_params(out, prefix + ".ffn", ffn);
  inpaint::append_params(out, prefix + ".ln_attention", ln_attention);
  inpaint::append_params(out, prefix + ".ln_ffn", ln_ffn);
}

Tensor msa(const EncoderLayer& layer, const Tensor& tokens, std::vector<Tensor>* attention) {
  if (tokens.cols() != layer.dim()) {
    throw DimensionError("msa: tokens " + shape_string(tokens.shape()) + " vs d_E=" +
                         std::to_string(layer.dim()));
  }
  std::vector<Tensor> heads;
  for (std::size_t j = 0; j < layer.heads(); ++j) {
    Tensor weights;
    heads.push_back(scaled_dot_attention(matmul(tokens, layer.query[j]), matmul(tokens, layer.key[j]),
                                         matmul(tokens, layer.value[j]), &weights));
    if (attention != nullptr) attention->push_back(weights.detach());
  }
  Tensor joined = heads.size() == 1 ? heads.front() : concat_cols(heads);
  return matmul(joined, layer.fuse);
}

Tensor encoder_layer(const EncoderLayer& layer, const Tensor& tokens, Activation act,
                     std::vector<Tensor>* attention) {
  Tensor h = add(layer.ln_attention.apply(msa(layer, tokens, attention)), tokens);
  return add(layer.ln_ffn.apply(layer.ffn.forward(h, act)), h);
}

ReferenceSet encode(const Tensor& tokens, const std::vector<EncoderLayer>& layers,
                    const EncodeOptions& options) {
  ReferenceSet set;
  if (!options.enabled) {
    set.refs = tokens;
  } else {
    if (layers.empty()) throw std::invalid_argument("encode: at least one encoder layer is required");
    Tensor x = tokens;
    for (const auto& layer : layers) {
      std::vector<Tensor> per_head;
      x = encoder_layer(layer, x, options.activation, options.attention ? &per_head : nullptr);
      if (options.attention) options.attention->push_back(std::move(per_head));
    }
    set.refs = x;
  }
  const std::size_t w = options.grid_width == 0 ? set.refs.rows() : options.grid_width;
  for (std::size_t i = 0; i < set.refs.rows(); ++i) set.cells.emplace_back(i / w, i % w);
  return set;
}

}  // namespace inpaint
