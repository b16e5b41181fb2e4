#pragma once

// Transformer texture encoder: self-attention over the projected backbone
// cells, producing one texture reference per cell.

#include <cstddef>
#include <utility>
#include <vector>

#include "inpaint/layers.hpp"

namespace inpaint {

struct EncoderLayer {
  std::vector<Tensor> query, key, value;  // per head, [d_E × d_head]
  Tensor fuse;                            // [(h·d_head) × d_E]
  FeedForward ffn;
  LayerNormParams ln_attention, ln_ffn;

  static EncoderLayer init(std::size_t dim, std::size_t heads, Rng& rng);
  std::size_t heads() const { return query.size(); }
  std::size_t dim() const { return fuse.cols(); }
  void append_params(NamedParams& out, const std::string& prefix) const;
};

/// Multi-head self-attention. When `attention` is non-null it receives one
/// row-stochastic N×N weight matrix per head.
Tensor msa(const EncoderLayer& layer, const Tensor& tokens, std::vector<Tensor>* attention = nullptr);

/// H = LN(MSA(E)) + E;  E' = LN(FFN(H)) + H.
Tensor encoder_layer(const EncoderLayer& layer, const Tensor& tokens, Activation act,
                     std::vector<Tensor>* attention = nullptr);

struct ReferenceSet {
  Tensor refs;  // [N_e × d_E]
  std::vector<std::pair<std::size_t, std::size_t>> cells;  // (row, col) per reference
  std::size_t size() const { return refs.rows(); }
};

struct EncodeOptions {
  Activation activation = Activation::kRelu;
  /// Off reproduces the encoder-less ablation: references are E_T itself.
  bool enabled = true;
  std::size_t grid_width = 0;  // 0 = treat as a single raster row
  /// Receives per-layer, per-head attention when non-null.
  std::vector<std::vector<Tensor>>* attention = nullptr;
};

ReferenceSet encode(const Tensor& tokens, const std::vector<EncoderLayer>& layers,
                    const EncodeOptions& options = {});

}  // namespace inpaint
