#pragma once

// Structure-texture decoder.
//
// Each layer reconstructs coarse patches by mixing two attention routes over
// the texture references: a direct coarse->reference route and a bridge that
// composes coarse->known scores with known->reference scores. After the stack
// has run, candidates are promoted one at a time into the known set in order
// of their attention mass; the winner is reconstructed against the current
// known set and the score maps are maintained through AttentionCache.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "inpaint/attention_cache.hpp"
#include "inpaint/coarse_fill.hpp"
#include "inpaint/image.hpp"
#include "inpaint/layers.hpp"

namespace inpaint {

struct DecoderLayer {
  Tensor direct_query, direct_key, direct_value;
  Tensor bridge_query_coarse, bridge_key_known;
  Tensor bridge_query_known, bridge_key_ref;
  Tensor bridge_value;
  FeedForward ffn;
  LayerNormParams ln_attention, ln_ffn;

  static DecoderLayer init(std::size_t dim, Rng& rng);
  std::size_t dim() const { return direct_query.rows(); }
  void append_params(NamedParams& out, const std::string& prefix) const;
  CacheProjections projections() const;
};

class BridgeUnavailableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateDistributionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (coarse·W_Q)(refs·W_K)ᵀ / sqrt(d), unnormalised.
Tensor direct_scores(const DecoderLayer& layer, const Tensor& coarse, const Tensor& refs);

/// [(coarse·W_Qc)(known·W_Kc)ᵀ / sqrt(d)] · [(known·W_Qr)(refs·W_Kr)ᵀ / sqrt(d)].
Tensor bridge_scores(const DecoderLayer& layer, const Tensor& coarse, const Tensor& known,
                     const Tensor& refs);

struct StmaOptions {
  double lambda = 0.5;
  /// Off drops the bridge route entirely (the bridge-ablated model).
  bool bridge = true;
};

/// λ·softmax(S_d)·refs·W_Vd + (1-λ)·softmax(S_b)·refs·W_Vb.
Tensor stma(const DecoderLayer& layer, const Tensor& coarse, const Tensor& known, const Tensor& refs,
            const StmaOptions& options);

/// h = LN(attended) + coarse;  out = LN(FFN(h)) + h.
Tensor complete_layer(const DecoderLayer& layer, const Tensor& coarse, const Tensor& attended,
                      Activation act);

struct DecoderState {
  Tensor coarse;  // [N_coarse × d]
  Tensor known;   // [N_known × d]
};

/// Coarse rows go through matching attention and the FFN sub-layer; known rows
/// only through the FFN sub-layer.
DecoderState decoder_layer(const DecoderLayer& layer, const DecoderState& state, const Tensor& refs,
                           const StmaOptions& options, Activation act);

enum class SelectionStrategy { kJointMass, kPreSoftmaxSums };
enum class DiffusionMode { kIncremental, kExact };

SelectionStrategy parse_selection_strategy(const std::string& name);
std::string to_string(SelectionStrategy s);

/// Probability per live candidate (rows of `direct`). With kJointMass each
/// route's scores are exponentiated and normalised jointly over all
/// (candidate, reference) pairs; a candidate's raw score is its λ-weighted
/// row mass. `bridge` may be null when the bridge route is disabled.
std::vector<double> selection_scores(const ScoreMatrix& direct, const ScoreMatrix* bridge, double lambda,
                                     SelectionStrategy strategy = SelectionStrategy::kJointMass);

/// Index of the largest probability; ties go to the lowest index.
std::size_t argmax_lowest(const std::vector<double>& p);

struct DiffusionOptions {
  double lambda = 0.5;
  bool bridge = true;
  DiffusionMode mode = DiffusionMode::kIncremental;
  SelectionStrategy strategy = SelectionStrategy::kJointMass;
  /// Candidates with mask ratio at or below this are averaged from their
  /// neighbours instead of selected. 0 disables.
  double avg_threshold = 0.0;
  Activation activation = Activation::kRelu;
  std::size_t grid_h = 0, grid_w = 0;  // needed only for averaging
};

struct SelectionRecord {
  std::size_t t = 0;
  std::size_t patch = 0;
  double probability = 0.0;
  std::vector<std::size_t> candidates;
  std::vector<double> distribution;
};

struct DiffusionResult {
  std::vector<SelectionRecord> trace;
  std::vector<std::size_t> averaged;
  CostReport cost;
  /// Final-layer maps before the first promotion.
  ScoreMatrix initial_direct, initial_bridge;
  /// Maps after the last promotion.
  ScoreMatrix final_coarse_known, final_known_ref, final_coarse_ref;

  /// One line per iteration: "t index probability".
  std::string trace_text() const;
};

/// Runs the decoder stack once over the coarse-filled ledger, then promotes
/// every candidate. Inpainted patches get their completed final-layer
/// representation in the ledger.
DiffusionResult diffuse(PatchLedger& ledger, const std::vector<DecoderLayer>& layers, const Tensor& refs,
                        const DiffusionOptions& options);

/// Linear map from a final representation to one patch of pixels.
struct PixelHead {
  Tensor weight;  // [d × patch_dim]
  Tensor bias;    // [patch_dim]

  static PixelHead init(std::size_t dim, std::size_t patch_dim, Rng& rng);
  void append_params(NamedParams& out, const std::string& prefix) const;
};

struct DecoderImage {
  Tensor chw;  // {C, h, w}, differentiable
  Image image;
};

/// Known pixels come from `masked` verbatim; the rest from the clamped head
/// output (or the neighbour average for averaged patches).
DecoderImage finalize_image(const PatchLedger& ledger, const PatchSequence& masked,
                            const std::vector<std::size_t>& averaged, const PixelHead& head);

/// Nearest-neighbour upsample of the decoder image, with the known pixels of
/// the full-resolution masked image kept verbatim.
Image upsample_output(const Image& decoder_image, const Image& masked_full, const Mask& mask_full,
                      std::size_t factor);

}  // namespace inpaint
