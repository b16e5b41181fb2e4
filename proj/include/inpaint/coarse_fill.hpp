#pragma once

// Patch ledger and coarse filled attention.
//
// Masked patches are visited in ascending mask-ratio order (ties by raster
// index). Each one attends over every known patch plus every patch filled
// before it, and the result joins that set for the fills that follow.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "inpaint/layers.hpp"

namespace inpaint {

enum class PatchState { kKnown, kMasked, kCoarseFilled, kInpainted };

const char* to_string(PatchState state);

class LedgerError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct PatchEntry {
  std::size_t index = 0;
  PatchState state = PatchState::kMasked;
  double mask_ratio = 0.0;
  Tensor embedding;       // [1 × d], the patch's own embedding, never rewritten
  Tensor representation;  // [1 × d], current representation
};

class PatchLedger {
 public:
  /// A patch is known iff its mask ratio is exactly 0.
  PatchLedger(const Tensor& embeddings, std::vector<double> mask_ratios);

  std::size_t size() const { return entries_.size(); }
  const PatchEntry& at(std::size_t i) const { return entries_.at(i); }

  /// Known patches followed by coarse fills in fill order.
  const std::vector<std::size_t>& filled_set() const { return filled_; }
  /// Known patches followed by inpainted patches in selection order.
  const std::vector<std::size_t>& known_set() const { return known_; }

  std::vector<std::size_t> indices_in(PatchState state) const;
  std::size_t count_in(PatchState state) const { return indices_in(state).size(); }

  void mark_coarse_filled(std::size_t i, Tensor representation);
  void mark_inpainted(std::size_t i, Tensor representation);

  /// Stacks the current representations of `ids` into [|ids| × d].
  Tensor stack(std::span<const std::size_t> ids) const;

 private:
  std::vector<PatchEntry> entries_;
  std::vector<std::size_t> filled_;
  std::vector<std::size_t> known_;
};

struct CoarseFillAttention {
  Tensor query, key, value;  // [d × d]

  static CoarseFillAttention init(std::size_t dim, Rng& rng);
  void append_params(NamedParams& out, const std::string& prefix) const;
};

class UnfillableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::size_t> fill_order(const PatchLedger& ledger);

struct FillRecord {
  std::size_t patch = 0;
  std::vector<std::size_t> keys;  // the P_{k-1} patches attended over
  std::vector<double> weights;    // attention row over `keys`
};

/// Fills one masked patch and moves it into the filled set.
Tensor coarse_fill_step(const CoarseFillAttention& cfa, PatchLedger& ledger, std::size_t patch,
                        FillRecord* record = nullptr);

std::vector<FillRecord> coarse_fill_all(const CoarseFillAttention& cfa, PatchLedger& ledger);

}  // namespace inpaint
