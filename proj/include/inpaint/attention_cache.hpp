#pragma once

// Incrementally maintained score maps for the selection loop.
//
//   coarse_known  [N_coarse × |O|]  bridge factor, coarse query vs known key
//   known_ref     [|O| × N_e]       bridge factor, known query vs reference key
//   coarse_ref    [N_coarse × N_e]  direct scores
//
// All maps hold unnormalised scaled scores. Promoting a candidate deletes its
// coarse rows, appends one coarse_known column for the survivors and one
// known_ref row for the new known patch; nothing else is recomputed.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace inpaint {

/// Plain row-major value matrix that supports row deletion and row/column
/// appends.
struct ScoreMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> values;

  ScoreMatrix() = default;
  ScoreMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  ScoreMatrix(std::size_t r, std::size_t c, std::vector<double> v);

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

  void erase_row(std::size_t r);
  void append_row(std::span<const double> v);
  void append_col(std::span<const double> v);
  bool operator==(const ScoreMatrix&) const = default;
};

double max_abs_diff(const ScoreMatrix& a, const ScoreMatrix& b);

/// Projection matrices of the final decoder layer, as values ([d × d]).
struct CacheProjections {
  std::size_t dim = 0;
  std::vector<double> direct_query, direct_key;
  std::vector<double> bridge_query_coarse, bridge_key_known;
  std::vector<double> bridge_query_known, bridge_key_ref;
};

struct CacheInputs {
  ScoreMatrix coarse, known, refs;  // representations, one row each
  std::vector<std::size_t> coarse_ids, known_ids;
  CacheProjections projections;
  bool bridge = true;
};

class CacheError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct CostReport {
  std::uint64_t incremental = 0;
  std::uint64_t full = 0;
  double ratio() const { return full == 0 ? 1.0 : static_cast<double>(incremental) / static_cast<double>(full); }
  /// "incremental=<n> full=<n> ratio=<r>"
  std::string to_string() const;
};

class AttentionCache {
 public:
  static AttentionCache build(const CacheInputs& inputs);

  /// Moves live candidate `patch` into the known set with representation
  /// `known_rep`.
  void promote(std::size_t patch, std::span<const double> known_rep);

  const ScoreMatrix& coarse_known() const { return coarse_known_; }
  const ScoreMatrix& known_ref() const { return known_ref_; }
  const ScoreMatrix& coarse_ref() const { return coarse_ref_; }
  /// coarse_known · known_ref, the bridge scores of every live candidate.
  ScoreMatrix bridge_scores() const;

  const std::vector<std::size_t>& coarse_ids() const { return inputs_.coarse_ids; }
  const std::vector<std::size_t>& known_ids() const { return inputs_.known_ids; }
  bool has_bridge() const { return inputs_.bridge; }
  /// Row of the live candidate `patch`, or throws.
  std::size_t candidate_row(std::size_t patch) const;

  /// Inputs describing the current sets; build(current_inputs()) is the
  /// from-scratch oracle for the maintained maps.
  const CacheInputs& current_inputs() const { return inputs_; }

  /// Row/column bookkeeping is a bijection onto live patch indices.
  bool bijective() const;

  std::uint64_t op_counter() const { return ops_; }
  std::size_t promotions() const { return promotions_; }
  CostReport cost_report() const { return {ops_, counterfactual_}; }

  /// Scalar score evaluations a from-scratch build needs for these sizes.
  static std::uint64_t build_cost(std::size_t n_coarse, std::size_t n_known, std::size_t n_refs, bool bridge);

 private:
  CacheInputs inputs_;
  // Projected rows.
  ScoreMatrix q_direct_, k_direct_, q_coarse_, k_known_, q_known_, k_ref_;
  ScoreMatrix coarse_known_, known_ref_, coarse_ref_;
  std::uint64_t ops_ = 0;
  std::uint64_t counterfactual_ = 0;
  std::size_t promotions_ = 0;
};

}  // namespace inpaint
