#include "inpaint/coarse_fill.hpp"

#include <algorithm>
#include <numeric>

namespace inpaint {

const char* to_string(PatchState state) {
  switch (state) {
    case PatchState::kKnown: return "known";
    case PatchState::kMasked: return "masked";
    case PatchState::kCoarseFilled: return "coarse";
    case PatchState::kInpainted: return "inpainted";
  }
  return "?";
}

PatchLedger::PatchLedger(const Tensor& embeddings, std::vector<double> mask_ratios) {
  if (embeddings.rows() != mask_ratios.size()) {
    throw DimensionError("ledger: " + std::to_string(embeddings.rows()) + " embeddings vs " +
                         std::to_string(mask_ratios.size()) + " mask ratios");
  }
  for (std::size_t i = 0; i < mask_ratios.size(); ++i) {
    if (!(mask_ratios[i] >= 0.0 && mask_ratios[i] <= 1.0)) {
      throw std::invalid_argument("ledger: mask ratio outside [0,1]");
    }
    PatchEntry e;
    e.index = i;
    e.mask_ratio = mask_ratios[i];
    e.state = mask_ratios[i] == 0.0 ? PatchState::kKnown : PatchState::kMasked;
    e.embedding = row(embeddings, i);
    e.representation = e.embedding;
    if (e.state == PatchState::kKnown) {
      filled_.push_back(i);
      known_.push_back(i);
    }
    entries_.push_back(std::move(e));
  }
}

std::vector<std::size_t> PatchLedger::indices_in(PatchState state) const {
  std::vector<std::size_t> out;
  for (const auto& e : entries_) {
    if (e.state == state) out.push_back(e.index);
  }
  return out;
}

void PatchLedger::mark_coarse_filled(std::size_t i, Tensor representation) {
  auto& e = entries_.at(i);
  if (e.state != PatchState::kMasked) {
    throw LedgerError(std::string("ledger: patch ") + std::to_string(i) + " cannot be coarse-filled from state " +
                      to_string(e.state));
  }
  e.state = PatchState::kCoarseFilled;
  e.representation = std::move(representation);
  filled_.push_back(i);
}

void PatchLedger::mark_inpainted(std::size_t i, Tensor representation) {
  auto& e = entries_.at(i);
  if (e.state != PatchState::kCoarseFilled) {
    throw LedgerError(std::string("ledger: patch ") + std::to_string(i) + " cannot be inpainted from state " +
                      to_string(e.state));
  }
  e.state = PatchState::kInpainted;
  e.representation = std::move(representation);
  known_.push_back(i);
}

Tensor PatchLedger::stack(std::span<const std::size_t> ids) const {
  std::vector<Tensor> rows;
  rows.reserve(ids.size());
  for (std::size_t i : ids) rows.push_back(entries_.at(i).representation);
  return concat_rows(rows);
}

CoarseFillAttention CoarseFillAttention::init(std::size_t dim, Rng& rng) {
  return {xavier_uniform(dim, dim, rng), xavier_uniform(dim, dim, rng), xavier_uniform(dim, dim, rng)};
}

void CoarseFillAttention::append_params(NamedParams& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".query", query);
  out.emplace_back(prefix + ".key", key);
  out.emplace_back(prefix + ".value", value);
}

std::vector<std::size_t> fill_order(const PatchLedger& ledger) {
  if (ledger.count_in(PatchState::kKnown) == 0) {
    throw UnfillableError("coarse fill: no known patch to attend to");
  }
  std::vector<std::size_t> order = ledger.indices_in(PatchState::kMasked);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ledger.at(a).mask_ratio < ledger.at(b).mask_ratio;
  });
  return order;
}

Tensor coarse_fill_step(const CoarseFillAttention& cfa, PatchLedger& ledger, std::size_t patch,
                        FillRecord* record) {
  if (ledger.filled_set().empty()) throw UnfillableError("coarse fill: empty attention set");
  if (ledger.at(patch).state != PatchState::kMasked) {
    throw LedgerError("coarse fill: patch " + std::to_string(patch) + " is not masked");
  }
  const std::vector<std::size_t> keys = ledger.filled_set();
  const Tensor pool = ledger.stack(keys);
  const Tensor& query = ledger.at(patch).embedding;
  Tensor weights;
  Tensor filled = scaled_dot_attention(matmul(query, cfa.query), matmul(pool, cfa.key),
                                       matmul(pool, cfa.value), &weights);
  if (record != nullptr) {
    record->patch = patch;
    record->keys = keys;
    record->weights.assign(weights.data().begin(), weights.data().end());
  }
  ledger.mark_coarse_filled(patch, filled);
  return filled;
}

std::vector<FillRecord> coarse_fill_all(const CoarseFillAttention& cfa, PatchLedger& ledger) {
  std::vector<FillRecord> records;
  if (ledger.count_in(PatchState::kMasked) == 0) return records;
  for (std::size_t patch : fill_order(ledger)) {
    FillRecord rec;
    coarse_fill_step(cfa, ledger, patch, &rec);
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace inpaint
