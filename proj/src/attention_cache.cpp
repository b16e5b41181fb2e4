#include "inpaint/attention_cache.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace inpaint {
namespace {

// Every projection and score goes through these two routines so that a map
// maintained incrementally and one built from scratch agree bit for bit.
void project_row(std::span<const double> x, const std::vector<double>& w, std::size_t dim,
                 std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t p = 0; p < dim; ++p) {
    const double xp = x[p];
    const double* wp = w.data() + p * dim;
    for (std::size_t j = 0; j < dim; ++j) out[j] += xp * wp[j];
  }
}

double score(std::span<const double> q, std::span<const double> k, double inv_sqrt) {
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) acc += q[i] * k[i];
  return acc * inv_sqrt;
}

ScoreMatrix project_all(const ScoreMatrix& x, const std::vector<double>& w, std::size_t dim) {
  ScoreMatrix out(x.rows, dim);
  for (std::size_t r = 0; r < x.rows; ++r) {
    project_row(x.row(r), w, dim, {out.values.data() + r * dim, dim});
  }
  return out;
}

ScoreMatrix score_all(const ScoreMatrix& q, const ScoreMatrix& k, double inv_sqrt) {
  ScoreMatrix out(q.rows, k.rows);
  for (std::size_t i = 0; i < q.rows; ++i) {
    for (std::size_t j = 0; j < k.rows; ++j) out.at(i, j) = score(q.row(i), k.row(j), inv_sqrt);
  }
  return out;
}

}  // namespace

ScoreMatrix::ScoreMatrix(std::size_t r, std::size_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != r * c) throw std::invalid_argument("ScoreMatrix: size mismatch");
}

void ScoreMatrix::erase_row(std::size_t r) {
  if (r >= rows) throw CacheError("ScoreMatrix: row out of range");
  values.erase(values.begin() + static_cast<std::ptrdiff_t>(r * cols),
               values.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
  --rows;
}

void ScoreMatrix::append_row(std::span<const double> v) {
  if (rows > 0 && v.size() != cols) throw CacheError("ScoreMatrix: row width mismatch");
  if (rows == 0) cols = v.size();
  values.insert(values.end(), v.begin(), v.end());
  ++rows;
}

void ScoreMatrix::append_col(std::span<const double> v) {
  if (v.size() != rows) throw CacheError("ScoreMatrix: column height mismatch");
  std::vector<double> grown;
  grown.reserve(rows * (cols + 1));
  for (std::size_t r = 0; r < rows; ++r) {
    grown.insert(grown.end(), values.begin() + static_cast<std::ptrdiff_t>(r * cols),
                 values.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
    grown.push_back(v[r]);
  }
  values = std::move(grown);
  ++cols;
}

double max_abs_diff(const ScoreMatrix& a, const ScoreMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) return INFINITY;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) worst = std::max(worst, std::fabs(a.values[i] - b.values[i]));
  return worst;
}

std::string CostReport::to_string() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "incremental=%llu full=%llu ratio=%.6f",
                static_cast<unsigned long long>(incremental), static_cast<unsigned long long>(full), ratio());
  return buf;
}

std::uint64_t AttentionCache::build_cost(std::size_t n_coarse, std::size_t n_known, std::size_t n_refs,
                                         bool bridge) {
  std::uint64_t cost = static_cast<std::uint64_t>(n_coarse) * n_refs;
  if (bridge) cost += static_cast<std::uint64_t>(n_coarse) * n_known + static_cast<std::uint64_t>(n_known) * n_refs;
  return cost;
}

AttentionCache AttentionCache::build(const CacheInputs& inputs) {
  const auto& p = inputs.projections;
  const std::size_t d = p.dim;
  if (inputs.coarse.rows != inputs.coarse_ids.size() || inputs.known.rows != inputs.known_ids.size()) {
    throw CacheError("cache: id lists do not match representation rows");
  }
  for (const ScoreMatrix* m : {&inputs.coarse, &inputs.known, &inputs.refs}) {
    if (m->rows > 0 && m->cols != d) throw CacheError("cache: representation width differs from projections");
  }
  AttentionCache c;
  c.inputs_ = inputs;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));
  c.q_direct_ = project_all(inputs.coarse, p.direct_query, d);
  c.k_direct_ = project_all(inputs.refs, p.direct_key, d);
  c.coarse_ref_ = score_all(c.q_direct_, c.k_direct_, inv_sqrt);
  if (inputs.bridge) {
    c.q_coarse_ = project_all(inputs.coarse, p.bridge_query_coarse, d);
    c.k_known_ = project_all(inputs.known, p.bridge_key_known, d);
    c.q_known_ = project_all(inputs.known, p.bridge_query_known, d);
    c.k_ref_ = project_all(inputs.refs, p.bridge_key_ref, d);
    c.coarse_known_ = score_all(c.q_coarse_, c.k_known_, inv_sqrt);
    c.known_ref_ = score_all(c.q_known_, c.k_ref_, inv_sqrt);
  }
  c.ops_ = build_cost(inputs.coarse.rows, inputs.known.rows, inputs.refs.rows, inputs.bridge);
  c.counterfactual_ = c.ops_;
  return c;
}

std::size_t AttentionCache::candidate_row(std::size_t patch) const {
  const auto& ids = inputs_.coarse_ids;
  auto it = std::find(ids.begin(), ids.end(), patch);
  if (it == ids.end()) throw CacheError("cache: patch " + std::to_string(patch) + " is not a live candidate");
  return static_cast<std::size_t>(it - ids.begin());
}

void AttentionCache::promote(std::size_t patch, std::span<const double> known_rep) {
  const std::size_t r = candidate_row(patch);
  const std::size_t d = inputs_.projections.dim;
  if (known_rep.size() != d) throw CacheError("cache: promoted representation has wrong width");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));

  inputs_.coarse.erase_row(r);
  inputs_.coarse_ids.erase(inputs_.coarse_ids.begin() + static_cast<std::ptrdiff_t>(r));
  inputs_.known.append_row(known_rep);
  inputs_.known_ids.push_back(patch);
  q_direct_.erase_row(r);
  coarse_ref_.erase_row(r);

  if (inputs_.bridge) {
    q_coarse_.erase_row(r);
    coarse_known_.erase_row(r);
    const auto& p = inputs_.projections;
    std::vector<double> key(d), query(d);
    project_row(known_rep, p.bridge_key_known, d, key);
    project_row(known_rep, p.bridge_query_known, d, query);
    k_known_.append_row(key);
    q_known_.append_row(query);

    // Survivors against the new known patch.
    std::vector<double> column(q_coarse_.rows);
    for (std::size_t i = 0; i < q_coarse_.rows; ++i) column[i] = score(q_coarse_.row(i), key, inv_sqrt);
    coarse_known_.append_col(column);
    // The new known patch against every reference.
    std::vector<double> ref_row(k_ref_.rows);
    for (std::size_t j = 0; j < k_ref_.rows; ++j) ref_row[j] = score(query, k_ref_.row(j), inv_sqrt);
    known_ref_.append_row(ref_row);
    ops_ += column.size() + ref_row.size();
  }
  ++promotions_;
  counterfactual_ += build_cost(inputs_.coarse.rows, inputs_.known.rows, inputs_.refs.rows, inputs_.bridge);
}

ScoreMatrix AttentionCache::bridge_scores() const {
  const std::size_t n = coarse_known_.rows, k = coarse_known_.cols, e = known_ref_.cols;
  ScoreMatrix out(n, e);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < k; ++o) {
      const double a = coarse_known_.at(i, o);
      for (std::size_t j = 0; j < e; ++j) out.at(i, j) += a * known_ref_.at(o, j);
    }
  }
  return out;
}

bool AttentionCache::bijective() const {
  const auto& c = inputs_.coarse_ids;
  const auto& k = inputs_.known_ids;
  std::set<std::size_t> seen(c.begin(), c.end());
  if (seen.size() != c.size()) return false;
  for (std::size_t id : k) {
    if (!seen.insert(id).second) return false;
  }
  if (coarse_ref_.rows != c.size() || q_direct_.rows != c.size()) return false;
  if (inputs_.bridge) {
    if (coarse_known_.rows != c.size() || coarse_known_.cols != k.size()) return false;
    if (known_ref_.rows != k.size()) return false;
  }
  return true;
}

}  // namespace inpaint
