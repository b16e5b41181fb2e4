#include "inpaint/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace inpaint {
namespace {

double inv_sqrt_dim(const DecoderLayer& layer) { return 1.0 / std::sqrt(static_cast<double>(layer.dim())); }

std::vector<double> values_of(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

ScoreMatrix to_matrix(const Tensor& t) {
  if (t.size() == 0) return {};
  return ScoreMatrix(t.rows(), t.cols(), values_of(t));
}

Tensor stack_rows(const std::vector<Tensor>& parts) {
  return parts.size() == 1 ? parts.front() : concat_rows(parts);
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("lambda must lie in [0,1], got " + std::to_string(lambda));
  }
}

// Row masses of exp(S - max) normalised over every entry of S.
std::vector<double> joint_row_mass(const ScoreMatrix& s) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : s.values) top = std::max(top, v);
  std::vector<double> mass(s.rows, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t j = 0; j < s.cols; ++j) {
      const double e = std::exp(s.at(i, j) - top);
      mass[i] += e;
    }
    total += mass[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateDistributionError("selection: score map does not normalise");
  }
  for (double& m : mass) m /= total;
  return mass;
}

std::vector<double> row_sums(const ScoreMatrix& s) {
  std::vector<double> out(s.rows, 0.0);
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t j = 0; j < s.cols; ++j) out[i] += s.at(i, j);
  }
  return out;
}

// Patches among `coarse` whose pixels are averaged from their neighbours.
std::vector<std::size_t> averaging_set(const PatchLedger& ledger, const std::vector<std::size_t>& coarse,
                                       const DiffusionOptions& options) {
  if (options.avg_threshold <= 0.0) return {};
  if (options.grid_h * options.grid_w != ledger.size()) {
    throw DimensionError("diffuse: averaging needs a grid matching the ledger");
  }
  std::set<std::size_t> low;
  for (std::size_t p : coarse) {
    if (ledger.at(p).mask_ratio <= options.avg_threshold) low.insert(p);
  }
  std::vector<std::size_t> out;
  const std::size_t w = options.grid_w, h = options.grid_h;
  for (std::size_t p : low) {
    const std::size_t y = p / w, x = p % w;
    bool anchored = false;
    auto check = [&](std::size_t q) { anchored = anchored || low.count(q) == 0; };
    if (y > 0) check(p - w);
    if (y + 1 < h) check(p + w);
    if (x > 0) check(p - 1);
    if (x + 1 < w) check(p + 1);
    if (anchored) out.push_back(p);
  }
  return out;
}

std::vector<std::size_t> grid_neighbours(std::size_t p, std::size_t grid_h, std::size_t grid_w) {
  std::vector<std::size_t> out;
  const std::size_t y = p / grid_w, x = p % grid_w;
  if (y > 0) out.push_back(p - grid_w);
  if (x > 0) out.push_back(p - 1);
  if (x + 1 < grid_w) out.push_back(p + 1);
  if (y + 1 < grid_h) out.push_back(p + grid_w);
  return out;
}

}  // namespace

DecoderLayer DecoderLayer::init(std::size_t dim, Rng& rng) {
  DecoderLayer l;
  l.direct_query = xavier_uniform(dim, dim, rng);
  l.direct_key = xavier_uniform(dim, dim, rng);
  l.direct_value = xavier_uniform(dim, dim, rng);
  l.bridge_query_coarse = xavier_uniform(dim, dim, rng);
  l.bridge_key_known = xavier_uniform(dim, dim, rng);
  l.bridge_query_known = xavier_uniform(dim, dim, rng);
  l.bridge_key_ref = xavier_uniform(dim, dim, rng);
  l.bridge_value = xavier_uniform(dim, dim, rng);
  l.ffn = FeedForward::init(dim, 4 * dim, rng);
  l.ln_attention = LayerNormParams::init(dim);
  l.ln_ffn = LayerNormParams::init(dim);
  return l;
}

void DecoderLayer::append_params(NamedParams& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".direct_query", direct_query);
  out.emplace_back(prefix + ".direct_key", direct_key);
  out.emplace_back(prefix + ".direct_value", direct_value);
  out.emplace_back(prefix + ".bridge_query_coarse", bridge_query_coarse);
  out.emplace_back(prefix + ".bridge_key_known", bridge_key_known);
  out.emplace_back(prefix + ".bridge_query_known", bridge_query_known);
  out.emplace_back(prefix + ".bridge_key_ref", bridge_key_ref);
  out.emplace_back(prefix + ".bridge_value", bridge_value);
  inpaint::append_params(out, prefix + ".ffn", ffn);
  inpaint::append_params(out, prefix + ".ln_attention", ln_attention);
  inpaint::append_params(out, prefix + ".ln_ffn", ln_ffn);
}

CacheProjections DecoderLayer::projections() const {
  CacheProjections p;
  p.dim = dim();
  p.direct_query = values_of(direct_query);
  p.direct_key = values_of(direct_key);
  p.bridge_query_coarse = values_of(bridge_query_coarse);
  p.bridge_key_known = values_of(bridge_key_known);
  p.bridge_query_known = values_of(bridge_query_known);
  p.bridge_key_ref = values_of(bridge_key_ref);
  return p;
}

Tensor direct_scores(const DecoderLayer& layer, const Tensor& coarse, const Tensor& refs) {
  return scale(matmul_nt(matmul(coarse, layer.direct_query), matmul(refs, layer.direct_key)), inv_sqrt_dim(layer));
}

Tensor bridge_scores(const DecoderLayer& layer, const Tensor& coarse, const Tensor& known, const Tensor& refs) {
  if (!known.defined() || known.size() == 0) {
    throw BridgeUnavailableError("bridge attention needs at least one known patch");
  }
  const double s = inv_sqrt_dim(layer);
  Tensor coarse_known =
      scale(matmul_nt(matmul(coarse, layer.bridge_query_coarse), matmul(known, layer.bridge_key_known)), s);
  Tensor known_ref = scale(matmul_nt(matmul(known, layer.bridge_query_known), matmul(refs, layer.bridge_key_ref)), s);
  return matmul(coarse_known, known_ref);
}

Tensor stma(const DecoderLayer& layer, const Tensor& coarse, const Tensor& known, const Tensor& refs,
            const StmaOptions& options) {
  check_lambda(options.lambda);
  Tensor direct = matmul(softmax_rows(direct_scores(layer, coarse, refs)), matmul(refs, layer.direct_value));
  if (!options.bridge) return direct;
  Tensor bridge =
      matmul(softmax_rows(bridge_scores(layer, coarse, known, refs)), matmul(refs, layer.bridge_value));
  return add(scale(direct, options.lambda), scale(bridge, 1.0 - options.lambda));
}

Tensor complete_layer(const DecoderLayer& layer, const Tensor& coarse, const Tensor& attended, Activation act) {
  Tensor h = add(layer.ln_attention.apply(attended), coarse);
  return add(layer.ln_ffn.apply(layer.ffn.forward(h, act)), h);
}

DecoderState decoder_layer(const DecoderLayer& layer, const DecoderState& state, const Tensor& refs,
                           const StmaOptions& options, Activation act) {
  DecoderState next;
  const Tensor& k = state.known;
  next.known = add(layer.ln_ffn.apply(layer.ffn.forward(k, act)), k);
  if (state.coarse.defined() && state.coarse.size() > 0) {
    next.coarse = complete_layer(layer, state.coarse, stma(layer, state.coarse, k, refs, options), act);
  } else {
    next.coarse = state.coarse;
  }
  return next;
}

SelectionStrategy parse_selection_strategy(const std::string& name) {
  if (name == "joint") return SelectionStrategy::kJointMass;
  if (name == "presoftmax") return SelectionStrategy::kPreSoftmaxSums;
  throw std::invalid_argument("unknown selection strategy '" + name + "' (expected joint or presoftmax)");
}

std::string to_string(SelectionStrategy s) {
  return s == SelectionStrategy::kJointMass ? "joint" : "presoftmax";
}

std::vector<double> selection_scores(const ScoreMatrix& direct, const ScoreMatrix* bridge, double lambda,
                                     SelectionStrategy strategy) {
  check_lambda(lambda);
  if (direct.rows == 0) return {};
  if (bridge != nullptr && bridge->rows != direct.rows) {
    throw DimensionError("selection: direct and bridge maps cover different candidates");
  }
  std::vector<double> raw;
  if (strategy == SelectionStrategy::kJointMass) {
    raw = joint_row_mass(direct);
    if (bridge != nullptr) {
      const std::vector<double> b = joint_row_mass(*bridge);
      for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = lambda * raw[i] + (1.0 - lambda) * b[i];
    }
    double total = 0.0;
    for (double r : raw) total += r;
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw DegenerateDistributionError("selection: all candidates have zero score");
    }
    for (double& r : raw) r /= total;
    return raw;
  }
  raw = row_sums(direct);
  if (bridge != nullptr) {
    const std::vector<double> b = row_sums(*bridge);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = lambda * raw[i] + (1.0 - lambda) * b[i];
  }
  const double top = *std::max_element(raw.begin(), raw.end());
  double total = 0.0;
  for (double& r : raw) {
    r = std::exp(r - top);
    total += r;
  }
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw DegenerateDistributionError("selection: candidate scores do not normalise");
  }
  for (double& r : raw) r /= total;
  return raw;
}

std::size_t argmax_lowest(const std::vector<double>& p) {
  if (p.empty()) throw std::invalid_argument("argmax of an empty distribution");
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return best;
}

std::string DiffusionResult::trace_text() const {
  std::string out;
  char buf[96];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof buf, "%zu %zu %.17g\n", r.t, r.patch, r.probability);
    out += buf;
  }
  return out;
}

DiffusionResult diffuse(PatchLedger& ledger, const std::vector<DecoderLayer>& layers, const Tensor& refs,
                        const DiffusionOptions& options) {
  check_lambda(options.lambda);
  if (layers.empty()) throw std::invalid_argument("diffuse: at least one decoder layer is required");
  if (ledger.count_in(PatchState::kMasked) != 0) {
    throw LedgerError("diffuse: every masked patch must be coarse-filled first");
  }
  DiffusionResult result;
  const std::vector<std::size_t> coarse_ids = ledger.indices_in(PatchState::kCoarseFilled);
  if (coarse_ids.empty()) return result;
  const std::vector<std::size_t> known_ids = ledger.known_set();
  if (known_ids.empty()) throw BridgeUnavailableError("diffuse: no known patch");

  const StmaOptions stma_options{options.lambda, options.bridge};
  DecoderState state{ledger.stack(coarse_ids), ledger.stack(known_ids)};
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    state = decoder_layer(layers[l], state, refs, stma_options, options.activation);
  }
  const DecoderLayer& last = layers.back();

  result.averaged = averaging_set(ledger, coarse_ids, options);
  const std::set<std::size_t> averaged(result.averaged.begin(), result.averaged.end());

  // Row of each coarse patch in state.coarse.
  std::vector<std::size_t> row_of(ledger.size(), 0);
  for (std::size_t r = 0; r < coarse_ids.size(); ++r) row_of[coarse_ids[r]] = r;

  std::vector<std::size_t> candidates;
  for (std::size_t p : coarse_ids) {
    if (averaged.count(p) == 0) candidates.push_back(p);
  }

  CacheInputs inputs;
  inputs.refs = to_matrix(refs);
  inputs.known = to_matrix(state.known);
  inputs.known_ids = known_ids;
  inputs.coarse_ids = candidates;
  inputs.coarse = ScoreMatrix(0, last.dim());
  for (std::size_t p : candidates) inputs.coarse.append_row(state.coarse.data().subspan(row_of[p] * last.dim(), last.dim()));
  inputs.coarse.cols = last.dim();
  inputs.projections = last.projections();
  inputs.bridge = options.bridge;

  AttentionCache cache = AttentionCache::build(inputs);
  result.initial_direct = cache.coarse_ref();
  if (options.bridge) result.initial_bridge = cache.bridge_scores();
  std::uint64_t exact_cost = cache.op_counter();

  std::vector<Tensor> known_rows{state.known};
  for (std::size_t t = 1; !cache.coarse_ids().empty(); ++t) {
    ScoreMatrix bridge;
    if (options.bridge) bridge = cache.bridge_scores();
    const std::vector<double> p =
        selection_scores(cache.coarse_ref(), options.bridge ? &bridge : nullptr, options.lambda, options.strategy);
    const std::size_t pick = argmax_lowest(p);
    const std::size_t z = cache.coarse_ids()[pick];

    SelectionRecord rec;
    rec.t = t;
    rec.patch = z;
    rec.probability = p[pick];
    rec.candidates = cache.coarse_ids();
    rec.distribution = p;
    result.trace.push_back(std::move(rec));

    const Tensor c = row(state.coarse, row_of[z]);
    const Tensor known = stack_rows(known_rows);
    const Tensor matched = stma(last, c, known, refs, stma_options);
    ledger.mark_inpainted(z, complete_layer(last, c, matched, options.activation));
    known_rows.push_back(matched);

    cache.promote(z, matched.data());
    if (options.mode == DiffusionMode::kExact) {
      cache = AttentionCache::build(cache.current_inputs());
      exact_cost += cache.op_counter();
    }
  }
  result.cost = options.mode == DiffusionMode::kExact ? CostReport{exact_cost, exact_cost} : cache.cost_report();
  result.final_coarse_known = cache.coarse_known();
  result.final_known_ref = cache.known_ref();
  result.final_coarse_ref = cache.coarse_ref();

  for (std::size_t p : result.averaged) ledger.mark_inpainted(p, row(state.coarse, row_of[p]));
  return result;
}

PixelHead PixelHead::init(std::size_t dim, std::size_t patch_dim, Rng& rng) {
  return {gaussian({dim, patch_dim}, 0.02, rng, true), Tensor::full({patch_dim}, 0.5, true)};
}

void PixelHead::append_params(NamedParams& out, const std::string& prefix) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

DecoderImage finalize_image(const PatchLedger& ledger, const PatchSequence& masked,
                            const std::vector<std::size_t>& averaged, const PixelHead& head) {
  const std::size_t n = masked.count(), pd = masked.patch_dim();
  if (ledger.size() != n) throw DimensionError("finalize: ledger and patch grid differ in size");
  if (head.weight.cols() != pd) throw DimensionError("finalize: head width differs from patch size");
  const std::set<std::size_t> avg(averaged.begin(), averaged.end());

  std::vector<Tensor> rows(n);
  auto gt_row = [&](std::size_t p) {
    return Tensor({1, pd}, {masked.patches.begin() + p * pd, masked.patches.begin() + (p + 1) * pd});
  };
  auto known_of = [&](std::size_t p) {
    return std::vector<std::uint8_t>(masked.known_pixels.begin() + p * pd, masked.known_pixels.begin() + (p + 1) * pd);
  };
  for (std::size_t p = 0; p < n; ++p) {
    const PatchEntry& e = ledger.at(p);
    if (e.state == PatchState::kKnown) {
      rows[p] = gt_row(p);
    } else if (e.state != PatchState::kInpainted) {
      throw LedgerError("finalize: patch " + std::to_string(p) + " is still " + to_string(e.state));
    } else if (avg.count(p) == 0) {
      Tensor pixels = clamp(linear(e.representation, head.weight, head.bias), 0.0, 1.0);
      rows[p] = where(known_of(p), gt_row(p), pixels);
    }
  }

  // Averaged patches: every masked pixel takes the mean over anchoring
  // neighbours of that neighbour's channel mean.
  const std::size_t area = masked.patch_size * masked.patch_size;
  for (std::size_t p : averaged) {
    std::vector<Tensor> anchors;
    for (std::size_t q : grid_neighbours(p, masked.grid_h, masked.grid_w)) {
      if (avg.count(q) == 0) anchors.push_back(rows[q]);
    }
    if (anchors.empty()) throw LedgerError("finalize: averaged patch " + std::to_string(p) + " has no anchor");
    const double w = 1.0 / static_cast<double>(anchors.size() * area);
    std::vector<double> mix(anchors.size() * pd * pd, 0.0);
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      for (std::size_t i = 0; i < pd; ++i) {
        for (std::size_t j = 0; j < pd; ++j) {
          if (i / area == j / area) mix[(a * pd + i) * pd + j] = w;
        }
      }
    }
    Tensor mean_row = matmul(concat_cols(anchors), Tensor({anchors.size() * pd, pd}, std::move(mix)));
    rows[p] = where(known_of(p), gt_row(p), mean_row);
  }

  const std::size_t h = masked.grid_h * masked.patch_size, w = masked.grid_w * masked.patch_size;
  DecoderImage out;
  out.chw = gather(concat_rows(rows),
                   patch_rows_to_chw_index(masked.grid_h, masked.grid_w, masked.channels, masked.patch_size),
                   {masked.channels, h, w});
  out.image = chw_to_image(out.chw);
  return out;
}

Image upsample_output(const Image& decoder_image, const Image& masked_full, const Mask& mask_full,
                      std::size_t factor) {
  Image up = upsample_nearest(decoder_image, factor);
  if (up.height != masked_full.height || up.width != masked_full.width) {
    throw ExtentError("upsample_output: decoder image does not tile the full-resolution image");
  }
  return composite(masked_full, up, mask_full);
}

}  // namespace inpaint
