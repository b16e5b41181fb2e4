#include "inpaint/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>

#include "inpaint/attention_cache.hpp"
#include "inpaint/coarse_fill.hpp"
#include "inpaint/decoder.hpp"
#include "inpaint/encoder.hpp"
#include "inpaint/gradcheck.hpp"
#include "inpaint/image.hpp"
#include "inpaint/kernels.hpp"
#include "inpaint/losses.hpp"
#include "inpaint/synthetic.hpp"

namespace inpaint {
namespace {

struct Check {
  std::size_t cases = 0;
  double worst = 0.0;
  std::string failure;

  void expect(bool ok, const std::string& what) {
    ++cases;
    if (!ok && failure.empty()) failure = what;
  }
};

SuiteResult finish(const std::string& name, const Check& c, const std::string& metric = {}) {
  SuiteResult r{name, c.failure.empty(), c.cases, c.failure};
  if (r.passed && !metric.empty()) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%s=%.3g", metric.c_str(), c.worst);
    r.detail = buf;
  }
  return r;
}

SuiteResult gradient_suite() {
  Check c;
  Rng rng = derive_rng(7, 1);
  for (int i = 0; i < 10; ++i) {
    const Tensor a = gaussian({3, 4}, 1.0, rng), b = gaussian({4, 5}, 1.0, rng), w = gaussian({3, 5}, 1.0, rng);
    const double e1 = check_gradients([&](const Tensor& x) { return sum(mul(matmul(a, x), matmul(a, x))); }, b);
    const double e2 = check_gradients([&](const Tensor& x) { return sum(mul(softmax_rows(matmul(x, b)), w)); }, a);
    const double e3 = check_gradients(
        [&](const Tensor& x) {
          return sum(layer_norm(matmul(x, b), Tensor::full({5}, 1.3), Tensor::full({5}, 0.1), 1e-5));
        },
        a);
    for (double e : {e1, e2, e3}) {
      c.worst = std::max(c.worst, e);
      c.expect(e < 1e-5, "relative gradient error " + std::to_string(e));
    }
  }
  return finish("tensor.gradients", c, "max_rel_err");
}

SuiteResult kernel_suite() {
  Check c;
  Rng rng = derive_rng(7, 2);
  for (std::size_t m : {1, 7, 40}) {
    for (std::size_t n : {1, 9, 33}) {
      const std::size_t k = 13;
      const Tensor a = gaussian({m, k}, 1.0, rng), b = gaussian({k, n}, 1.0, rng);
      std::vector<double> s(m * n), p(m * n);
      kernels::serial::gemm_nn(a.data(), b.data(), s, m, k, n);
      kernels::parallel::gemm_nn(a.data(), b.data(), p, m, k, n);
      c.expect(s == p, "gemm_nn serial/parallel mismatch");
    }
  }
  const kernels::ConvGeometry g{3, 12, 10, 5, 3, 2, 1};
  const Tensor x = gaussian({3, 12, 10}, 1.0, rng), w = gaussian({5, 3, 3, 3}, 1.0, rng), bias = gaussian({5}, 1.0, rng);
  std::vector<double> s(5 * g.out_height() * g.out_width()), p(s.size());
  kernels::serial::conv2d_forward(g, x.data(), w.data(), bias.data(), s);
  kernels::parallel::conv2d_forward(g, x.data(), w.data(), bias.data(), p);
  c.expect(s == p, "conv2d serial/parallel mismatch");
  return finish("kernels.serial-parallel", c);
}

SuiteResult imaging_suite() {
  Check c;
  Rng rng = derive_rng(7, 3);
  for (int i = 0; i < 5; ++i) {
    Image img(5 + i, 3 + 2 * i, 3);
    for (double& v : img.pixels) v = static_cast<double>(rng() % 256) / 255.0;
    c.expect(decode_pnm(encode_pnm(img)) == img, "P6 round trip changed pixels");
    const Mask m = synthetic_mask(8, 8, 0.3, rng);
    c.expect(decode_mask(encode_mask(m)) == m, "mask round trip changed bits");
    const PatchSequence seq = patchify(synthetic_image(8, 8, rng), m, 2);
    c.expect(patchify(unpatchify(seq), m, 2).patches == seq.patches, "patchify/unpatchify not inverse");
  }
  return finish("imaging.roundtrip", c);
}

SuiteResult encoder_suite() {
  Check c;
  Rng rng = derive_rng(7, 4);
  std::vector<EncoderLayer> layers{EncoderLayer::init(8, 2, rng), EncoderLayer::init(8, 2, rng)};
  const Tensor tokens = gaussian({6, 8}, 1.0, rng);
  const Tensor refs = encode(tokens, layers).refs;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> perm(6);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const Tensor permuted = encode(select_rows(tokens, perm), layers).refs;
    const Tensor expected = select_rows(refs, perm);
    double diff = 0.0;
    for (std::size_t i = 0; i < expected.size(); ++i) diff = std::max(diff, std::fabs(expected[i] - permuted[i]));
    c.worst = std::max(c.worst, diff);
    c.expect(diff < 1e-10, "encoder not permutation-equivariant");
  }
  return finish("encoder.equivariance", c, "max_diff");
}

PatchLedger random_ledger(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<double> ratios(n);
  std::uniform_int_distribution<int> level(0, 4);
  for (auto& r : ratios) r = level(rng) / 4.0;
  ratios[rng() % n] = 0.0;
  return PatchLedger(gaussian({n, dim}, 1.0, rng), ratios);
}

SuiteResult cfa_suite() {
  Check c;
  Rng rng = derive_rng(7, 5);
  for (int trial = 0; trial < 10; ++trial) {
    PatchLedger ledger = random_ledger(rng, 12, 6);
    CoarseFillAttention cfa = CoarseFillAttention::init(6, rng);
    std::vector<std::size_t> expected = ledger.indices_in(PatchState::kMasked);
    std::sort(expected.begin(), expected.end(), [&](std::size_t a, std::size_t b) {
      return std::pair(ledger.at(a).mask_ratio, a) < std::pair(ledger.at(b).mask_ratio, b);
    });
    const auto records = coarse_fill_all(cfa, ledger);
    std::vector<std::size_t> got;
    for (const auto& r : records) {
      got.push_back(r.patch);
      const double s = std::accumulate(r.weights.begin(), r.weights.end(), 0.0);
      c.expect(std::fabs(s - 1.0) <= 1e-12, "attention row does not sum to 1");
    }
    c.expect(got == expected, "fill order differs from the stable ratio sort");
  }
  return finish("cfa.ordering", c);
}

SuiteResult cache_suite() {
  Check c;
  Rng rng = derive_rng(7, 6);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 4, nc = 3 + rng() % 6, nk = 1 + rng() % 3, ne = 4;
    DecoderLayer layer = DecoderLayer::init(d, rng);
    CacheInputs in;
    auto fill = [&](std::size_t rows) {
      ScoreMatrix m(rows, d);
      for (double& v : m.values) v = std::normal_distribution<double>(0.0, 1.0)(rng);
      return m;
    };
    in.coarse = fill(nc);
    in.known = fill(nk);
    in.refs = fill(ne);
    for (std::size_t i = 0; i < nc; ++i) in.coarse_ids.push_back(i);
    for (std::size_t i = 0; i < nk; ++i) in.known_ids.push_back(nc + i);
    in.projections = layer.projections();
    AttentionCache cache = AttentionCache::build(in);
    while (!cache.coarse_ids().empty()) {
      const std::size_t z = cache.coarse_ids()[rng() % cache.coarse_ids().size()];
      std::vector<double> rep(d);
      for (double& v : rep) v = std::normal_distribution<double>(0.0, 1.0)(rng);
      cache.promote(z, rep);
      const AttentionCache fresh = AttentionCache::build(cache.current_inputs());
      const double diff = std::max({max_abs_diff(cache.coarse_known(), fresh.coarse_known()),
                                    max_abs_diff(cache.known_ref(), fresh.known_ref()),
                                    max_abs_diff(cache.coarse_ref(), fresh.coarse_ref())});
      c.worst = std::max(c.worst, diff);
      c.expect(diff <= 1e-12, "incremental map differs from recomputation");
      c.expect(cache.bijective(), "cache bookkeeping is not a bijection");
    }
    const CostReport cost = cache.cost_report();
    if (cache.promotions() >= 2) c.expect(cost.incremental < cost.full, "incremental cost not below full rebuild");
  }
  return finish("cache.oracle", c, "max_diff");
}

SuiteResult diffusion_suite() {
  Check c;
  Rng rng = derive_rng(7, 7);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t d = 4;
    PatchLedger ledger = random_ledger(rng, 9, d);
    PatchLedger exact_ledger = ledger;
    CoarseFillAttention cfa = CoarseFillAttention::init(d, rng);
    std::vector<DecoderLayer> layers{DecoderLayer::init(d, rng), DecoderLayer::init(d, rng)};
    const Tensor refs = gaussian({4, d}, 1.0, rng);
    coarse_fill_all(cfa, ledger);
    coarse_fill_all(cfa, exact_ledger);
    const std::size_t masked = ledger.count_in(PatchState::kCoarseFilled);
    DiffusionOptions opt;
    const DiffusionResult inc = diffuse(ledger, layers, refs, opt);
    opt.mode = DiffusionMode::kExact;
    const DiffusionResult ex = diffuse(exact_ledger, layers, refs, opt);
    for (const auto& rec : inc.trace) {
      const double s = std::accumulate(rec.distribution.begin(), rec.distribution.end(), 0.0);
      c.expect(std::fabs(s - 1.0) <= 1e-12, "selection probabilities do not sum to 1");
    }
    c.expect(inc.trace.size() == masked, "not every masked patch was inpainted once");
    c.expect(ledger.count_in(PatchState::kCoarseFilled) == 0, "candidates left after diffusion");
    c.expect(inc.trace_text() == ex.trace_text(), "incremental and exact traces differ");
  }
  return finish("diffusion.contract", c);
}

SuiteResult loss_suite() {
  Check c;
  Rng rng = derive_rng(7, 8);
  const PerceptualNet phi({3, 4, 6}, 11);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = uniform({3, 8, 8}, 0.0, 1.0, rng);
    c.expect(l_rec(x, x).item() == 0.0, "l_rec(x,x) != 0");
    c.expect(l_prec(x, x, phi).item() == 0.0, "l_prec(x,x) != 0");
    c.expect(l_style(x, x, phi).item() == 0.0, "l_style(x,x) != 0");
    const Tensor a = gaussian({3, 5}, 1.0, rng);
    const Tensor g = gram(a);
    bool symmetric = true;
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) symmetric = symmetric && g.at(i, j) == g.at(j, i);
    }
    c.expect(symmetric, "gram not exactly symmetric");
  }
  const LossBundle b = l_total(Tensor::scalar(1.0), Tensor::scalar(1.0), Tensor::scalar(1.0));
  c.expect(std::fabs(b.l_tran.item() - 260.1) < 1e-12, "default weights do not give 260.1");
  return finish("losses.identities", c);
}

}  // namespace

std::vector<SuiteResult> run_selftest(bool inject_fault) {
  debug::set_gradient_fault(inject_fault);
  std::vector<SuiteResult> out;
  const std::vector<std::pair<const char*, SuiteResult (*)()>> suites = {
      {"tensor.gradients", gradient_suite}, {"kernels.serial-parallel", kernel_suite},
      {"imaging.roundtrip", imaging_suite}, {"encoder.equivariance", encoder_suite},
      {"cfa.ordering", cfa_suite},          {"cache.oracle", cache_suite},
      {"diffusion.contract", diffusion_suite}, {"losses.identities", loss_suite},
  };
  for (const auto& [name, suite] : suites) {
    try {
      out.push_back(suite());
    } catch (const std::exception& e) {
      out.push_back({name, false, 0, std::string("threw: ") + e.what()});
    }
  }
  debug::set_gradient_fault(false);
  return out;
}

}  // namespace inpaint
