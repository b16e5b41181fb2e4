#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "inpaint/attention_cache.hpp"
#include "inpaint/random.hpp"
#include "oracle.hpp"

using namespace inpaint;

namespace {

ScoreMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ScoreMatrix m(r, c);
  for (double& v : m.values) v = n(rng);
  return m;
}

std::vector<double> random_weights(std::size_t d, Rng& rng) { return random_matrix(d, d, rng).values; }

CacheInputs random_inputs(std::size_t nc, std::size_t nk, std::size_t ne, std::size_t d, Rng& rng) {
  CacheInputs in;
  in.coarse = random_matrix(nc, d, rng);
  in.known = random_matrix(nk, d, rng);
  in.refs = random_matrix(ne, d, rng);
  for (std::size_t i = 0; i < nc; ++i) in.coarse_ids.push_back(100 + i);
  for (std::size_t i = 0; i < nk; ++i) in.known_ids.push_back(i);
  in.projections.dim = d;
  in.projections.direct_query = random_weights(d, rng);
  in.projections.direct_key = random_weights(d, rng);
  in.projections.bridge_query_coarse = random_weights(d, rng);
  in.projections.bridge_key_known = random_weights(d, rng);
  in.projections.bridge_query_known = random_weights(d, rng);
  in.projections.bridge_key_ref = random_weights(d, rng);
  return in;
}

oracle::Mat mat(const ScoreMatrix& m) { return {m.rows, m.cols, m.values}; }

// (x·Wq)(y·Wk)ᵀ / sqrt(d)
oracle::Vec oracle_scores(const ScoreMatrix& x, const std::vector<double>& wq, const ScoreMatrix& y,
                          const std::vector<double>& wk, std::size_t d) {
  const oracle::Mat q = oracle::mm(mat(x), oracle::Mat(d, d, wq));
  const oracle::Mat k = oracle::mm(mat(y), oracle::Mat(d, d, wk));
  return oracle::scaled(oracle::mm(q, oracle::tr(k)), 1.0 / std::sqrt(static_cast<double>(d))).v;
}

void check_against_oracle(const AttentionCache& cache) {
  const CacheInputs& in = cache.current_inputs();
  const auto& p = in.projections;
  const std::size_t d = p.dim;
  CHECK(oracle::max_diff(cache.coarse_ref().values, oracle_scores(in.coarse, p.direct_query, in.refs, p.direct_key, d)) <
        1e-12);
  if (!in.bridge) return;
  const oracle::Vec ck = oracle_scores(in.coarse, p.bridge_query_coarse, in.known, p.bridge_key_known, d);
  const oracle::Vec kr = oracle_scores(in.known, p.bridge_query_known, in.refs, p.bridge_key_ref, d);
  CHECK(oracle::max_diff(cache.coarse_known().values, ck) < 1e-12);
  CHECK(oracle::max_diff(cache.known_ref().values, kr) < 1e-12);
  const oracle::Mat b = oracle::mm(oracle::Mat(in.coarse.rows, in.known.rows, ck), oracle::Mat(in.known.rows, in.refs.rows, kr));
  CHECK(oracle::max_diff(cache.bridge_scores().values, b.v) < 1e-10);
}

// Closed-form cost of promoting every candidate: survivors plus references per
// promote on top of one build; the counterfactual rebuilds after each promote.
CostReport cost_oracle(std::size_t nc, std::size_t nk, std::size_t ne) {
  auto build = [&](std::size_t c, std::size_t k) { return c * ne + c * k + k * ne; };
  CostReport r;
  r.incremental = r.full = build(nc, nk);
  for (std::size_t t = 1; t <= nc; ++t) {
    r.incremental += (nc - t) + ne;
    r.full += build(nc - t, nk + t);
  }
  return r;
}

}  // namespace

TEST_CASE("building with no coarse patches") {
  Rng rng(1);
  const auto cache = AttentionCache::build(random_inputs(0, 3, 4, 5, rng));
  CHECK(cache.coarse_ref().rows == 0);
  CHECK(cache.coarse_known().rows == 0);
  CHECK(cache.known_ref().rows == 3);
  CHECK(cache.op_counter() == 3 * 4);
  CHECK(cache.bijective());
}

TEST_CASE("one coarse, one known, one reference in one dimension") {
  CacheInputs in;
  in.coarse = ScoreMatrix(1, 1, {2.0});
  in.known = ScoreMatrix(1, 1, {3.0});
  in.refs = ScoreMatrix(1, 1, {-1.0});
  in.coarse_ids = {1};
  in.known_ids = {0};
  in.projections = {1, {0.5}, {2.0}, {1.0}, {-1.0}, {4.0}, {0.25}};
  const auto cache = AttentionCache::build(in);
  CHECK(cache.coarse_ref().values == std::vector<double>{(2.0 * 0.5) * (-1.0 * 2.0)});
  CHECK(cache.coarse_known().values == std::vector<double>{(2.0 * 1.0) * (3.0 * -1.0)});
  CHECK(cache.known_ref().values == std::vector<double>{(3.0 * 4.0) * (-1.0 * 0.25)});
  CHECK(cache.bridge_scores().values == std::vector<double>{-6.0 * -3.0});
  CHECK(cache.op_counter() == 3);
}

TEST_CASE("random build matches the oracle") {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const auto cache = AttentionCache::build(random_inputs(1 + rng() % 9, 1 + rng() % 5, 1 + rng() % 7, 6, rng));
    check_against_oracle(cache);
    CHECK(cache.bijective());
  }
}

TEST_CASE("promoting the last candidate empties the coarse maps") {
  Rng rng(3);
  auto cache = AttentionCache::build(random_inputs(1, 2, 3, 4, rng));
  const auto rep = random_matrix(1, 4, rng).values;
  cache.promote(100, rep);
  CHECK(cache.coarse_ids().empty());
  CHECK(cache.coarse_known().rows == 0);
  CHECK(cache.known_ref().rows == 3);
  CHECK(cache.known_ids().back() == 100);
  CHECK(cache.bijective());
  check_against_oracle(cache);
}

TEST_CASE("maintained maps equal a rebuild after every promote in random orders") {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t nc = 2 + rng() % 10;
    auto cache = AttentionCache::build(random_inputs(nc, 1 + rng() % 4, 1 + rng() % 6, 5, rng));
    while (!cache.coarse_ids().empty()) {
      const auto& ids = cache.coarse_ids();
      const std::size_t patch = ids[rng() % ids.size()];
      cache.promote(patch, random_matrix(1, 5, rng).values);
      const auto rebuilt = AttentionCache::build(cache.current_inputs());
      CHECK(cache.coarse_ref() == rebuilt.coarse_ref());
      CHECK(cache.coarse_known() == rebuilt.coarse_known());
      CHECK(cache.known_ref() == rebuilt.known_ref());
      CHECK(cache.bijective());
      check_against_oracle(cache);
    }
  }
}

TEST_CASE("promote adds survivors plus references to the counter") {
  Rng rng(5);
  auto cache = AttentionCache::build(random_inputs(8, 3, 16, 4, rng));
  const auto before = cache.op_counter();
  cache.promote(103, random_matrix(1, 4, rng).values);
  CHECK(cache.op_counter() - before == 23);
}

TEST_CASE("promote rejects unknown patches and wrong widths") {
  Rng rng(6);
  auto cache = AttentionCache::build(random_inputs(3, 1, 2, 4, rng));
  CHECK_THROWS_AS(cache.promote(0, random_matrix(1, 4, rng).values), CacheError);
  CHECK_THROWS_AS(cache.promote(100, random_matrix(1, 3, rng).values), CacheError);
  cache.promote(100, random_matrix(1, 4, rng).values);
  CHECK_THROWS_AS(cache.promote(100, random_matrix(1, 4, rng).values), CacheError);
  auto bad = random_inputs(3, 1, 2, 4, rng);
  bad.coarse_ids.pop_back();
  CHECK_THROWS_AS(AttentionCache::build(bad), CacheError);
}

TEST_CASE("without promotes the incremental cost equals the build cost") {
  Rng rng(7);
  const auto cache = AttentionCache::build(random_inputs(6, 2, 5, 3, rng));
  const auto report = cache.cost_report();
  CHECK(report.incremental == AttentionCache::build_cost(6, 2, 5, true));
  CHECK(report.full == report.incremental);
  CHECK(report.ratio() == 1.0);
}

TEST_CASE("promoting every candidate beats rebuilding") {
  Rng rng(8);
  auto cache = AttentionCache::build(random_inputs(15, 1, 16, 4, rng));
  for (std::size_t i = 0; i < 15; ++i) cache.promote(100 + i, random_matrix(1, 4, rng).values);
  const CostReport r = cache.cost_report();
  const CostReport o = cost_oracle(15, 1, 16);
  CHECK(r.incremental == o.incremental);
  CHECK(r.full == o.full);
  CHECK(r.incremental < r.full);
}

TEST_CASE("cost report for a 32-patch grid") {
  // 24 coarse and 8 known patches against 16 references.
  Rng rng(9);
  auto cache = AttentionCache::build(random_inputs(24, 8, 16, 4, rng));
  while (!cache.coarse_ids().empty()) cache.promote(cache.coarse_ids()[rng() % cache.coarse_ids().size()], random_matrix(1, 4, rng).values);
  const CostReport r = cache.cost_report();
  CHECK(r.incremental == 1364);
  CHECK(r.full == 17500);
  CHECK(r.to_string() == "incremental=1364 full=17500 ratio=0.077943");
  const CostReport o = cost_oracle(24, 8, 16);
  CHECK(r.incremental == o.incremental);
  CHECK(r.full == o.full);
}

TEST_CASE("without the bridge only direct rows are maintained") {
  Rng rng(10);
  auto in = random_inputs(4, 2, 3, 4, rng);
  in.bridge = false;
  auto cache = AttentionCache::build(in);
  CHECK(cache.op_counter() == 12);
  cache.promote(101, random_matrix(1, 4, rng).values);
  CHECK(cache.op_counter() == 12);
  CHECK(cache.coarse_ref().rows == 3);
  check_against_oracle(cache);
}
