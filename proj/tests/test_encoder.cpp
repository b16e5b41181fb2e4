#include <doctest.h>

#include <numeric>

#include "inpaint/encoder.hpp"
#include "support.hpp"

using namespace inpaint;
using support::to_mat;
using support::values;

namespace {

oracle::Mat oracle_layer(const EncoderLayer& layer, const oracle::Mat& e) {
  const std::size_t heads = layer.heads(), hd = layer.dim() / heads;
  oracle::Mat joined(e.r, heads * hd);
  for (std::size_t j = 0; j < heads; ++j) {
    const oracle::Mat out = oracle::attention(oracle::mm(e, to_mat(layer.query[j])), oracle::mm(e, to_mat(layer.key[j])),
                                              oracle::mm(e, to_mat(layer.value[j])));
    for (std::size_t r = 0; r < e.r; ++r)
      for (std::size_t c = 0; c < hd; ++c) joined(r, j * hd + c) = out(r, c);
  }
  const oracle::Mat attn = oracle::mm(joined, to_mat(layer.fuse));
  const oracle::Mat h =
      oracle::plus(oracle::layer_norm(attn, values(layer.ln_attention.gain), values(layer.ln_attention.bias), 1e-5), e);
  const oracle::Mat hidden = oracle::relu(oracle::add_row(oracle::mm(h, to_mat(layer.ffn.w1)), values(layer.ffn.b1)));
  const oracle::Mat f = oracle::add_row(oracle::mm(hidden, to_mat(layer.ffn.w2)), values(layer.ffn.b2));
  return oracle::plus(oracle::layer_norm(f, values(layer.ln_ffn.gain), values(layer.ln_ffn.bias), 1e-5), h);
}

// Non-trivial LayerNorm parameters so the oracle exercises gain and bias.
void perturb_norms(EncoderLayer& layer, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 0.1);
  for (Tensor t : {layer.ln_attention.gain, layer.ln_attention.bias, layer.ln_ffn.gain, layer.ln_ffn.bias,
                   layer.ffn.b1, layer.ffn.b2}) {
    for (double& v : t.mutable_data()) v += noise(rng);
  }
}

std::vector<double> permute_rows(const std::vector<double>& v, std::size_t cols, const std::vector<std::size_t>& perm) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    std::copy_n(v.begin() + perm[i] * cols, cols, out.begin() + i * cols);
  return out;
}

}  // namespace

TEST_CASE("a single reference attends only to itself") {
  Rng rng(1);
  const auto layer = EncoderLayer::init(8, 2, rng);
  std::vector<Tensor> attn;
  encoder_layer(layer, gaussian({1, 8}, 1.0, rng), Activation::kRelu, &attn);
  REQUIRE(attn.size() == 2);
  for (const auto& a : attn) CHECK(a[0] == 1.0);
}

TEST_CASE("identical rows give uniform attention and identical outputs") {
  Rng rng(2);
  const auto layer = EncoderLayer::init(8, 4, rng);
  const Tensor one = gaussian({1, 8}, 1.0, rng);
  const Tensor tokens = concat_rows({one, one, one, one});
  std::vector<Tensor> attn;
  const Tensor out = encoder_layer(layer, tokens, Activation::kRelu, &attn);
  for (const auto& a : attn)
    for (double v : a.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 0; c < 8; ++c) CHECK(out.at(r, c) == out.at(0, c));
}

TEST_CASE("one head equals dense single-head attention") {
  Rng rng(3);
  const auto layer = EncoderLayer::init(6, 1, rng);
  const Tensor tokens = gaussian({5, 6}, 1.0, rng);
  const oracle::Mat e = to_mat(tokens);
  const oracle::Mat expect =
      oracle::mm(oracle::attention(oracle::mm(e, to_mat(layer.query[0])), oracle::mm(e, to_mat(layer.key[0])),
                                   oracle::mm(e, to_mat(layer.value[0]))),
                 to_mat(layer.fuse));
  CHECK(oracle::max_diff(values(msa(layer, tokens)), expect.v) < 1e-12);
}

TEST_CASE("zeroed attention and feed-forward outputs leave the tokens unchanged") {
  Rng rng(4);
  auto layer = EncoderLayer::init(8, 2, rng);
  for (Tensor t : {layer.fuse, layer.ffn.w2, layer.ffn.b2}) std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
  const Tensor tokens = gaussian({6, 8}, 1.0, rng);
  CHECK(values(encoder_layer(layer, tokens, Activation::kRelu)) == values(tokens));
}

TEST_CASE("one encoder step on 4x8 matches the oracle") {
  Rng rng(5);
  auto layer = EncoderLayer::init(8, 2, rng);
  perturb_norms(layer, rng);
  const Tensor tokens = gaussian({4, 8}, 1.0, rng);
  CHECK(oracle::max_diff(values(encoder_layer(layer, tokens, Activation::kRelu)), oracle_layer(layer, to_mat(tokens)).v) <
        1e-12);
}

TEST_CASE("four stacked layers match the unrolled oracle") {
  Rng rng(6);
  std::vector<EncoderLayer> layers;
  for (int i = 0; i < 4; ++i) {
    layers.push_back(EncoderLayer::init(16, 4, rng));
    perturb_norms(layers.back(), rng);
  }
  const Tensor tokens = gaussian({9, 16}, 1.0, rng);
  oracle::Mat e = to_mat(tokens);
  for (const auto& l : layers) e = oracle_layer(l, e);
  EncodeOptions opt;
  opt.grid_width = 3;
  const ReferenceSet refs = encode(tokens, layers, opt);
  CHECK(oracle::max_diff(values(refs.refs), e.v) < 1e-11);
  REQUIRE(refs.cells.size() == 9);
  CHECK(refs.cells[5] == std::pair<std::size_t, std::size_t>{1, 2});
}

TEST_CASE("disabled encoder passes the tokens through") {
  Rng rng(7);
  const Tensor tokens = gaussian({4, 8}, 1.0, rng);
  EncodeOptions opt;
  opt.enabled = false;
  CHECK(values(encode(tokens, {}, opt).refs) == values(tokens));
  CHECK_THROWS_AS(encode(tokens, {}), std::invalid_argument);
  CHECK_THROWS_AS(EncoderLayer::init(10, 4, rng), std::invalid_argument);
  CHECK_THROWS_AS(msa(EncoderLayer::init(8, 2, rng), gaussian({4, 6}, 1.0, rng)), DimensionError);
}

TEST_CASE("attention rows are stochastic for every layer and head") {
  Rng rng(8);
  std::vector<EncoderLayer> layers{EncoderLayer::init(8, 4, rng), EncoderLayer::init(8, 4, rng)};
  std::vector<std::vector<Tensor>> attn;
  EncodeOptions opt;
  opt.attention = &attn;
  encode(gaussian({7, 8}, 2.0, rng), layers, opt);
  REQUIRE(attn.size() == 2);
  for (const auto& layer : attn) {
    REQUIRE(layer.size() == 4);
    for (const auto& a : layer) {
      for (std::size_t r = 0; r < 7; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 7; ++c) {
          CHECK(a.at(r, c) >= 0.0);
          s += a.at(r, c);
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("without positions the encoder is permutation equivariant; positions break it") {
  Rng rng(9);
  std::vector<EncoderLayer> layers{EncoderLayer::init(8, 2, rng), EncoderLayer::init(8, 2, rng)};
  const Tensor tokens = gaussian({6, 8}, 1.0, rng);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  const Tensor permuted({6, 8}, permute_rows(values(tokens), 8, perm));
  const auto expect = permute_rows(values(encode(tokens, layers).refs), 8, perm);
  CHECK(oracle::max_diff(values(encode(permuted, layers).refs), expect) < 1e-12);

  const Tensor pos = gaussian({6, 8}, 1.0, rng);
  const auto broken = permute_rows(values(encode(add(tokens, pos), layers).refs), 8, perm);
  CHECK(oracle::max_diff(values(encode(add(permuted, pos), layers).refs), broken) > 1e-3);
}

TEST_CASE("large-magnitude tokens stay finite") {
  Rng rng(10);
  std::vector<EncoderLayer> layers{EncoderLayer::init(8, 2, rng)};
  const Tensor big = scale(gaussian({5, 8}, 1.0, rng), 1e3);
  for (double v : encode(big, layers).refs.data()) CHECK(std::isfinite(v));
}
