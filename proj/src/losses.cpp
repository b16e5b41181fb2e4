#include "inpaint/losses.hpp"

namespace inpaint {
namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

Tensor flatten_channels(const Tensor& chw) {
  if (chw.rank() != 3) throw DimensionError("gram: activation must be {C,H,W}, got " + shape_string(chw.shape()));
  return reshape(chw, {chw.dim(0), chw.dim(1) * chw.dim(2)});
}

}  // namespace

Tensor l_rec(const Tensor& out, const Tensor& gt, Reduction reduction) {
  require_same_shape("l_rec", out, gt);
  Tensor diff = abs(sub(out, gt));
  return reduction == Reduction::kMean ? mean(diff) : sum(diff);
}

Tensor l_prec(const Tensor& out, const Tensor& gt, const PerceptualNet& phi) {
  require_same_shape("l_prec", out, gt);
  const auto fo = phi.features(out);
  const auto fg = phi.features(gt);
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < fo.size(); ++i) total = add(total, mean(abs(sub(fo[i], fg[i]))));
  return total;
}

Tensor gram(const Tensor& activation) {
  if (activation.rank() != 2 || activation.cols() == 0) {
    throw DimensionError("gram: activation must be [C × HW] with HW >= 1");
  }
  const double n = static_cast<double>(activation.rows() * activation.cols());
  return scale(matmul_nt(activation, activation), 1.0 / n);
}

Tensor l_style(const Tensor& out, const Tensor& gt, const PerceptualNet& phi) {
  require_same_shape("l_style", out, gt);
  const auto fo = phi.features(out);
  const auto fg = phi.features(gt);
  if (fo.empty()) return Tensor::scalar(0.0);
  Tensor total = Tensor::scalar(0.0);
  for (std::size_t j = 0; j < fo.size(); ++j) {
    total = add(total, mean(abs(sub(gram(flatten_channels(fo[j])), gram(flatten_channels(fg[j]))))));
  }
  return scale(total, 1.0 / static_cast<double>(fo.size()));
}

LossBundle l_total(const Tensor& rec, const Tensor& prec, const Tensor& style, const LossWeights& weights) {
  if (weights.rec < 0.0 || weights.prec < 0.0 || weights.style < 0.0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
  LossBundle b;
  b.l_rec = rec;
  b.l_prec = prec;
  b.l_style = style;
  b.weights = weights;
  b.l_tran = add(add(scale(rec, weights.rec), scale(prec, weights.prec)), scale(style, weights.style));
  return b;
}

LossBundle compute_losses(const Tensor& out, const Tensor& gt, const PerceptualNet& phi, const LossWeights& weights,
                          Reduction reduction) {
  return l_total(l_rec(out, gt, reduction), l_prec(out, gt, phi), l_style(out, gt, phi), weights);
}

}  // namespace inpaint
