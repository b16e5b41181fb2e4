#include "inpaint/train.hpp"

#include <cmath>
#include <cstdio>

#include "inpaint/optimizer.hpp"

namespace inpaint {
namespace {

struct BatchLoss {
  Tensor total;
  LossPoint point;
};

BatchLoss batch_loss(const Model& model, const PerceptualNet& phi, const std::vector<ToySample>& samples,
                     std::size_t first, std::size_t count, const TrainOptions& options) {
  BatchLoss b;
  b.total = Tensor::scalar(0.0);
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t j = 0; j < count; ++j) {
    const ToySample& s = samples[(first + j) % samples.size()];
    const LossBundle l = pipeline_loss(model, phi, s.image, s.mask, options.pipeline, options.weights, options.reduction);
    b.total = add(b.total, scale(l.l_tran, inv));
    b.point.rec += l.l_rec.item() * inv;
    b.point.prec += l.l_prec.item() * inv;
    b.point.style += l.l_style.item() * inv;
  }
  b.point.loss = b.total.item();
  return b;
}

}  // namespace

std::string loss_curve_header() { return "#  step           loss            rec           prec          style\n"; }

std::string format_loss_line(const LossPoint& p) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%7zu %14.8f %14.8f %14.8f %14.8f\n", p.step, p.loss, p.rec, p.prec, p.style);
  return buf;
}

LossPoint evaluate(const Model& model, const PerceptualNet& phi, const std::vector<ToySample>& samples,
                   const TrainOptions& options) {
  NoGradGuard guard;
  return batch_loss(model, phi, samples, 0, samples.size(), options).point;
}

std::vector<LossPoint> train(Model& model, const PerceptualNet& phi, const std::vector<ToySample>& samples,
                             const TrainOptions& options, const std::function<void(const LossPoint&)>& on_step) {
  if (samples.empty()) throw std::invalid_argument("train: no training samples");
  if (options.batch == 0) throw std::invalid_argument("train: batch must be at least 1");
  AdamW opt({{model.transformer_parameters(), options.lr}, {model.backbone_parameters(), options.lr / 10.0}},
            options.weight_decay);
  std::vector<LossPoint> curve;
  for (std::size_t step = 0; step < options.steps; ++step) {
    opt.zero_grad();
    Graph graph;
    BatchLoss b = batch_loss(model, phi, samples, step * options.batch, options.batch, options);
    b.point.step = step;
    if (!std::isfinite(b.point.loss)) throw DivergenceError(step);
    graph.backward(b.total);
    opt.step();
    curve.push_back(b.point);
    if (on_step) on_step(b.point);
  }
  return curve;
}

}  // namespace inpaint
