#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "inpaint/model.hpp"
#include "inpaint/synthetic.hpp"

namespace inpaint {

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(std::size_t step)
      : std::runtime_error("training diverged: non-finite loss at step " + std::to_string(step)), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct TrainOptions {
  std::size_t steps = 200;
  double lr = 1e-4;  // transformer groups; the backbone uses lr / 10
  double weight_decay = 1e-4;
  std::size_t batch = 8;
  PipelineOptions pipeline;
  LossWeights weights;
  Reduction reduction = Reduction::kMean;
};

struct LossPoint {
  std::size_t step = 0;
  double loss = 0.0, rec = 0.0, prec = 0.0, style = 0.0;
};

/// "step loss rec prec style" in fixed-width columns.
std::string format_loss_line(const LossPoint& p);
std::string loss_curve_header();

/// Batch-mean losses over `samples` without recording a graph.
LossPoint evaluate(const Model& model, const PerceptualNet& phi, const std::vector<ToySample>& samples,
                   const TrainOptions& options);

/// One point per step: the batch loss before that step's update. Step s uses
/// samples (s·batch + j) mod count.
std::vector<LossPoint> train(Model& model, const PerceptualNet& phi, const std::vector<ToySample>& samples,
                             const TrainOptions& options,
                             const std::function<void(const LossPoint&)>& on_step = {});

}  // namespace inpaint
