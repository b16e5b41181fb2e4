#pragma once

#include <vector>

#include "inpaint/tensor.hpp"

namespace inpaint {

struct ParamGroup {
  std::vector<Tensor> params;
  double lr = 1e-4;
};

/// Adam with weight decay applied directly to the weights rather than
/// folded into the gradient.
class AdamW {
 public:
  AdamW(std::vector<ParamGroup> groups, double weight_decay = 1e-4, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);

  void zero_grad();
  void step();
  long steps() const { return t_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }

 private:
  std::vector<ParamGroup> groups_;
  std::vector<std::vector<std::vector<double>>> m_, v_;  // [group][param][entry]
  double weight_decay_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace inpaint
