#include "inpaint/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace inpaint {

AdamW::AdamW(std::vector<ParamGroup> groups, double weight_decay, double beta1, double beta2, double eps)
    : groups_(std::move(groups)), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (weight_decay < 0.0) throw std::invalid_argument("AdamW: negative weight decay");
  for (const auto& g : groups_) {
    if (g.lr < 0.0) throw std::invalid_argument("AdamW: negative learning rate");
    auto& m = m_.emplace_back();
    auto& v = v_.emplace_back();
    for (const auto& p : g.params) {
      m.emplace_back(p.size(), 0.0);
      v.emplace_back(p.size(), 0.0);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& g : groups_) {
    for (auto& p : g.params) p.zero_grad();
  }
}

void AdamW::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    auto& g = groups_[gi];
    for (std::size_t pi = 0; pi < g.params.size(); ++pi) {
      auto data = g.params[pi].mutable_data();
      auto grad = g.params[pi].grad();
      if (grad.size() != data.size()) continue;  // frozen
      auto& m = m_[gi][pi];
      auto& v = v_[gi][pi];
      for (std::size_t i = 0; i < data.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
        const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        data[i] -= g.lr * (update + weight_decay_ * data[i]);
      }
    }
  }
}

}  // namespace inpaint
