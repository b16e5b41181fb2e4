#pragma once

#include <stdexcept>
#include <string>

#include "inpaint/backbone.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

enum class Reduction { kMean, kSum };

struct LossWeights {
  double rec = 10.0;
  double prec = 0.1;
  double style = 250.0;
  bool operator==(const LossWeights&) const = default;
};

struct LossBundle {
  Tensor l_rec, l_prec, l_style, l_tran;  // scalars
  LossWeights weights;
};

/// Mean (or sum) of |out - gt| over every entry; equal shapes required.
Tensor l_rec(const Tensor& out, const Tensor& gt, Reduction reduction = Reduction::kMean);

/// Σ_i (1/N_i)·‖φ_i(out) − φ_i(gt)‖₁ over the stages of φ, N_i = C_i·H_i·W_i.
Tensor l_prec(const Tensor& out, const Tensor& gt, const PerceptualNet& phi);

/// A·Aᵀ / (C·HW) for an activation A = [C × HW].
Tensor gram(const Tensor& activation);

/// Mean over stages of the mean |G(out) − G(gt)|.
Tensor l_style(const Tensor& out, const Tensor& gt, const PerceptualNet& phi);

/// l_tran = rec·l_rec + prec·l_prec + style·l_style. Negative weights are rejected.
LossBundle l_total(const Tensor& rec, const Tensor& prec, const Tensor& style, const LossWeights& weights = {});

/// All three components for a pair of {C,H,W} images.
LossBundle compute_losses(const Tensor& out, const Tensor& gt, const PerceptualNet& phi,
                          const LossWeights& weights = {}, Reduction reduction = Reduction::kMean);

}  // namespace inpaint
