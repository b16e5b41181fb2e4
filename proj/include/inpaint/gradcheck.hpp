#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>

#include "inpaint/tensor.hpp"

namespace inpaint {

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckOptions {
  double step = 1e-5;
  /// 0 checks every coordinate; otherwise a seeded sample of this many.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
/// for the scalar function f at x. f receives a leaf copy of x.
double check_gradients(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                       double step = 1e-5);

/// Same measure for a tensor that f reads implicitly (e.g. a model parameter).
/// The parameter is perturbed in place and restored; it must already require
/// a gradient.
double check_parameter_gradients(const std::function<Tensor()>& f, Tensor& param,
                                 const GradCheckOptions& options = {});

}  // namespace inpaint
