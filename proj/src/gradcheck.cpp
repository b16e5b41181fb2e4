#include "inpaint/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace inpaint {
namespace {

double evaluate(const std::function<Tensor()>& f) {
  NoGradGuard no_grad;
  const double v = f().item();
  if (!std::isfinite(v)) throw EvaluationError("gradient check: non-finite function value");
  return v;
}

std::vector<std::size_t> pick_coordinates(std::size_t n, const GradCheckOptions& options) {
  std::vector<std::size_t> coords(n);
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coordinates == 0 || options.max_coordinates >= n) return coords;
  std::mt19937_64 rng(options.seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  coords.resize(options.max_coordinates);
  std::sort(coords.begin(), coords.end());
  return coords;
}

}  // namespace

double check_parameter_gradients(const std::function<Tensor()>& f, Tensor& param,
                                 const GradCheckOptions& options) {
  if (!param.requires_grad()) throw GraphError("gradient check: parameter does not require grad");
  if (!(options.step >= 1e-7 && options.step <= 1e-3)) {
    throw std::invalid_argument("gradient check: step must lie in [1e-7, 1e-3]");
  }
  param.zero_grad();
  {
    Graph graph;
    const Tensor y = f();
    if (!std::isfinite(y.item())) throw EvaluationError("gradient check: non-finite function value");
    graph.backward(y);
  }
  const std::vector<double> analytic(param.grad().begin(), param.grad().end());
  param.zero_grad();

  double worst = 0.0;
  auto values = param.mutable_data();
  for (std::size_t i : pick_coordinates(values.size(), options)) {
    const double saved = values[i];
    values[i] = saved + options.step;
    const double up = evaluate(f);
    values[i] = saved - options.step;
    const double down = evaluate(f);
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * options.step);
    const double err = std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

double check_gradients(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                       double step) {
  Tensor leaf = x.clone_leaf();
  GradCheckOptions options;
  options.step = step;
  return check_parameter_gradients([&] { return f(leaf); }, leaf, options);
}

}  // namespace inpaint
