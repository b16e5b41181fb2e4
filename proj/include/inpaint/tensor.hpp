#pragma once

// Dense row-major tensor of doubles with tape-based reverse-mode
// differentiation.
//
// A Graph constructed on a thread becomes that thread's active tape until it
// is destroyed. Every op whose inputs include a tensor that requires a
// gradient appends one backward closure to the active tape; with no active
// tape the ops are plain inference and record nothing.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace inpaint {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a graph is misused (double backward, non-scalar seed, ...).
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->data.size(); }
  /// Rows/cols of a rank-2 tensor.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return impl_->data; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  /// In-place writes are reserved for parameter initialisation, optimiser
  /// updates and finite-difference probes; never call them while a graph
  /// that references this tensor is pending backward.
  std::span<double> mutable_data() { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on);
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> mutable_grad() { return impl_->grad; }
  void zero_grad();

  /// Deep copy of the values with no gradient tracking.
  Tensor detach() const;
  /// Deep copy of the values as a fresh leaf that requires a gradient.
  Tensor clone_leaf() const;

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

class Graph {
 public:
  Graph();
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Active tape of the calling thread, or nullptr.
  static Graph* active();

  void record(std::function<void()> backward);
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(output)/d(output) = 1 and replays the tape in reverse append
  /// order. A graph can be replayed once.
  void backward(const Tensor& output);

 private:
  std::vector<std::function<void()>> nodes_;
  Graph* previous_ = nullptr;
  bool consumed_ = false;
};

/// Temporarily disables recording on this thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Graph* saved_;
};

enum class Activation { kRelu, kGelu };

Activation parse_activation(const std::string& name);
std::string to_string(Activation act);

// ---- ops -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
/// a · bᵀ without materialising the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

/// Elementwise ops accept equal shapes or a single-element right operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor activate(const Tensor& a, Activation act);
Tensor abs(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

/// x[m×n] + bias[n] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// x·w + bias.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor select_rows(const Tensor& a, std::span<const std::size_t> rows);
Tensor row(const Tensor& a, std::size_t r);

/// out.data[i] = a.data[index[i]]; gradients scatter-add back.
Tensor gather(const Tensor& a, std::vector<std::size_t> index, Shape out_shape);
Tensor reshape(const Tensor& a, Shape shape);

/// Elementwise choice: take_a[i] ? a[i] : b[i]. Selected values are copied
/// verbatim.
Tensor where(const std::vector<std::uint8_t>& take_a, const Tensor& a, const Tensor& b);

/// 2-D convolution over a {C_in, H, W} input with {C_out, C_in, k, k} weights
/// and zero padding.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad);

namespace debug {
/// When on, matmul's backward perturbs the right-operand gradient by a
/// relative 1e-3. Used only to prove the gradient suites can fail.
void set_gradient_fault(bool on);
bool gradient_fault();
}  // namespace debug

}  // namespace inpaint
