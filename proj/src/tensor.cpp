#include "inpaint/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "inpaint/kernels.hpp"

namespace inpaint {
namespace {

thread_local Graph* t_active_graph = nullptr;
std::atomic<bool> g_gradient_fault{false};

using ImplPtr = std::shared_ptr<TensorImpl>;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (Graph::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

void accumulate(TensorImpl& t, std::span<const double> g) {
  for (std::size_t i = 0; i < g.size(); ++i) t.grad[i] += g[i];
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

[[noreturn]] void mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                       shape_string(b.shape()));
}

// Elementwise binary op with scalar broadcast of the right operand.
template <typename Fwd, typename GradA, typename GradB>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, GradA ga, GradB gb) {
  const bool scalar_b = b.size() == 1 && a.size() != 1;
  if (!scalar_b && a.shape() != b.shape()) mismatch(name, a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a[i], scalar_b ? b[0] : b[i]);
  const bool track = tracking({&a, &b});
  Tensor result(a.shape(), std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), pb = b.impl(), po = result.impl();
    Graph::active()->record([pa, pb, po, scalar_b, ga, gb] {
      const std::size_t n = po->data.size();
      for (std::size_t i = 0; i < n; ++i) {
        const double bv = scalar_b ? pb->data[0] : pb->data[i];
        const double g = po->grad[i];
        if (pa->requires_grad) pa->grad[i] += ga(pa->data[i], bv, g);
        if (pb->requires_grad) pb->grad[scalar_b ? 0 : i] += gb(pa->data[i], bv, g);
      }
    });
  }
  return result;
}

template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a[i]);
  const bool track = tracking({&a});
  Tensor result(a.shape(), std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), po = result.impl();
    Graph::active()->record([pa, po, deriv] {
      for (std::size_t i = 0; i < po->data.size(); ++i) {
        pa->grad[i] += po->grad[i] * deriv(pa->data[i]);
      }
    });
  }
  return result;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu_value(double x) {
  return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
}

double gelu_deriv(double x) {
  const double u = kGeluC * (x + kGeluA * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * kGeluA * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- Tensor --------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (shape_size(shape) != data.size()) {
    throw DimensionError("tensor: shape " + shape_string(shape) + " does not hold " +
                         std::to_string(data.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  set_requires_grad(requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n, bool requires_grad) {
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(d), requires_grad);
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): not a matrix " + shape_string(shape()));
  return impl_->shape[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): not a matrix " + shape_string(shape()));
  return impl_->shape[1];
}

double Tensor::at(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item(): tensor has shape " + shape_string(shape()));
  return impl_->data[0];
}

void Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  if (on) {
    impl_->grad.assign(impl_->data.size(), 0.0);
  } else {
    impl_->grad.clear();
  }
}

void Tensor::zero_grad() { std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0); }

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data, false); }

Tensor Tensor::clone_leaf() const { return Tensor(shape(), impl_->data, true); }

// ---- Graph ---------------------------------------------------------------

Graph::Graph() : previous_(t_active_graph) { t_active_graph = this; }

Graph::~Graph() { t_active_graph = previous_; }

Graph* Graph::active() { return t_active_graph; }

void Graph::record(std::function<void()> backward) { nodes_.push_back(std::move(backward)); }

void Graph::backward(const Tensor& output) {
  if (consumed_) throw GraphError("graph: backward already run");
  if (output.size() != 1) {
    throw GraphError("graph: backward needs a scalar output, got " + shape_string(output.shape()));
  }
  if (!output.requires_grad()) throw GraphError("graph: output does not depend on any parameter");
  consumed_ = true;
  output.impl()->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  nodes_.clear();
}

NoGradGuard::NoGradGuard() : saved_(t_active_graph) { t_active_graph = nullptr; }
NoGradGuard::~NoGradGuard() { t_active_graph = saved_; }

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "gelu") return Activation::kGelu;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string to_string(Activation act) { return act == Activation::kRelu ? "relu" : "gelu"; }

namespace debug {
void set_gradient_fault(bool on) { g_gradient_fault.store(on); }
bool gradient_fault() { return g_gradient_fault.load(); }
}  // namespace debug

// ---- linear algebra ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) mismatch("matmul", a, b);
  std::vector<double> out(m * n);
  kernels::gemm_nn(a.data(), b.data(), out, m, k, n);
  const bool track = tracking({&a, &b});
  Tensor result({m, n}, std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), pb = b.impl(), po = result.impl();
    Graph::active()->record([pa, pb, po, m, k, n] {
      if (pa->requires_grad) {
        std::vector<double> da(m * k);
        kernels::gemm_nt(po->grad, pb->data, da, m, n, k);
        accumulate(*pa, da);
      }
      if (pb->requires_grad) {
        std::vector<double> db(k * n);
        kernels::gemm_tn(pa->data, po->grad, db, k, m, n);
        if (debug::gradient_fault()) {
          for (double& v : db) v *= 1.001;
        }
        accumulate(*pb, db);
      }
    });
  }
  return result;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) mismatch("matmul_nt", a, b);
  std::vector<double> out(m * n);
  kernels::gemm_nt(a.data(), b.data(), out, m, k, n);
  const bool track = tracking({&a, &b});
  Tensor result({m, n}, std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), pb = b.impl(), po = result.impl();
    Graph::active()->record([pa, pb, po, m, k, n] {
      if (pa->requires_grad) {
        std::vector<double> da(m * k);
        kernels::gemm_nn(po->grad, pb->data, da, m, n, k);
        accumulate(*pa, da);
      }
      if (pb->requires_grad) {
        std::vector<double> db(n * k);
        kernels::gemm_tn(po->grad, pa->data, db, n, m, k);
        accumulate(*pb, db);
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<std::size_t> index(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) index[j * m + i] = i * n + j;
  }
  return gather(a, std::move(index), {n, m});
}

// ---- elementwise ---------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g) { return g; }, [](double, double, double g) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g) { return g; }, [](double, double, double g) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double g) { return g * y; },
      [](double x, double, double g) { return g * x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; }, [factor](double) { return factor; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) { return unary(a, gelu_value, gelu_deriv); }

Tensor activate(const Tensor& a, Activation act) {
  return act == Activation::kRelu ? relu(a) : gelu(a);
}

Tensor abs(const Tensor& a) {
  return unary(a, [](double x) { return std::fabs(x); },
               [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_bias");
  const std::size_t m = x.rows(), n = x.cols();
  if (bias.size() != n) mismatch("add_bias", x, bias);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + bias[j];
  }
  const bool track = tracking({&x, &bias});
  Tensor result({m, n}, std::move(out), track);
  if (track) {
    ImplPtr px = x.impl(), pb = bias.impl(), po = result.impl();
    Graph::active()->record([px, pb, po, m, n] {
      if (px->requires_grad) accumulate(*px, po->grad);
      if (pb->requires_grad) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) pb->grad[j] += po->grad[i * n + j];
        }
      }
    });
  }
  return result;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  return add_bias(matmul(x, w), bias);
}

// ---- normalisation -------------------------------------------------------

Tensor softmax_rows(const Tensor& x) {
  require_rank2(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  kernels::softmax_rows(x.data(), out, m, n);
  const bool track = tracking({&x});
  Tensor result({m, n}, std::move(out), track);
  if (track) {
    ImplPtr px = x.impl(), po = result.impl();
    Graph::active()->record([px, po, m, n] {
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = po->data.data() + i * n;
        const double* dy = po->grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += y[j] * dy[j];
        for (std::size_t j = 0; j < n; ++j) px->grad[i * n + j] += y[j] * (dy[j] - dot);
      }
    });
  }
  return result;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank2(x, "layer_norm");
  const std::size_t m = x.rows(), d = x.cols();
  if (d < 2) throw DimensionError("layer_norm: degenerate normalisation over " + std::to_string(d) + " feature(s)");
  if (!(eps > 0.0)) throw std::invalid_argument("layer_norm: eps must be positive");
  if (gain.size() != d) mismatch("layer_norm", x, gain);
  if (bias.size() != d) mismatch("layer_norm", x, bias);

  std::vector<double> xhat(m * d), inv_std(m), out(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    const double* xi = x.data().data() + i * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xi[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (xi[j] - mu) * inv_std[i];
      out[i * d + j] = xhat[i * d + j] * gain[j] + bias[j];
    }
  }
  const bool track = tracking({&x, &gain, &bias});
  Tensor result({m, d}, std::move(out), track);
  if (track) {
    ImplPtr px = x.impl(), pg = gain.impl(), pb = bias.impl(), po = result.impl();
    Graph::active()->record([px, pg, pb, po, m, d, xhat = std::move(xhat),
                             inv_std = std::move(inv_std)] {
      const double inv_d = 1.0 / static_cast<double>(d);
      for (std::size_t i = 0; i < m; ++i) {
        const double* dy = po->grad.data() + i * d;
        const double* xh = xhat.data() + i * d;
        if (pg->requires_grad || pb->requires_grad) {
          for (std::size_t j = 0; j < d; ++j) {
            if (pg->requires_grad) pg->grad[j] += dy[j] * xh[j];
            if (pb->requires_grad) pb->grad[j] += dy[j];
          }
        }
        if (!px->requires_grad) continue;
        double mean_g = 0.0, mean_gx = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double g = dy[j] * pg->data[j];
          mean_g += g;
          mean_gx += g * xh[j];
        }
        mean_g *= inv_d;
        mean_gx *= inv_d;
        for (std::size_t j = 0; j < d; ++j) {
          const double g = dy[j] * pg->data[j];
          px->grad[i * d + j] += inv_std[i] * (g - mean_g - xh[j] * mean_gx);
        }
      }
    });
  }
  return result;
}

// ---- reductions ----------------------------------------------------------

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  const bool track = tracking({&a});
  Tensor result({1}, {total}, track);
  if (track) {
    ImplPtr pa = a.impl(), po = result.impl();
    Graph::active()->record([pa, po] {
      for (double& g : pa->grad) g += po->grad[0];
    });
  }
  return result;
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

// ---- data movement -------------------------------------------------------

Tensor gather(const Tensor& a, std::vector<std::size_t> index, Shape out_shape) {
  if (shape_size(out_shape) != index.size()) {
    throw DimensionError("gather: index count does not match " + shape_string(out_shape));
  }
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= a.size()) throw DimensionError("gather: index out of range");
    out[i] = a[index[i]];
  }
  const bool track = tracking({&a});
  Tensor result(std::move(out_shape), std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), po = result.impl();
    Graph::active()->record([pa, po, index = std::move(index)] {
      for (std::size_t i = 0; i < index.size(); ++i) pa->grad[index[i]] += po->grad[i];
    });
  }
  return result;
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  }
  std::vector<std::size_t> index(a.size());
  std::iota(index.begin(), index.end(), std::size_t{0});
  return gather(a, std::move(index), std::move(shape));
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t n = parts.front().cols();
  std::size_t m = 0;
  bool track = false;
  for (const auto& p : parts) {
    if (p.cols() != n) mismatch("concat_rows", parts.front(), p);
    m += p.rows();
    track = track || tracking({&p});
  }
  std::vector<double> out;
  out.reserve(m * n);
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor result({m, n}, std::move(out), track);
  if (track) {
    std::vector<ImplPtr> impls;
    for (const auto& p : parts) impls.push_back(p.impl());
    ImplPtr po = result.impl();
    Graph::active()->record([impls = std::move(impls), po] {
      std::size_t offset = 0;
      for (const auto& p : impls) {
        if (p->requires_grad) {
          for (std::size_t i = 0; i < p->data.size(); ++i) p->grad[i] += po->grad[offset + i];
        }
        offset += p->data.size();
      }
    });
  }
  return result;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) mismatch("concat_cols", parts.front(), p);
    n += p.cols();
  }
  std::vector<Tensor> transposed;
  for (const auto& p : parts) transposed.push_back(transpose(p));
  return transpose(concat_rows(transposed));
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_rank2(a, "slice_cols");
  if (begin > end || end > a.cols()) throw DimensionError("slice_cols: bad range");
  const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
  std::vector<std::size_t> index(m * w);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < w; ++j) index[i * w + j] = i * n + begin + j;
  }
  return gather(a, std::move(index), {m, w});
}

Tensor select_rows(const Tensor& a, std::span<const std::size_t> rows) {
  require_rank2(a, "select_rows");
  const std::size_t n = a.cols();
  std::vector<std::size_t> index;
  index.reserve(rows.size() * n);
  for (std::size_t r : rows) {
    if (r >= a.rows()) throw DimensionError("select_rows: row out of range");
    for (std::size_t j = 0; j < n; ++j) index.push_back(r * n + j);
  }
  return gather(a, std::move(index), {rows.size(), n});
}

Tensor row(const Tensor& a, std::size_t r) {
  const std::size_t idx[1] = {r};
  return select_rows(a, idx);
}

Tensor where(const std::vector<std::uint8_t>& take_a, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch("where", a, b);
  if (take_a.size() != a.size()) throw DimensionError("where: selector size mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = take_a[i] ? a[i] : b[i];
  const bool track = tracking({&a, &b});
  Tensor result(a.shape(), std::move(out), track);
  if (track) {
    ImplPtr pa = a.impl(), pb = b.impl(), po = result.impl();
    Graph::active()->record([pa, pb, po, take_a] {
      for (std::size_t i = 0; i < take_a.size(); ++i) {
        if (take_a[i]) {
          if (pa->requires_grad) pa->grad[i] += po->grad[i];
        } else if (pb->requires_grad) {
          pb->grad[i] += po->grad[i];
        }
      }
    });
  }
  return result;
}

// ---- convolution ---------------------------------------------------------

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t pad) {
  if (input.rank() != 3) throw DimensionError("conv2d: input must be {C,H,W}, got " + shape_string(input.shape()));
  if (weight.rank() != 4 || weight.dim(2) != weight.dim(3)) {
    throw DimensionError("conv2d: weight must be {O,C,k,k}, got " + shape_string(weight.shape()));
  }
  if (weight.dim(1) != input.dim(0)) mismatch("conv2d", input, weight);
  if (bias.size() != weight.dim(0)) mismatch("conv2d", weight, bias);
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be positive");
  kernels::ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), weight.dim(0),
                          weight.dim(2), stride, pad};
  if (g.height + 2 * pad < g.kernel || g.width + 2 * pad < g.kernel) {
    throw DimensionError("conv2d: input smaller than kernel");
  }
  const std::size_t ho = g.out_height(), wo = g.out_width();
  std::vector<double> out(g.out_channels * ho * wo);
  kernels::conv2d_forward(g, input.data(), weight.data(), bias.data(), out);
  const bool track = tracking({&input, &weight, &bias});
  Tensor result({g.out_channels, ho, wo}, std::move(out), track);
  if (track) {
    ImplPtr px = input.impl(), pw = weight.impl(), pb = bias.impl(), po = result.impl();
    Graph::active()->record([px, pw, pb, po, g, ho, wo] {
      if (px->requires_grad) kernels::conv2d_backward_input(g, po->grad, pw->data, px->grad);
      if (pw->requires_grad) kernels::conv2d_backward_weight(g, po->grad, px->data, pw->grad);
      if (pb->requires_grad) {
        for (std::size_t o = 0; o < g.out_channels; ++o) {
          for (std::size_t i = 0; i < ho * wo; ++i) pb->grad[o] += po->grad[o * ho * wo + i];
        }
      }
    });
  }
  return result;
}

}  // namespace inpaint
