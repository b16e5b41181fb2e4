#pragma once

// Numeric kernels behind the tensor ops. Each kernel has a plain serial
// reference and an OpenMP version. The parallel versions split work over
// independent output rows/channels and keep the per-element accumulation
// order of the reference, so both produce bit-identical results.

#include <cstddef>
#include <span>

namespace inpaint::kernels {

enum class Backend { kSerial, kParallel };

void set_backend(Backend backend);
Backend backend();
bool parallel_available();

struct ConvGeometry {
  std::size_t in_channels, height, width;
  std::size_t out_channels, kernel, stride, pad;
  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
};

using Span = std::span<const double>;
using MutSpan = std::span<double>;

namespace serial {
/// c[m×n] = a[m×k] · b[k×n]
void gemm_nn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n);
/// c[m×n] = a[m×k] · b[n×k]ᵀ
void gemm_nt(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n);
/// c[m×n] = a[k×m]ᵀ · b[k×n]
void gemm_tn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n);
void softmax_rows(Span x, MutSpan y, std::size_t m, std::size_t n);
void conv2d_forward(const ConvGeometry& g, Span x, Span w, Span b, MutSpan y);
void conv2d_backward_input(const ConvGeometry& g, Span dy, Span w, MutSpan dx);
void conv2d_backward_weight(const ConvGeometry& g, Span dy, Span x, MutSpan dw);
}  // namespace serial

namespace parallel {
void gemm_nn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n);
void softmax_rows(Span x, MutSpan y, std::size_t m, std::size_t n);
void conv2d_forward(const ConvGeometry& g, Span x, Span w, Span b, MutSpan y);
void conv2d_backward_input(const ConvGeometry& g, Span dy, Span w, MutSpan dx);
void conv2d_backward_weight(const ConvGeometry& g, Span dy, Span x, MutSpan dw);
}  // namespace parallel

// Dispatch to the selected backend.
void gemm_nn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n);
void softmax_rows(Span x, MutSpan y, std::size_t m, std::size_t n);
void conv2d_forward(const ConvGeometry& g, Span x, Span w, Span b, MutSpan y);
void conv2d_backward_input(const ConvGeometry& g, Span dy, Span w, MutSpan dx);
void conv2d_backward_weight(const ConvGeometry& g, Span dy, Span x, MutSpan dw);

}  // namespace inpaint::kernels
