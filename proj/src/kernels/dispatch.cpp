#include <atomic>

#include "inpaint/kernels.hpp"

namespace inpaint::kernels {
namespace {
std::atomic<Backend> g_backend{Backend::kParallel};
}  // namespace

void set_backend(Backend backend) { g_backend.store(backend); }
Backend backend() { return g_backend.load(); }

bool parallel_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

#define INPAINT_DISPATCH(name, ...)                \
  if (backend() == Backend::kSerial) {             \
    serial::name(__VA_ARGS__);                     \
  } else {                                         \
    parallel::name(__VA_ARGS__);                   \
  }

void gemm_nn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n) {
  INPAINT_DISPATCH(gemm_nn, a, b, c, m, k, n)
}
void gemm_nt(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n) {
  INPAINT_DISPATCH(gemm_nt, a, b, c, m, k, n)
}
void gemm_tn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n) {
  INPAINT_DISPATCH(gemm_tn, a, b, c, m, k, n)
}
void softmax_rows(Span x, MutSpan y, std::size_t m, std::size_t n) {
  INPAINT_DISPATCH(softmax_rows, x, y, m, n)
}
void conv2d_forward(const ConvGeometry& g, Span x, Span w, Span b, MutSpan y) {
  INPAINT_DISPATCH(conv2d_forward, g, x, w, b, y)
}
void conv2d_backward_input(const ConvGeometry& g, Span dy, Span w, MutSpan dx) {
  INPAINT_DISPATCH(conv2d_backward_input, g, dy, w, dx)
}
void conv2d_backward_weight(const ConvGeometry& g, Span dy, Span x, MutSpan dw) {
  INPAINT_DISPATCH(conv2d_backward_weight, g, dy, x, dw)
}

#undef INPAINT_DISPATCH

}  // namespace inpaint::kernels
