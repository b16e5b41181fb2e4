#include "inpaint/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace inpaint::kernels::parallel {
namespace {

// Below this many multiply-adds a fork/join costs more than it saves.
constexpr std::size_t kMinParallelWork = 1 << 15;

inline long signed_index(std::size_t oy, std::size_t stride, std::size_t k, std::size_t pad) {
  return static_cast<long>(oy * stride + k) - static_cast<long>(pad);
}

}  // namespace

void gemm_nn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kMinParallelWork)
  for (long i = 0; i < rows; ++i) {
    double* ci = c.data() + i * n;
    const double* ai = a.data() + i * k;
    std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kMinParallelWork)
  for (long i = 0; i < rows; ++i) {
    const double* ai = a.data() + i * k;
    double* ci = c.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = acc;
    }
  }
}

void gemm_tn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kMinParallelWork)
  for (long i = 0; i < rows; ++i) {
    double* ci = c.data() + i * n;
    std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a[p * m + i];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

void softmax_rows(Span x, MutSpan y, std::size_t m, std::size_t n) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * n >= kMinParallelWork)
  for (long i = 0; i < rows; ++i) {
    const double* xi = x.data() + i * n;
    double* yi = y.data() + i * n;
    const double mx = *std::max_element(xi, xi + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      yi[j] = std::exp(xi[j] - mx);
      total += yi[j];
    }
    for (std::size_t j = 0; j < n; ++j) yi[j] /= total;
  }
}

void conv2d_forward(const ConvGeometry& g, Span x, Span w, Span b, MutSpan y) {
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const std::size_t work = g.out_channels * ho * wo * g.in_channels * k * k;
  const long channels = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static) if (work >= kMinParallelWork)
  for (long o = 0; o < channels; ++o) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = b[o];
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          const double* wc = w.data() + (o * g.in_channels + c) * k * k;
          const double* xc = x.data() + c * g.height * g.width;
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long iy = signed_index(oy, g.stride, ky, g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long ix = signed_index(ox, g.stride, kx, g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
              acc += wc[ky * k + kx] * xc[iy * g.width + ix];
            }
          }
        }
        y[(o * ho + oy) * wo + ox] = acc;
      }
    }
  }
}

void conv2d_backward_input(const ConvGeometry& g, Span dy, Span w, MutSpan dx) {
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const std::size_t work = g.out_channels * ho * wo * g.in_channels * k * k;
  const long channels = static_cast<long>(g.in_channels);
#pragma omp parallel for schedule(static) if (work >= kMinParallelWork)
  for (long c = 0; c < channels; ++c) {
    double* dxc = dx.data() + c * g.height * g.width;
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      const double* wc = w.data() + (o * g.in_channels + c) * k * k;
      const double* dyo = dy.data() + o * ho * wo;
      for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const double grad = dyo[oy * wo + ox];
          for (std::size_t ky = 0; ky < k; ++ky) {
            const long iy = signed_index(oy, g.stride, ky, g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long ix = signed_index(ox, g.stride, kx, g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
              dxc[iy * g.width + ix] += grad * wc[ky * k + kx];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, Span dy, Span x, MutSpan dw) {
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  const std::size_t work = g.out_channels * ho * wo * g.in_channels * k * k;
  const long channels = static_cast<long>(g.out_channels);
#pragma omp parallel for schedule(static) if (work >= kMinParallelWork)
  for (long o = 0; o < channels; ++o) {
    const double* dyo = dy.data() + o * ho * wo;
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      const double* xc = x.data() + c * g.height * g.width;
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const long iy = signed_index(oy, g.stride, ky, g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const long ix = signed_index(ox, g.stride, kx, g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
              acc += dyo[oy * wo + ox] * xc[iy * g.width + ix];
            }
          }
          dw[((o * g.in_channels + c) * k + ky) * k + kx] += acc;
        }
      }
    }
  }
}

}  // namespace inpaint::kernels::parallel
