#include "inpaint/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace inpaint::kernels::serial {

void gemm_nn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
    std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void gemm_nt(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] = acc;
    }
  }
}

void gemm_tn(Span a, Span b, MutSpan c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
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
  for (std::size_t i = 0; i < m; ++i) {
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
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        double acc = b[o];
        for (std::size_t c = 0; c < g.in_channels; ++c) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
              acc += w[((o * g.in_channels + c) * k + ky) * k + kx] *
                     x[(c * g.height + iy) * g.width + ix];
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
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
          const double grad = dy[(o * ho + oy) * wo + ox];
          for (std::size_t ky = 0; ky < k; ++ky) {
            const auto iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const auto ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
              dx[(c * g.height + iy) * g.width + ix] +=
                  grad * w[((o * g.in_channels + c) * k + ky) * k + kx];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const ConvGeometry& g, Span dy, Span x, MutSpan dw) {
  const std::size_t ho = g.out_height(), wo = g.out_width(), k = g.kernel;
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    for (std::size_t c = 0; c < g.in_channels; ++c) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          double acc = 0.0;
          for (std::size_t oy = 0; oy < ho; ++oy) {
            const auto iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
            for (std::size_t ox = 0; ox < wo; ++ox) {
              const auto ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
              acc += dy[(o * ho + oy) * wo + ox] * x[(c * g.height + iy) * g.width + ix];
            }
          }
          dw[((o * g.in_channels + c) * k + ky) * k + kx] += acc;
        }
      }
    }
  }
}

}  // namespace inpaint::kernels::serial
