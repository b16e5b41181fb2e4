#include "inpaint/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace inpaint {
namespace {

double masked_fraction(const Mask& m) {
  return static_cast<double>(m.masked_count()) / static_cast<double>(m.known.size());
}

}  // namespace

Mask synthetic_mask(std::size_t height, std::size_t width, double coverage, Rng& rng) {
  if (!(coverage > 0.0 && coverage < 1.0)) throw std::invalid_argument("synthetic_mask: coverage must lie in (0,1)");
  if (height == 0 || width == 0) throw ExtentError("synthetic_mask: empty extent");
  Mask m(height, width, 1);
  std::uniform_int_distribution<std::size_t> ry(0, height - 1), rx(0, width - 1);
  std::uniform_int_distribution<int> coin(0, 1);
  while (masked_fraction(m) < coverage) {
    if (coin(rng) == 0) {
      const std::size_t y0 = ry(rng), x0 = rx(rng);
      std::uniform_int_distribution<std::size_t> rh(1, std::max<std::size_t>(1, height / 4));
      std::uniform_int_distribution<std::size_t> rw(1, std::max<std::size_t>(1, width / 4));
      const std::size_t y1 = std::min(height, y0 + rh(rng)), x1 = std::min(width, x0 + rw(rng));
      for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) m.at(y, x) = 0;
      }
    } else {
      // Random walk with a 3×3 brush.
      long y = static_cast<long>(ry(rng)), x = static_cast<long>(rx(rng));
      std::uniform_int_distribution<int> step(-1, 1);
      const std::size_t length = (height + width) / 2;
      for (std::size_t s = 0; s < length; ++s) {
        for (long dy = -1; dy <= 1; ++dy) {
          for (long dx = -1; dx <= 1; ++dx) {
            const long yy = y + dy, xx = x + dx;
            if (yy >= 0 && xx >= 0 && yy < static_cast<long>(height) && xx < static_cast<long>(width)) {
              m.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) = 0;
            }
          }
        }
        y = std::clamp(y + step(rng), 0L, static_cast<long>(height) - 1);
        x = std::clamp(x + step(rng), 0L, static_cast<long>(width) - 1);
      }
    }
  }
  return m;
}

Image synthetic_image(std::size_t height, std::size_t width, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double base[3], ramp_y[3], ramp_x[3], stripe[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.2 + 0.6 * u(rng);
    ramp_y[c] = 0.3 * (u(rng) - 0.5);
    ramp_x[c] = 0.3 * (u(rng) - 0.5);
    stripe[c] = 0.1 * u(rng);
  }
  const double angle = 2.0 * std::numbers::pi * u(rng);
  const double freq = 1.0 + 2.0 * u(rng);
  Image img(height, width, 3);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double fy = static_cast<double>(y) / static_cast<double>(height);
      const double fx = static_cast<double>(x) / static_cast<double>(width);
      const double wave = std::sin(2.0 * std::numbers::pi * freq * (fx * std::cos(angle) + fy * std::sin(angle)));
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(y, x, c) = std::clamp(base[c] + ramp_y[c] * fy + ramp_x[c] * fx + stripe[c] * wave, 0.0, 1.0);
      }
    }
  }
  return img;
}

std::vector<ToySample> make_toy_dataset(std::size_t count, std::size_t height, std::size_t width,
                                        std::size_t decoder_factor, std::size_t patch, double coverage,
                                        std::uint64_t seed) {
  Rng rng = derive_rng(seed, 0x70f);
  std::vector<ToySample> out;
  for (std::size_t i = 0; i < count; ++i) {
    ToySample s;
    s.image = synthetic_image(height, width, rng);
    for (int attempt = 0;; ++attempt) {
      if (attempt == 1000) throw std::runtime_error("make_toy_dataset: cannot place a usable mask");
      s.mask = synthetic_mask(height, width, coverage, rng);
      const Mask coarse = downsample(s.mask, decoder_factor);
      const PatchSequence seq = patchify(downsample(s.image, decoder_factor), coarse, patch);
      const auto known = std::count(seq.mask_ratio.begin(), seq.mask_ratio.end(), 0.0);
      if (known > 0 && static_cast<std::size_t>(known) < seq.count()) break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace inpaint
