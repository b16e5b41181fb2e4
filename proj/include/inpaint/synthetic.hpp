#pragma once

#include <cstdint>
#include <vector>

#include "inpaint/image.hpp"
#include "inpaint/random.hpp"

namespace inpaint {

/// Rectangles and random-walk blobs until at least `coverage` of the pixels
/// are masked.
Mask synthetic_mask(std::size_t height, std::size_t width, double coverage, Rng& rng);

/// Smooth RGB image: base colour, linear ramp and one low-frequency stripe.
Image synthetic_image(std::size_t height, std::size_t width, Rng& rng);

struct ToySample {
  Image image;
  Mask mask;
};

/// `count` image/mask pairs. Every mask leaves at least one fully known and
/// at least one masked patch at the decoder resolution.
std::vector<ToySample> make_toy_dataset(std::size_t count, std::size_t height, std::size_t width,
                                        std::size_t decoder_factor, std::size_t patch, double coverage,
                                        std::uint64_t seed);

}  // namespace inpaint
