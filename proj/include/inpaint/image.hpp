#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "inpaint/random.hpp"
#include "inpaint/tensor.hpp"

namespace inpaint {

/// Interleaved row-major (HWC) image with values in [0,1].
struct Image {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

/// Binary mask: 1 = known, 0 = masked.
struct Mask {
  std::size_t height = 0, width = 0;
  std::vector<std::uint8_t> known;

  Mask() = default;
  Mask(std::size_t h, std::size_t w, std::uint8_t fill = 1) : height(h), width(w), known(h * w, fill) {}

  std::uint8_t at(std::size_t y, std::size_t x) const { return known[y * width + x]; }
  std::uint8_t& at(std::size_t y, std::size_t x) { return known[y * width + x]; }
  std::size_t masked_count() const;
  bool operator==(const Mask&) const = default;
};

class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class ExtentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---- PNM -----------------------------------------------------------------

/// Binary P5/P6 with maxval 255. Pixel byte v maps to v/255.
Image decode_pnm(std::span<const std::uint8_t> bytes);
/// Writes "P5"/"P6", width, height and 255 separated by single spaces/newline,
/// then the payload. Values are rounded to the nearest of the 256 levels.
std::vector<std::uint8_t> encode_pnm(const Image& img);

Image read_pnm(const std::filesystem::path& path);
void write_pnm(const Image& img, const std::filesystem::path& path);

/// P5 mask: 0 = masked, 255 = known, anything else is a format error.
Mask decode_mask(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_mask(const Mask& mask);
Mask read_mask(const std::filesystem::path& path);
void write_mask(const Mask& mask, const std::filesystem::path& path);

// ---- pixel ops -----------------------------------------------------------

Image apply_mask(const Image& img, const Mask& mask);
/// Block-mean pooling over factor×factor blocks.
Image downsample(const Image& img, std::size_t factor);
/// A coarse entry is known only if every covered entry is known.
Mask downsample(const Mask& mask, std::size_t factor);
Image upsample_nearest(const Image& img, std::size_t factor);
Mask upsample_nearest(const Mask& mask, std::size_t factor);
Image to_rgb(const Image& img);

/// Known pixels from `known`, everything else from `fill`.
Image composite(const Image& known, const Image& fill, const Mask& mask);

// ---- tensors -------------------------------------------------------------

/// {C, H, W} constant tensor.
Tensor image_to_chw(const Image& img);
Image chw_to_image(const Tensor& chw);

// ---- patches -------------------------------------------------------------

struct PatchSequence {
  std::size_t patch_size = 0;
  std::size_t grid_h = 0, grid_w = 0;
  std::size_t channels = 0;
  /// count() × patch_dim(), each row channel-major then row-major.
  std::vector<double> patches;
  /// Same layout as `patches`: 1 where the source pixel is known.
  std::vector<std::uint8_t> known_pixels;
  std::vector<double> mask_ratio;

  std::size_t count() const { return grid_h * grid_w; }
  std::size_t patch_dim() const { return channels * patch_size * patch_size; }
  Tensor as_tensor() const;
};

/// Raster patch order; flattening is channel-major then row-major.
PatchSequence patchify(const Image& img, const Mask& mask, std::size_t patch_size);
Image unpatchify(const PatchSequence& seq);

/// Index map taking a count() × patch_dim() row tensor to {C, H, W}; use with
/// gather() for a differentiable unpatchify.
std::vector<std::size_t> patch_rows_to_chw_index(std::size_t grid_h, std::size_t grid_w,
                                                 std::size_t channels, std::size_t patch_size);

// ---- positional embeddings -----------------------------------------------

enum class PositionalKind { kLearned, kSinusoidal, kZero };

PositionalKind parse_positional_kind(const std::string& name);
std::string to_string(PositionalKind kind);

/// count × dim table. Learned tables are seeded Gaussian (std 0.02) and
/// trainable; sinusoidal rows are interleaved [sin, cos, sin, cos, ...].
Tensor positional_embedding(std::size_t count, std::size_t dim, PositionalKind kind, Rng& rng);

}  // namespace inpaint
