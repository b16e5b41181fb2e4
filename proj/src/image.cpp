#include "inpaint/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace inpaint {
namespace {

struct PnmHeader {
  char kind = 0;  // '5' or '6'
  std::size_t width = 0, height = 0;
  std::size_t payload_offset = 0;
};

bool is_space(std::uint8_t c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Skips whitespace and '#' comments.
void skip_separators(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  while (pos < bytes.size()) {
    if (is_space(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
}

std::size_t read_number(std::span<const std::uint8_t> bytes, std::size_t& pos, const char* field) {
  skip_separators(bytes, pos);
  if (pos >= bytes.size()) throw FormatError(std::string("pnm: missing ") + field, pos);
  if (!std::isdigit(bytes[pos])) throw FormatError(std::string("pnm: malformed ") + field, pos);
  std::size_t value = 0;
  const std::size_t start = pos;
  while (pos < bytes.size() && std::isdigit(bytes[pos])) {
    value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
    if (pos - start > 9) throw FormatError(std::string("pnm: oversized ") + field, start);
    ++pos;
  }
  return value;
}

PnmHeader parse_header(std::span<const std::uint8_t> bytes) {
  PnmHeader h;
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("pnm: expected P5 or P6 magic", 0);
  }
  h.kind = static_cast<char>(bytes[1]);
  std::size_t pos = 2;
  if (pos < bytes.size() && !is_space(bytes[pos]) && bytes[pos] != '#') {
    throw FormatError("pnm: malformed magic", pos);
  }
  h.width = read_number(bytes, pos, "width");
  h.height = read_number(bytes, pos, "height");
  const std::size_t maxval_at = pos;
  const std::size_t maxval = read_number(bytes, pos, "maxval");
  if (maxval != 255) throw FormatError("pnm: maxval must be 255", maxval_at);
  if (h.width == 0 || h.height == 0) throw FormatError("pnm: zero extent", maxval_at);
  if (pos >= bytes.size() || !is_space(bytes[pos])) {
    throw FormatError("pnm: expected whitespace after maxval", pos);
  }
  h.payload_offset = pos + 1;
  return h;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void require_divisible(std::size_t h, std::size_t w, std::size_t factor, const char* op) {
  if (factor == 0 || h % factor != 0 || w % factor != 0) {
    throw ExtentError(std::string(op) + ": extent " + std::to_string(h) + "x" + std::to_string(w) +
                      " not divisible by " + std::to_string(factor));
  }
}

}  // namespace

FormatError::FormatError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

std::size_t Mask::masked_count() const {
  return static_cast<std::size_t>(std::count(known.begin(), known.end(), std::uint8_t{0}));
}

Image decode_pnm(std::span<const std::uint8_t> bytes) {
  const PnmHeader h = parse_header(bytes);
  const std::size_t channels = h.kind == '6' ? 3 : 1;
  const std::size_t need = h.width * h.height * channels;
  if (bytes.size() - h.payload_offset < need) {
    throw FormatError("pnm: truncated payload, need " + std::to_string(need) + " bytes",
                      bytes.size());
  }
  Image img(h.height, h.width, channels);
  for (std::size_t i = 0; i < need; ++i) {
    img.pixels[i] = static_cast<double>(bytes[h.payload_offset + i]) / 255.0;
  }
  return img;
}

std::vector<std::uint8_t> encode_pnm(const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw std::invalid_argument("pnm: only 1 or 3 channels can be written");
  }
  const std::string header = std::string(img.channels == 3 ? "P6" : "P5") + "\n" +
                             std::to_string(img.width) + " " + std::to_string(img.height) +
                             "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.reserve(bytes.size() + img.pixels.size());
  for (double v : img.pixels) bytes.push_back(quantize(v));
  return bytes;
}

Image read_pnm(const std::filesystem::path& path) { return decode_pnm(slurp(path)); }

void write_pnm(const Image& img, const std::filesystem::path& path) { dump(encode_pnm(img), path); }

Mask decode_mask(std::span<const std::uint8_t> bytes) {
  const PnmHeader h = parse_header(bytes);
  if (h.kind != '5') throw FormatError("mask: expected P5", 0);
  const std::size_t need = h.width * h.height;
  if (bytes.size() - h.payload_offset < need) {
    throw FormatError("mask: truncated payload", bytes.size());
  }
  Mask mask(h.height, h.width);
  for (std::size_t i = 0; i < need; ++i) {
    const std::uint8_t v = bytes[h.payload_offset + i];
    if (v != 0 && v != 255) throw FormatError("mask: non-binary value " + std::to_string(v), h.payload_offset + i);
    mask.known[i] = v == 255 ? 1 : 0;
  }
  return mask;
}

std::vector<std::uint8_t> encode_mask(const Mask& mask) {
  const std::string header =
      "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (std::uint8_t k : mask.known) bytes.push_back(k ? 255 : 0);
  return bytes;
}

Mask read_mask(const std::filesystem::path& path) { return decode_mask(slurp(path)); }

void write_mask(const Mask& mask, const std::filesystem::path& path) { dump(encode_mask(mask), path); }

Image apply_mask(const Image& img, const Mask& mask) {
  if (img.height != mask.height || img.width != mask.width) {
    throw ExtentError("apply_mask: image and mask extents differ");
  }
  Image out = img;
  for (std::size_t i = 0; i < mask.known.size(); ++i) {
    if (mask.known[i]) continue;
    for (std::size_t c = 0; c < img.channels; ++c) out.pixels[i * img.channels + c] = 0.0;
  }
  return out;
}

Image downsample(const Image& img, std::size_t factor) {
  require_divisible(img.height, img.width, factor, "downsample");
  if (factor == 1) return img;
  Image out(img.height / factor, img.width / factor, img.channels);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (std::size_t dy = 0; dy < factor; ++dy) {
          for (std::size_t dx = 0; dx < factor; ++dx) acc += img.at(y * factor + dy, x * factor + dx, c);
        }
        out.at(y, x, c) = acc * inv;
      }
    }
  }
  return out;
}

Mask downsample(const Mask& mask, std::size_t factor) {
  require_divisible(mask.height, mask.width, factor, "downsample");
  Mask out(mask.height / factor, mask.width / factor);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      std::uint8_t all = 1;
      for (std::size_t dy = 0; dy < factor; ++dy) {
        for (std::size_t dx = 0; dx < factor; ++dx) all &= mask.at(y * factor + dy, x * factor + dx);
      }
      out.at(y, x) = all;
    }
  }
  return out;
}

Image upsample_nearest(const Image& img, std::size_t factor) {
  if (factor == 0) throw ExtentError("upsample: factor must be positive");
  Image out(img.height * factor, img.width * factor, img.channels);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y / factor, x / factor, c);
    }
  }
  return out;
}

Mask upsample_nearest(const Mask& mask, std::size_t factor) {
  if (factor == 0) throw ExtentError("upsample: factor must be positive");
  Mask out(mask.height * factor, mask.width * factor);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) out.at(y, x) = mask.at(y / factor, x / factor);
  }
  return out;
}

Image to_rgb(const Image& img) {
  if (img.channels == 3) return img;
  if (img.channels != 1) throw std::invalid_argument("to_rgb: unsupported channel count");
  Image out(img.height, img.width, 3);
  for (std::size_t i = 0; i < img.height * img.width; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out.pixels[i * 3 + c] = img.pixels[i];
  }
  return out;
}

Image composite(const Image& known, const Image& fill, const Mask& mask) {
  if (known.height != fill.height || known.width != fill.width || known.channels != fill.channels ||
      known.height != mask.height || known.width != mask.width) {
    throw ExtentError("composite: extents differ");
  }
  Image out = fill;
  for (std::size_t i = 0; i < mask.known.size(); ++i) {
    if (!mask.known[i]) continue;
    for (std::size_t c = 0; c < known.channels; ++c) {
      out.pixels[i * known.channels + c] = known.pixels[i * known.channels + c];
    }
  }
  return out;
}

Tensor image_to_chw(const Image& img) {
  std::vector<double> data(img.pixels.size());
  const std::size_t plane = img.height * img.width;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < img.channels; ++c) data[c * plane + i] = img.pixels[i * img.channels + c];
  }
  return Tensor({img.channels, img.height, img.width}, std::move(data));
}

Image chw_to_image(const Tensor& chw) {
  if (chw.rank() != 3) throw DimensionError("chw_to_image: expected {C,H,W}");
  Image img(chw.dim(1), chw.dim(2), chw.dim(0));
  const std::size_t plane = img.height * img.width;
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < img.channels; ++c) img.pixels[i * img.channels + c] = chw[c * plane + i];
  }
  return img;
}

Tensor PatchSequence::as_tensor() const { return Tensor({count(), patch_dim()}, patches); }

PatchSequence patchify(const Image& img, const Mask& mask, std::size_t patch_size) {
  if (img.height != mask.height || img.width != mask.width) {
    throw ExtentError("patchify: image and mask extents differ");
  }
  require_divisible(img.height, img.width, patch_size, "patchify");
  PatchSequence seq;
  seq.patch_size = patch_size;
  seq.grid_h = img.height / patch_size;
  seq.grid_w = img.width / patch_size;
  seq.channels = img.channels;
  const std::size_t dim = seq.patch_dim(), area = patch_size * patch_size;
  seq.patches.resize(seq.count() * dim);
  seq.known_pixels.resize(seq.count() * dim);
  seq.mask_ratio.resize(seq.count());
  for (std::size_t gy = 0; gy < seq.grid_h; ++gy) {
    for (std::size_t gx = 0; gx < seq.grid_w; ++gx) {
      const std::size_t p = gy * seq.grid_w + gx;
      std::size_t masked = 0;
      for (std::size_t y = 0; y < patch_size; ++y) {
        for (std::size_t x = 0; x < patch_size; ++x) {
          const std::size_t sy = gy * patch_size + y, sx = gx * patch_size + x;
          const std::uint8_t known = mask.at(sy, sx);
          masked += known ? 0 : 1;
          for (std::size_t c = 0; c < img.channels; ++c) {
            const std::size_t k = p * dim + c * area + y * patch_size + x;
            seq.patches[k] = img.at(sy, sx, c);
            seq.known_pixels[k] = known;
          }
        }
      }
      seq.mask_ratio[p] = static_cast<double>(masked) / static_cast<double>(area);
    }
  }
  return seq;
}

Image unpatchify(const PatchSequence& seq) {
  const std::size_t ps = seq.patch_size, area = ps * ps, dim = seq.patch_dim();
  Image img(seq.grid_h * ps, seq.grid_w * ps, seq.channels);
  for (std::size_t gy = 0; gy < seq.grid_h; ++gy) {
    for (std::size_t gx = 0; gx < seq.grid_w; ++gx) {
      const std::size_t p = gy * seq.grid_w + gx;
      for (std::size_t c = 0; c < seq.channels; ++c) {
        for (std::size_t y = 0; y < ps; ++y) {
          for (std::size_t x = 0; x < ps; ++x) {
            img.at(gy * ps + y, gx * ps + x, c) = seq.patches[p * dim + c * area + y * ps + x];
          }
        }
      }
    }
  }
  return img;
}

std::vector<std::size_t> patch_rows_to_chw_index(std::size_t grid_h, std::size_t grid_w,
                                                 std::size_t channels, std::size_t patch_size) {
  const std::size_t h = grid_h * patch_size, w = grid_w * patch_size;
  const std::size_t area = patch_size * patch_size, dim = channels * area;
  std::vector<std::size_t> index(channels * h * w);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t p = (y / patch_size) * grid_w + x / patch_size;
        index[(c * h + y) * w + x] = p * dim + c * area + (y % patch_size) * patch_size + x % patch_size;
      }
    }
  }
  return index;
}

PositionalKind parse_positional_kind(const std::string& name) {
  if (name == "learned") return PositionalKind::kLearned;
  if (name == "sinusoidal") return PositionalKind::kSinusoidal;
  if (name == "zero") return PositionalKind::kZero;
  throw std::invalid_argument("unknown positional embedding kind '" + name + "'");
}

std::string to_string(PositionalKind kind) {
  switch (kind) {
    case PositionalKind::kLearned: return "learned";
    case PositionalKind::kSinusoidal: return "sinusoidal";
    case PositionalKind::kZero: return "zero";
  }
  return "?";
}

Tensor positional_embedding(std::size_t count, std::size_t dim, PositionalKind kind, Rng& rng) {
  if (count == 0 || dim == 0) throw std::invalid_argument("positional_embedding: empty table");
  switch (kind) {
    case PositionalKind::kLearned:
      return gaussian({count, dim}, 0.02, rng, true);
    case PositionalKind::kZero:
      return Tensor::zeros({count, dim});
    case PositionalKind::kSinusoidal: {
      std::vector<double> table(count * dim);
      for (std::size_t pos = 0; pos < count; ++pos) {
        for (std::size_t i = 0; i < dim; ++i) {
          const double exponent = static_cast<double>(i - i % 2) / static_cast<double>(dim);
          const double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
          table[pos * dim + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
      }
      return Tensor({count, dim}, std::move(table));
    }
  }
  return {};
}

}  // namespace inpaint
