#include "inpaint/snapshot.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <stdexcept>

#include "inpaint/image.hpp"

namespace inpaint {
namespace {

constexpr const char* kMagic = "INPAINT-SNAPSHOT";

void put_le(std::vector<std::uint8_t>& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double get_le(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const NamedTensors& tensors) {
  std::ostringstream manifest;
  manifest << kMagic << ' ' << tensors.size() << '\n';
  for (const auto& [name, t] : tensors) {
    if (name.empty() || name.find_first_of(" \n\t") != std::string::npos) {
      throw std::invalid_argument("snapshot: invalid tensor name '" + name + "'");
    }
    manifest << name;
    for (std::size_t d : t.shape()) manifest << ' ' << d;
    manifest << '\n';
  }
  const std::string text = manifest.str();
  std::vector<std::uint8_t> out(text.begin(), text.end());
  for (const auto& [name, t] : tensors) {
    for (double v : t.data()) put_le(out, v);
  }
  return out;
}

NamedTensors decode_snapshot(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const std::size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos >= bytes.size()) throw FormatError("snapshot: unterminated manifest line", start);
    std::string line(bytes.begin() + static_cast<std::ptrdiff_t>(start),
                     bytes.begin() + static_cast<std::ptrdiff_t>(pos));
    ++pos;
    return std::make_pair(line, start);
  };
  auto [head, head_at] = next_line();
  std::istringstream hs(head);
  std::string magic;
  std::size_t count = 0;
  if (!(hs >> magic >> count) || magic != kMagic) throw FormatError("snapshot: bad magic", head_at);

  std::vector<std::pair<std::string, Shape>> manifest;
  for (std::size_t i = 0; i < count; ++i) {
    auto [line, at] = next_line();
    std::istringstream ls(line);
    std::string name;
    if (!(ls >> name)) throw FormatError("snapshot: empty manifest line", at);
    Shape shape;
    std::size_t d = 0;
    while (ls >> d) shape.push_back(d);
    if (!ls.eof()) throw FormatError("snapshot: malformed shape for " + name, at);
    manifest.emplace_back(std::move(name), std::move(shape));
  }
  NamedTensors out;
  for (auto& [name, shape] : manifest) {
    const std::size_t n = shape_size(shape);
    if (bytes.size() - pos < n * 8) throw FormatError("snapshot: truncated payload for " + name, bytes.size());
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = get_le(bytes.data() + pos + 8 * i);
    pos += n * 8;
    out.emplace_back(name, Tensor(shape, std::move(data)));
  }
  if (pos != bytes.size()) throw FormatError("snapshot: trailing bytes", pos);
  return out;
}

void save_snapshot(const NamedTensors& tensors, const std::filesystem::path& path) {
  const auto bytes = encode_snapshot(tensors);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

NamedTensors load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_snapshot(bytes);
}

void assign_snapshot(const NamedTensors& source, NamedTensors& target) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : source) by_name[name] = &t;
  if (by_name.size() != target.size()) {
    throw std::invalid_argument("snapshot: tensor count " + std::to_string(by_name.size()) +
                                " does not match model (" + std::to_string(target.size()) + ")");
  }
  for (auto& [name, t] : target) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw std::invalid_argument("snapshot: missing tensor " + name);
    if (it->second->shape() != t.shape()) {
      throw std::invalid_argument("snapshot: shape mismatch for " + name + ": " +
                                  shape_string(it->second->shape()) + " vs " + shape_string(t.shape()));
    }
    auto dst = t.mutable_data();
    std::copy(it->second->data().begin(), it->second->data().end(), dst.begin());
  }
}

}  // namespace inpaint
