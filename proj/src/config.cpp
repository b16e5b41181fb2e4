#include "inpaint/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace inpaint {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_unsigned(key, trim(item)));
  if (out.empty()) throw ConfigError(key, "expected a comma-separated list");
  return out;
}

std::string format_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string& key, const std::string&)> set;
};

template <typename Get>
auto wrap_error(Get&& fn) {
  return [fn](RunConfig& c, const std::string& key, const std::string& v) {
    try {
      fn(c, key, v);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(key, e.what());
    }
  };
}

// Declaration order is serialisation order.
const std::vector<std::pair<std::string, Field>>& fields() {
  using C = RunConfig;
  using S = const std::string&;
#define SIZE_FIELD(name, member)                                                                      \
  {name, {[](const C& c) { return std::to_string(c.member); },                                      \
          [](C& c, S k, S v) { c.member = static_cast<std::size_t>(parse_unsigned(k, v)); }}}
#define DOUBLE_FIELD(name, member)                                                  \
  {name, {[](const C& c) { return format_double(c.member); },                     \
          [](C& c, S k, S v) { c.member = parse_double(k, v); }}}
#define BOOL_FIELD(name, member)                                                    \
  {name, {[](const C& c) { return std::string(c.member ? "true" : "false"); },    \
          [](C& c, S k, S v) { c.member = parse_bool(k, v); }}}
  static const std::vector<std::pair<std::string, Field>> table = {
      {"image", {[](const C& c) { return c.image; }, [](C& c, S, S v) { c.image = v; }}},
      {"mask", {[](const C& c) { return c.mask; }, [](C& c, S, S v) { c.mask = v; }}},
      {"out", {[](const C& c) { return c.out; }, [](C& c, S, S v) { c.out = v; }}},
      SIZE_FIELD("height", model.height),
      SIZE_FIELD("width", model.width),
      SIZE_FIELD("decoder_factor", model.decoder_factor),
      SIZE_FIELD("patch", model.patch),
      SIZE_FIELD("dim", model.dim),
      SIZE_FIELD("heads", model.heads),
      SIZE_FIELD("encoder_layers", model.encoder_layers),
      SIZE_FIELD("decoder_layers", model.decoder_layers),
      {"backbone_channels",
       {[](const C& c) { return format_list(c.model.backbone_channels); },
        [](C& c, S k, S v) { c.model.backbone_channels = parse_list(k, v); }}},
      {"perceptual_channels",
       {[](const C& c) { return format_list(c.model.perceptual_channels); },
        [](C& c, S k, S v) { c.model.perceptual_channels = parse_list(k, v); }}},
      {"positional",
       {[](const C& c) { return to_string(c.model.positional); },
        wrap_error([](C& c, S, S v) { c.model.positional = parse_positional_kind(v); })}},
      {"activation",
       {[](const C& c) { return to_string(c.model.activation); },
        wrap_error([](C& c, S, S v) { c.model.activation = parse_activation(v); })}},
      DOUBLE_FIELD("lambda", lambda),
      BOOL_FIELD("no_tte", no_tte),
      BOOL_FIELD("no_bridge", no_bridge),
      {"diffusion",
       {[](const C& c) { return std::string(c.diffusion == DiffusionMode::kExact ? "exact" : "incremental"); },
        [](C& c, S k, S v) {
          if (v == "exact") {
            c.diffusion = DiffusionMode::kExact;
          } else if (v == "incremental") {
            c.diffusion = DiffusionMode::kIncremental;
          } else {
            throw ConfigError(k, "expected incremental or exact, got '" + v + "'");
          }
        }}},
      {"selection",
       {[](const C& c) { return to_string(c.selection); },
        wrap_error([](C& c, S, S v) { c.selection = parse_selection_strategy(v); })}},
      DOUBLE_FIELD("avg_threshold", avg_threshold),
      {"seed",
       {[](const C& c) { return std::to_string(c.seed); }, [](C& c, S k, S v) { c.seed = parse_unsigned(k, v); }}},
      DOUBLE_FIELD("weight_rec", weights.rec),
      DOUBLE_FIELD("weight_prec", weights.prec),
      DOUBLE_FIELD("weight_style", weights.style),
      {"reduction",
       {[](const C& c) { return std::string(c.reduction == Reduction::kMean ? "mean" : "sum"); },
        [](C& c, S k, S v) {
          if (v == "mean") {
            c.reduction = Reduction::kMean;
          } else if (v == "sum") {
            c.reduction = Reduction::kSum;
          } else {
            throw ConfigError(k, "expected mean or sum, got '" + v + "'");
          }
        }}},
      SIZE_FIELD("steps", steps),
      DOUBLE_FIELD("lr", lr),
      SIZE_FIELD("batch", batch),
      SIZE_FIELD("train_images", train_images),
      DOUBLE_FIELD("mask_coverage", mask_coverage),
  };
#undef SIZE_FIELD
#undef DOUBLE_FIELD
#undef BOOL_FIELD
  return table;
}

const Field* find_field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return &f;
  }
  return nullptr;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("lambda", "must lie in [0,1]");
  if (!(avg_threshold >= 0.0 && avg_threshold <= 1.0)) throw ConfigError("avg_threshold", "must lie in [0,1]");
  if (weights.rec < 0.0) throw ConfigError("weight_rec", "must be non-negative");
  if (weights.prec < 0.0) throw ConfigError("weight_prec", "must be non-negative");
  if (weights.style < 0.0) throw ConfigError("weight_style", "must be non-negative");
  if (!(lr >= 0.0)) throw ConfigError("lr", "must be non-negative");
  if (batch == 0) throw ConfigError("batch", "must be at least 1");
  if (train_images == 0) throw ConfigError("train_images", "must be at least 1");
  if (!(mask_coverage > 0.0 && mask_coverage < 1.0)) throw ConfigError("mask_coverage", "must lie in (0,1)");
}

PipelineOptions RunConfig::pipeline() const {
  PipelineOptions p;
  p.lambda = lambda;
  p.bridge = !no_bridge;
  p.tte = !no_tte;
  p.mode = diffusion;
  p.strategy = selection;
  p.avg_threshold = avg_threshold;
  return p;
}

RunConfig toy_config() {
  RunConfig c;
  c.model.height = 32;
  c.model.width = 32;
  c.model.patch = 2;
  c.model.dim = 32;
  c.model.heads = 4;
  c.model.encoder_layers = 2;
  c.model.decoder_layers = 2;
  c.batch = 8;
  c.lr = 1e-4;
  return c;
}

RunConfig parse_config(const std::string& text, const RunConfig& base) {
  RunConfig c = base;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(number), "expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const Field* f = find_field(key);
    if (f == nullptr) throw ConfigError(key, "unknown key");
    f->set(c, key, value);
  }
  return c;
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(config) + "\n";
  return out;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

}  // namespace inpaint
