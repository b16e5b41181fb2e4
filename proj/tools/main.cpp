#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "inpaint/config.hpp"
#include "inpaint/model.hpp"
#include "inpaint/selftest.hpp"
#include "inpaint/snapshot.hpp"
#include "inpaint/train.hpp"

namespace fs = std::filesystem;
using namespace inpaint;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> image, mask, out;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda, avg_threshold, lr;
  std::optional<std::size_t> steps;
  bool no_tte = false, no_bridge = false, exact = false;
  std::string weights;
};

void add_common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "run configuration file");
  app->add_option("--image", o.image, "input image (P6)");
  app->add_option("--mask", o.mask, "mask (P5, 0 = masked, 255 = known)");
  app->add_option("--out", o.out, "output directory");
  app->add_option("--seed", o.seed, "root seed");
  app->add_option("--lambda", o.lambda, "direct/bridge mixing weight in [0,1]");
  app->add_flag("--no-tte", o.no_tte, "use un-self-attended references");
  app->add_flag("--no-bridge", o.no_bridge, "drop the bridge attention route");
  app->add_flag("--exact-diffusion", o.exact, "rebuild the score maps from scratch every iteration");
  app->add_option("--avg-threshold", o.avg_threshold, "average candidates with mask ratio at or below this");
  app->add_option("--steps", o.steps, "training steps");
  app->add_option("--lr", o.lr, "transformer learning rate (backbone uses lr/10)");
}

RunConfig resolve(const Overrides& o, const RunConfig& base) {
  RunConfig c = o.config.empty() ? base : load_config(o.config, base);
  if (o.image) c.image = *o.image;
  if (o.mask) c.mask = *o.mask;
  if (o.out) c.out = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.lambda) c.lambda = *o.lambda;
  if (o.avg_threshold) c.avg_threshold = *o.avg_threshold;
  if (o.lr) c.lr = *o.lr;
  if (o.steps) c.steps = *o.steps;
  if (o.no_tte) c.no_tte = true;
  if (o.no_bridge) c.no_bridge = true;
  if (o.exact) c.diffusion = DiffusionMode::kExact;
  c.validate();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

Model load_model(const RunConfig& c, const std::string& weights) {
  Model model(c.model, c.seed);
  if (!weights.empty()) {
    NamedTensors target = model.named_parameters();
    assign_snapshot(load_snapshot(weights), target);
    spdlog::info("loaded weights from {}", weights);
  }
  return model;
}

struct Inputs {
  Image image;
  Mask mask;
};

Inputs read_inputs(const RunConfig& c) {
  if (c.image.empty()) throw ConfigError("image", "no input image given");
  if (c.mask.empty()) throw ConfigError("mask", "no mask given");
  return {to_rgb(read_pnm(c.image)), read_mask(c.mask)};
}

int cmd_inpaint(const RunConfig& c, const std::string& weights) {
  const Inputs in = read_inputs(c);
  const Model model = load_model(c, weights);
  spdlog::info("inpainting {} ({} masked pixels)", c.image, in.mask.masked_count());
  const PipelineResult r = model.run(in.image, in.mask, c.pipeline());
  fs::create_directories(c.out);
  const fs::path out(c.out);
  write_pnm(r.decoder_out.image, out / "decoder_output.ppm");
  write_pnm(r.output, out / "output.ppm");
  write_text(out / "trace.txt", r.diffusion.trace_text());
  write_text(out / "cost.txt", r.diffusion.cost.to_string() + "\n");
  spdlog::info("{} patches inpainted, {}", r.diffusion.trace.size(), r.diffusion.cost.to_string());
  return 0;
}

int cmd_train_toy(const RunConfig& c) {
  const auto samples = make_toy_dataset(c.train_images, c.model.height, c.model.width, c.model.decoder_factor,
                                        c.model.patch, c.mask_coverage, c.seed);
  Model model(c.model, c.seed);
  const PerceptualNet phi(c.model.perceptual_channels, c.seed);
  TrainOptions opt;
  opt.steps = c.steps;
  opt.lr = c.lr;
  opt.batch = c.batch;
  opt.pipeline = c.pipeline();
  opt.weights = c.weights;
  opt.reduction = c.reduction;
  fs::create_directories(c.out);
  const fs::path out(c.out);
  std::ofstream curve(out / "loss_curve.txt", std::ios::binary);
  curve << loss_curve_header();
  train(model, phi, samples, opt, [&](const LossPoint& p) {
    curve << format_loss_line(p);
    spdlog::debug("step {} loss {:.6f}", p.step, p.loss);
    if (p.step % 20 == 0) spdlog::info("step {:4d} loss {:.6f}", p.step, p.loss);
  });
  const LossPoint final_loss = evaluate(model, phi, samples, opt);
  spdlog::info("final loss {:.6f}", final_loss.loss);
  save_snapshot(model.named_parameters(), out / "weights.snapshot");
  return 0;
}

void dump_matrix(std::string& out, const std::string& name, std::size_t rows, std::size_t cols,
                 const std::function<double(std::size_t, std::size_t)>& at) {
  char buf[64];
  out += "# " + name + "\n" + std::to_string(rows) + " " + std::to_string(cols) + "\n";
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      std::snprintf(buf, sizeof buf, j ? " %.12f" : "%.12f", at(i, j));
      out += buf;
    }
    out += "\n";
  }
}

void dump_tensor(std::string& out, const std::string& name, const Tensor& t) {
  dump_matrix(out, name, t.rows(), t.cols(), [&](std::size_t i, std::size_t j) { return t.at(i, j); });
}

void dump_scores(std::string& out, const std::string& name, const ScoreMatrix& m) {
  dump_matrix(out, name, m.rows, m.cols, [&](std::size_t i, std::size_t j) { return m.at(i, j); });
}

int cmd_dump_attn(const RunConfig& c, const std::string& weights) {
  const Inputs in = read_inputs(c);
  const Model model = load_model(c, weights);
  PipelineOptions opt = c.pipeline();
  opt.inspect = true;
  const PipelineResult r = model.run(in.image, in.mask, opt);
  std::string text;
  for (std::size_t l = 0; l < r.encoder_attention.size(); ++l) {
    for (std::size_t h = 0; h < r.encoder_attention[l].size(); ++h) {
      dump_tensor(text, "encoder.layer" + std::to_string(l) + ".head" + std::to_string(h), r.encoder_attention[l][h]);
    }
  }
  for (const auto& f : r.fills) {
    dump_matrix(text, "fill.patch" + std::to_string(f.patch), 1, f.weights.size(),
                [&](std::size_t, std::size_t j) { return f.weights[j]; });
  }
  dump_scores(text, "decoder.direct", r.diffusion.initial_direct);
  if (opt.bridge) dump_scores(text, "decoder.bridge", r.diffusion.initial_bridge);
  for (const auto& rec : r.diffusion.trace) {
    dump_matrix(text, "diffusion.t" + std::to_string(rec.t), 1, rec.distribution.size(),
                [&](std::size_t, std::size_t j) { return rec.distribution[j]; });
  }
  fs::create_directories(c.out);
  write_text(fs::path(c.out) / "attn.txt", text);
  spdlog::info("wrote {}", (fs::path(c.out) / "attn.txt").string());
  return 0;
}

int cmd_selftest(bool inject_fault) {
  const auto results = run_selftest(inject_fault);
  std::size_t failed = 0;
  for (const auto& r : results) {
    std::printf("%s %-26s cases=%zu %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.cases, r.detail.c_str());
    if (!r.passed) ++failed;
  }
  std::printf("%zu suites, %zu failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}

void configure_logging() {
  const char* env = std::getenv("INPAINT_LOG");
  const std::string level = env ? env : "info";
  if (level == "quiet") {
    spdlog::set_level(spdlog::level::off);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    spdlog::set_level(spdlog::level::info);
  }
  spdlog::set_pattern("[%l] %v");
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Transformer image inpainting"};
  app.require_subcommand(1);

  Overrides inpaint_o, train_o, dump_o;
  auto* inpaint_cmd = app.add_subcommand("inpaint", "inpaint an image");
  add_common(inpaint_cmd, inpaint_o);
  inpaint_cmd->add_option("--weights", inpaint_o.weights, "weight snapshot from train-toy");

  auto* train_cmd = app.add_subcommand("train-toy", "train on synthetic 32x32 images");
  add_common(train_cmd, train_o);

  auto* dump_cmd = app.add_subcommand("dump-attn", "write attention maps as text");
  add_common(dump_cmd, dump_o);
  dump_cmd->add_option("--weights", dump_o.weights, "weight snapshot from train-toy");

  bool inject_fault = false;
  auto* self_cmd = app.add_subcommand("selftest", "run the invariant suites");
  self_cmd->add_flag("--inject-fault", inject_fault, "perturb gradients; the gradient suite must fail");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*inpaint_cmd) return cmd_inpaint(resolve(inpaint_o, RunConfig{}), inpaint_o.weights);
    if (*train_cmd) return cmd_train_toy(resolve(train_o, toy_config()));
    if (*dump_cmd) return cmd_dump_attn(resolve(dump_o, RunConfig{}), dump_o.weights);
    if (*self_cmd) return cmd_selftest(inject_fault);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 1;
}
