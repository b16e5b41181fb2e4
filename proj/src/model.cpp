#include "inpaint/model.hpp"

#include <stdexcept>

namespace inpaint {
namespace {

void require(bool ok, const char* field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

enum Stream : std::uint64_t {
  kBackboneStream = 1,
  kProjectionStream,
  kEncoderPosStream,
  kEncoderStream,
  kPatchStream,
  kDecoderPosStream,
  kFillStream,
  kDecoderStream,
  kHeadStream,
};

}  // namespace

void ModelConfig::validate() const {
  require(height > 0 && width > 0, "height", "height and width must be positive");
  require(backbone_channels.size() >= 2 && backbone_channels.front() == 3,
          "backbone_channels", "backbone_channels must start at 3 and have at least one stage");
  const std::size_t reduction = std::size_t{1} << (backbone_channels.size() - 1);
  require(height % reduction == 0 && width % reduction == 0,
          "height", "height/width must be divisible by the backbone reduction " + std::to_string(reduction));
  require(decoder_factor > 0 && height % decoder_factor == 0 && width % decoder_factor == 0,
          "decoder_factor", "decoder_factor must divide height and width");
  require(patch > 0 && decoder_height() % patch == 0 && decoder_width() % patch == 0,
          "patch", "patch must divide the decoder resolution " + std::to_string(decoder_height()) + "x" +
              std::to_string(decoder_width()));
  require(heads > 0 && dim % heads == 0, "heads", "dim must be divisible by heads");
  require(dim >= 2, "dim", "dim must be at least 2");
  require(encoder_layers >= 1, "encoder_layers", "encoder_layers must be at least 1");
  require(decoder_layers >= 1, "decoder_layers", "decoder_layers must be at least 1");
  require(perceptual_channels.size() >= 2 && perceptual_channels.front() == 3,
          "perceptual_channels", "perceptual_channels must start at 3 and have at least one stage");
  const std::size_t pr = std::size_t{1} << (perceptual_channels.size() - 1);
  require(decoder_height() % pr == 0 && decoder_width() % pr == 0,
          "perceptual_channels", "perceptual stack reduction must divide the decoder resolution");
}

std::size_t ModelConfig::reference_count() const {
  const std::size_t reduction = std::size_t{1} << (backbone_channels.size() - 1);
  return (height / reduction) * (width / reduction);
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t d = config_.dim;
  {
    Rng rng = derive_rng(seed, kBackboneStream);
    backbone = ConvStack(config_.backbone_channels, rng, true);
  }
  {
    Rng rng = derive_rng(seed, kProjectionStream);
    projection = Projection1x1(backbone.out_channels(), d, rng);
  }
  {
    Rng rng = derive_rng(seed, kEncoderPosStream);
    encoder_positions = positional_embedding(config_.reference_count(), d, config_.positional, rng);
  }
  {
    Rng rng = derive_rng(seed, kEncoderStream);
    for (std::size_t i = 0; i < config_.encoder_layers; ++i) encoder.push_back(EncoderLayer::init(d, config_.heads, rng));
  }
  const std::size_t patch_dim = 3 * config_.patch * config_.patch;
  {
    Rng rng = derive_rng(seed, kPatchStream);
    patch_weight = xavier_uniform(patch_dim, d, rng);
    patch_bias = Tensor::zeros({d}, true);
  }
  {
    Rng rng = derive_rng(seed, kDecoderPosStream);
    decoder_positions = positional_embedding(config_.patch_count(), d, config_.positional, rng);
  }
  {
    Rng rng = derive_rng(seed, kFillStream);
    cfa = CoarseFillAttention::init(d, rng);
  }
  {
    Rng rng = derive_rng(seed, kDecoderStream);
    for (std::size_t i = 0; i < config_.decoder_layers; ++i) decoder.push_back(DecoderLayer::init(d, rng));
  }
  {
    Rng rng = derive_rng(seed, kHeadStream);
    head = PixelHead::init(d, patch_dim, rng);
  }
}

Tensor Model::references(const Image& masked, const PipelineOptions& options,
                         std::vector<std::vector<Tensor>>* attention) const {
  Tensor tokens = add(projection.project(backbone.extract_features(masked)), encoder_positions);
  EncodeOptions eo;
  eo.activation = config_.activation;
  eo.enabled = options.tte;
  eo.grid_width = config_.width >> (config_.backbone_channels.size() - 1);
  eo.attention = attention;
  return encode(tokens, encoder, eo).refs;
}

PipelineResult Model::run(const Image& image, const Mask& mask, const PipelineOptions& options) const {
  if (image.height != config_.height || image.width != config_.width || image.channels != 3) {
    throw ExtentError("pipeline: expected a " + std::to_string(config_.height) + "x" + std::to_string(config_.width) +
                      " RGB image, got " + std::to_string(image.height) + "x" + std::to_string(image.width) + "x" +
                      std::to_string(image.channels));
  }
  if (mask.height != image.height || mask.width != image.width) {
    throw ExtentError("pipeline: mask extent differs from image extent");
  }
  PipelineResult r;
  const Image masked = apply_mask(image, mask);
  r.refs = references(masked, options, options.inspect ? &r.encoder_attention : nullptr);

  r.mask_decoder = downsample(mask, config_.decoder_factor);
  // Blocks that are only partly known count as masked and carry no pixels.
  r.masked_decoder = apply_mask(downsample(masked, config_.decoder_factor), r.mask_decoder);
  const PatchSequence patches = patchify(r.masked_decoder, r.mask_decoder, config_.patch);
  const Tensor embeddings = add(linear(patches.as_tensor(), patch_weight, patch_bias), decoder_positions);

  PatchLedger ledger(embeddings, patches.mask_ratio);
  std::vector<FillRecord> fills = coarse_fill_all(cfa, ledger);
  if (options.inspect) r.fills = std::move(fills);

  DiffusionOptions dopt;
  dopt.lambda = options.lambda;
  dopt.bridge = options.bridge;
  dopt.mode = options.mode;
  dopt.strategy = options.strategy;
  dopt.avg_threshold = options.avg_threshold;
  dopt.activation = config_.activation;
  dopt.grid_h = patches.grid_h;
  dopt.grid_w = patches.grid_w;
  r.diffusion = diffuse(ledger, decoder, r.refs, dopt);

  r.decoder_out = finalize_image(ledger, patches, r.diffusion.averaged, head);
  r.output = upsample_output(r.decoder_out.image, masked, mask, config_.decoder_factor);
  return r;
}

NamedParams Model::named_parameters() const {
  NamedParams out;
  backbone.named_parameters("backbone", out);
  out.emplace_back("projection.weight", projection.weight);
  out.emplace_back("projection.bias", projection.bias);
  if (encoder_positions.requires_grad()) out.emplace_back("encoder.positions", encoder_positions);
  for (std::size_t i = 0; i < encoder.size(); ++i) encoder[i].append_params(out, "encoder.layer" + std::to_string(i));
  out.emplace_back("patch.weight", patch_weight);
  out.emplace_back("patch.bias", patch_bias);
  if (decoder_positions.requires_grad()) out.emplace_back("decoder.positions", decoder_positions);
  cfa.append_params(out, "fill");
  for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].append_params(out, "decoder.layer" + std::to_string(i));
  head.append_params(out, "head");
  return out;
}

std::vector<Tensor> Model::backbone_parameters() const {
  NamedParams named;
  backbone.named_parameters("backbone", named);
  std::vector<Tensor> out;
  for (auto& [name, t] : named) out.push_back(t);
  return out;
}

std::vector<Tensor> Model::transformer_parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) {
    if (name.rfind("backbone.", 0) != 0) out.push_back(t);
  }
  return out;
}

LossBundle pipeline_loss(const Model& model, const PerceptualNet& phi, const Image& image, const Mask& mask,
                         const PipelineOptions& options, const LossWeights& weights, Reduction reduction) {
  const PipelineResult r = model.run(image, mask, options);
  const Tensor gt = image_to_chw(downsample(image, model.config().decoder_factor));
  return compute_losses(r.decoder_out.chw, gt, phi, weights, reduction);
}

}  // namespace inpaint
