#include "sifa/networks.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>
#include <sstream>

#include "sifa/error.hpp"

namespace sifa {

namespace F = torch::nn::functional;
namespace nn = torch::nn;

std::string_view to_string(GanLossForm f) { return f == GanLossForm::log_loss ? "log_loss" : "least_squares"; }

GanLossForm gan_loss_form_from_string(std::string_view s) {
  if (s == "log_loss") return GanLossForm::log_loss;
  if (s == "least_squares") return GanLossForm::least_squares;
  fail(ErrorKind::InvalidArgument, "unknown gan_loss_form '" + std::string(s) + "'");
}

std::string_view to_string(NetId id) {
  switch (id) {
    case NetId::G_t: return "G_t";
    case NetId::E: return "E";
    case NetId::U: return "U";
    case NetId::C_1: return "C_1";
    case NetId::C_2: return "C_2";
    case NetId::D_t: return "D_t";
    case NetId::D_s: return "D_s";
    case NetId::D_p1: return "D_p1";
    case NetId::D_p2: return "D_p2";
  }
  return "?";
}

void ArchConfig::validate() const {
  require(encoder_channels >= 1 && max_encoder_channels >= 1 && generator_channels >= 1 && discriminator_channels >= 1,
          ErrorKind::InvalidArgument, "channel widths must be >= 1");
  require(input_resolution >= 8 && input_resolution % 8 == 0, ErrorKind::InvalidArgument,
          "input_resolution must be a positive multiple of 8");
  require(num_classes >= 2, ErrorKind::InvalidArgument, "num_classes must be >= 2");
}

int ArchConfig::encoder_width(int paper_width) const {
  return std::max(1, std::min(max_encoder_channels, paper_width * encoder_channels / 16));
}

std::string ArchConfig::canonical() const {
  std::ostringstream os;
  os << "enc=" << encoder_channels << ";enc_max=" << max_encoder_channels << ";gen=" << generator_channels
     << ";disc=" << discriminator_channels << ";res=" << input_resolution << ";classes=" << num_classes;
  return os.str();
}

std::uint64_t ArchConfig::hash() const {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ArchConfig ArchConfig::paper(int num_classes) {
  ArchConfig cfg;
  cfg.num_classes = num_classes;
  return cfg;
}

ArchConfig ArchConfig::desk(int input_resolution, int num_classes) {
  ArchConfig cfg;
  cfg.encoder_channels = 8;
  cfg.max_encoder_channels = 32;
  cfg.generator_channels = 8;
  cfg.discriminator_channels = 8;
  cfg.input_resolution = input_resolution;
  cfg.num_classes = num_classes;
  return cfg;
}

namespace {

nn::Conv2d conv(int64_t in, int64_t out, int64_t k, int64_t stride = 1, int64_t pad = 0, bool bias = false,
                int64_t dilation = 1) {
  return nn::Conv2d(nn::Conv2dOptions(in, out, k).stride(stride).padding(pad).dilation(dilation).bias(bias));
}

nn::ConvTranspose2d deconv(int64_t in, int64_t out) {
  return nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 3).stride(2).padding(1).output_padding(1).bias(false));
}

torch::Tensor inorm(const torch::Tensor& x) { return F::instance_norm(x, F::InstanceNormFuncOptions().eps(1e-5)); }

torch::Tensor reflect(const torch::Tensor& x, int64_t p) {
  return F::pad(x, F::PadFuncOptions({p, p, p, p}).mode(torch::kReflect));
}

}  // namespace

// ---------------------------------------------------------------------------

SwitchableBatchNormImpl::SwitchableBatchNormImpl(int64_t channels) {
  weight = register_parameter("weight", torch::ones({channels}));
  bias = register_parameter("bias", torch::zeros({channels}));
  running_mean = register_buffer("running_mean", torch::zeros({channels}));
  running_var = register_buffer("running_var", torch::ones({channels}));
}

torch::Tensor SwitchableBatchNormImpl::forward(const torch::Tensor& x) {
  if (!is_training()) {
    return torch::batch_norm(x, weight, bias, running_mean, running_var, false, 0.1, 1e-5, false);
  }
  if (track_) {
    return torch::batch_norm(x, weight, bias, running_mean, running_var, true, 0.1, 1e-5, false);
  }
  return torch::batch_norm(x, weight, bias, {}, {}, true, 0.1, 1e-5, false);
}

EncoderResBlockImpl::EncoderResBlockImpl(int64_t in, int64_t out, int64_t dilation) {
  conv1 = register_module("conv1", conv(in, out, 3, 1, dilation, false, dilation));
  bn1 = register_module("bn1", SwitchableBatchNorm(out));
  conv2 = register_module("conv2", conv(out, out, 3, 1, dilation, false, dilation));
  bn2 = register_module("bn2", SwitchableBatchNorm(out));
  if (in != out) {
    proj = register_module("proj", conv(in, out, 1));
    bn_proj = register_module("bn_proj", SwitchableBatchNorm(out));
  }
}

torch::Tensor EncoderResBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(bn1(conv1(x)));
  y = bn2(conv2(y));
  auto shortcut = proj.is_empty() ? x : bn_proj(proj(x));
  return torch::relu(y + shortcut);
}

void EncoderResBlockImpl::set_track_running_stats(bool on) {
  bn1->set_track_running_stats(on);
  bn2->set_track_running_stats(on);
  if (!bn_proj.is_empty()) bn_proj->set_track_running_stats(on);
}

ReflectResBlockImpl::ReflectResBlockImpl(int64_t channels) {
  conv1 = register_module("conv1", conv(channels, channels, 3));
  conv2 = register_module("conv2", conv(channels, channels, 3));
}

torch::Tensor ReflectResBlockImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(inorm(conv1(reflect(x, 1))));
  y = inorm(conv2(reflect(y, 1)));
  return x + y;
}

// ---------------------------------------------------------------------------

GeneratorImpl::GeneratorImpl(const ArchConfig& cfg) {
  const int64_t g = cfg.generator_channels;
  stem = register_module("stem", conv(1, g, 7));
  down1 = register_module("down1", conv(g, 2 * g, 3, 2, 1));
  down2 = register_module("down2", conv(2 * g, 4 * g, 3, 2, 1));
  blocks = register_module("blocks", nn::ModuleList());
  for (int i = 0; i < 9; ++i) blocks->push_back(ReflectResBlock(4 * g));
  up1 = register_module("up1", deconv(4 * g, 2 * g));
  up2 = register_module("up2", deconv(2 * g, g));
  out = register_module("out", conv(g, 1, 7, 1, 0, true));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(inorm(stem(reflect(x, 3))));
  y = torch::relu(inorm(down1(y)));
  y = torch::relu(inorm(down2(y)));
  for (const auto& b : *blocks) y = b->as<ReflectResBlock>()->forward(y);
  y = torch::relu(inorm(up1(y)));
  y = torch::relu(inorm(up2(y)));
  return out(reflect(y, 3));
}

EncoderImpl::EncoderImpl(const ArchConfig& cfg) {
  auto w = [&cfg](int paper) { return static_cast<int64_t>(cfg.encoder_width(paper)); };
  stem = register_module("stem", conv(1, w(16), 3, 1, 1));
  stem_bn = register_module("stem_bn", SwitchableBatchNorm(w(16)));

  to_shallow = register_module("to_shallow", nn::ModuleList());
  int64_t prev = w(16);
  auto add = [&](int paper, bool pool) {
    to_shallow->push_back(EncoderResBlock(prev, w(paper), 1));
    pool_after_.push_back(pool);
    prev = w(paper);
  };
  add(16, true);
  add(32, true);
  add(64, false);
  add(64, true);
  for (int i = 0; i < 2; ++i) add(128, false);
  for (int i = 0; i < 4; ++i) add(256, false);
  for (int i = 0; i < 2; ++i) add(512, false);

  dilated = register_module("dilated", nn::ModuleList());
  for (int i = 0; i < 2; ++i) dilated->push_back(EncoderResBlock(prev, w(512), 2));

  final1 = register_module("final1", conv(w(512), w(512), 3, 1, 1));
  final_bn1 = register_module("final_bn1", SwitchableBatchNorm(w(512)));
  final2 = register_module("final2", conv(w(512), w(512), 3, 1, 1));
  final_bn2 = register_module("final_bn2", SwitchableBatchNorm(w(512)));
}

EncoderFeatures EncoderImpl::forward(const torch::Tensor& x) {
  auto y = torch::relu(stem_bn(stem(x)));
  for (std::size_t i = 0; i < to_shallow->size(); ++i) {
    y = to_shallow[i]->as<EncoderResBlock>()->forward(y);
    if (pool_after_[i]) y = F::max_pool2d(y, F::MaxPool2dFuncOptions(2).stride(2));
  }
  EncoderFeatures out;
  out.shallow = y;
  for (const auto& b : *dilated) y = b->as<EncoderResBlock>()->forward(y);
  y = torch::relu(final_bn1(final1(y)));
  y = torch::relu(final_bn2(final2(y)));
  out.deep = y;
  return out;
}

void EncoderImpl::set_track_running_stats(bool on) {
  stem_bn->set_track_running_stats(on);
  for (const auto& b : *to_shallow) b->as<EncoderResBlock>()->set_track_running_stats(on);
  for (const auto& b : *dilated) b->as<EncoderResBlock>()->set_track_running_stats(on);
  final_bn1->set_track_running_stats(on);
  final_bn2->set_track_running_stats(on);
}

std::vector<torch::Tensor> EncoderImpl::parameters_after_shallow_tap() const {
  std::vector<torch::Tensor> out;
  for (const auto& m : std::initializer_list<std::shared_ptr<const torch::nn::Module>>{dilated.ptr(), final1.ptr(), final_bn1.ptr(), final2.ptr(), final_bn2.ptr()}) {
    auto p = m->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

DecoderImpl::DecoderImpl(const ArchConfig& cfg) {
  const int64_t g = cfg.generator_channels;
  in_conv = register_module("in_conv", conv(cfg.tap_channels(), 4 * g, 3));
  blocks = register_module("blocks", nn::ModuleList());
  for (int i = 0; i < 4; ++i) blocks->push_back(ReflectResBlock(4 * g));
  up1 = register_module("up1", deconv(4 * g, 2 * g));
  up2 = register_module("up2", deconv(2 * g, g));
  up3 = register_module("up3", deconv(g, g));
  out = register_module("out", conv(g, 1, 7, 1, 0, true));
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& deep_features) {
  auto y = torch::relu(inorm(in_conv(reflect(deep_features, 1))));
  for (const auto& b : *blocks) y = b->as<ReflectResBlock>()->forward(y);
  y = torch::relu(inorm(up1(y)));
  y = torch::relu(inorm(up2(y)));
  y = torch::relu(inorm(up3(y)));
  return out(reflect(y, 3));
}

ClassifierImpl::ClassifierImpl(const ArchConfig& cfg) {
  conv = register_module("conv", sifa::conv(cfg.tap_channels(), cfg.num_classes, 1, 1, 0, true));
}

torch::Tensor ClassifierImpl::forward(const torch::Tensor& features) {
  return F::interpolate(conv(features), F::InterpolateFuncOptions()
                                            .scale_factor(std::vector<double>{8.0, 8.0})
                                            .mode(torch::kBilinear)
                                            .align_corners(false));
}

DiscriminatorImpl::DiscriminatorImpl(const ArchConfig& cfg, int64_t in_channels, bool dual_head) {
  const int64_t d = cfg.discriminator_channels;
  const std::array<int64_t, 4> widths{d, 2 * d, 4 * d, 8 * d};
  const auto geo = discriminator_geometry();
  int64_t prev = in_channels;
  for (std::size_t i = 0; i < 4; ++i) {
    layers[i] = register_module("layer" + std::to_string(i),
                                conv(prev, widths[i], geo[i].kernel, geo[i].stride, geo[i].padding));
    prev = widths[i];
  }
  head1 = register_module("head", conv(prev, 1, geo[4].kernel, geo[4].stride, geo[4].padding, true));
  if (dual_head) head2 = register_module("head_aux", conv(prev, 1, geo[4].kernel, geo[4].stride, geo[4].padding, true));
}

torch::Tensor DiscriminatorImpl::trunk(const torch::Tensor& x) {
  auto y = x;
  for (auto& l : layers) y = F::leaky_relu(inorm(l(y)), F::LeakyReLUFuncOptions().negative_slope(0.2));
  return y;
}

torch::Tensor DiscriminatorImpl::head_aux(const torch::Tensor& trunk_out) {
  require(!head2.is_empty(), ErrorKind::InvalidArgument, "discriminator has no auxiliary head");
  return head2->forward(trunk_out);
}

PatchLogits DiscriminatorImpl::forward(const torch::Tensor& x) {
  const auto t = trunk(x);
  PatchLogits out;
  out.main = head1(t);
  if (!head2.is_empty()) out.aux = head2(t);
  return out;
}

std::vector<ConvGeometry> discriminator_geometry() {
  return {{4, 2, 1}, {4, 2, 1}, {4, 2, 1}, {4, 1, 1}, {4, 1, 1}};
}

int receptive_field(const std::vector<ConvGeometry>& layers) {
  int rf = 1;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) rf = (rf - 1) * it->stride + it->kernel;
  return rf;
}

int output_extent(int input, const std::vector<ConvGeometry>& layers) {
  int n = input;
  for (const auto& l : layers) n = (n + 2 * l.padding - l.kernel) / l.stride + 1;
  return n;
}

// ---------------------------------------------------------------------------

std::shared_ptr<torch::nn::Module> Networks::module(NetId id) const {
  switch (id) {
    case NetId::G_t: return G_t.ptr();
    case NetId::E: return E.ptr();
    case NetId::U: return U.ptr();
    case NetId::C_1: return C_1.ptr();
    case NetId::C_2: return C_2.ptr();
    case NetId::D_t: return D_t.ptr();
    case NetId::D_s: return D_s.ptr();
    case NetId::D_p1: return D_p1.ptr();
    case NetId::D_p2: return D_p2.ptr();
  }
  return nullptr;
}

std::vector<torch::Tensor> Networks::parameters(NetId id) const { return module(id)->parameters(); }

void Networks::set_training(bool on) {
  for (auto id : kAllNets) module(id)->train(on);
}

std::int64_t count_parameters(const torch::nn::Module& m) {
  std::int64_t n = 0;
  for (const auto& p : m.parameters()) n += p.numel();
  return n;
}

void init_weights(torch::nn::Module& m, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  // named_parameters is ordered by registration, so the draw order is stable.
  for (auto& item : m.named_parameters()) {
    const auto& name = item.key();
    auto& p = item.value();
    const bool is_bn = name.find("bn") != std::string::npos;
    if (is_bn) {
      if (name.ends_with("weight")) p.fill_(1.0);
      else p.zero_();
    } else if (p.dim() > 1) {
      p.normal_(0.0, 0.02, gen);
    } else {
      p.zero_();
    }
  }
}

namespace {
template <typename H>
H seeded(H h, std::uint64_t seed) {
  init_weights(*h, seed);
  return h;
}
}  // namespace

Generator build_generator(const ArchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return seeded(Generator(cfg), seed);
}

Encoder build_encoder(const ArchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return seeded(Encoder(cfg), seed);
}

Decoder build_decoder(const ArchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return seeded(Decoder(cfg), seed);
}

Classifier build_classifier(const ArchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return seeded(Classifier(cfg), seed);
}

Discriminator build_discriminator(const ArchConfig& cfg, int64_t in_channels, bool dual_head, std::uint64_t seed) {
  cfg.validate();
  return seeded(Discriminator(cfg, in_channels, dual_head), seed);
}

Networks build_networks(const ArchConfig& cfg, std::uint64_t seed) {
  auto s = [seed](NetId id) { return seed * 1000003ULL + static_cast<std::uint64_t>(id) + 1; };
  Networks n;
  n.G_t = build_generator(cfg, s(NetId::G_t));
  n.E = build_encoder(cfg, s(NetId::E));
  n.U = build_decoder(cfg, s(NetId::U));
  n.C_1 = build_classifier(cfg, s(NetId::C_1));
  n.C_2 = build_classifier(cfg, s(NetId::C_2));
  n.D_t = build_discriminator(cfg, 1, false, s(NetId::D_t));
  n.D_s = build_discriminator(cfg, 1, true, s(NetId::D_s));
  n.D_p1 = build_discriminator(cfg, cfg.num_classes, false, s(NetId::D_p1));
  n.D_p2 = build_discriminator(cfg, cfg.num_classes, false, s(NetId::D_p2));
  return n;
}

std::vector<torch::Tensor> TargetToSource::parameters() const {
  auto p = encoder_->parameters();
  auto q = decoder_->parameters();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

}  // namespace sifa
