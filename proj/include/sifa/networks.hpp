#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

namespace sifa {

enum class GanLossForm { log_loss, least_squares };

std::string_view to_string(GanLossForm f);
GanLossForm gan_loss_form_from_string(std::string_view s);

/// Widths of the nine networks. The full-size configuration is
/// ArchConfig::paper(); smaller configurations keep every layer but scale
/// channel counts, which is what the desk-scale experiments use.
struct ArchConfig {
  int encoder_channels = 16;       // width of the C16 stem; every encoder stage scales with it
  int max_encoder_channels = 512;  // cap applied after scaling
  int generator_channels = 32;     // G_t stem width; U trunk runs at 4x this
  int discriminator_channels = 64;
  int input_resolution = 256;
  int num_classes = 5;

  void validate() const;

  /// Channel count of an encoder stage whose full-size width is `paper_width`.
  int encoder_width(int paper_width) const;
  int tap_channels() const { return encoder_width(512); }

  std::string canonical() const;
  /// FNV-1a over canonical(); stored in checkpoint manifests.
  std::uint64_t hash() const;

  static ArchConfig paper(int num_classes = 5);
  /// Reduced widths used by the synthetic reference experiments.
  static ArchConfig desk(int input_resolution = 64, int num_classes = 3);

  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

enum class NetId : int { G_t, E, U, C_1, C_2, D_t, D_s, D_p1, D_p2 };
inline constexpr int kNumNets = 9;
inline constexpr std::array<NetId, kNumNets> kAllNets = {NetId::G_t, NetId::E,   NetId::U,    NetId::C_1, NetId::C_2,
                                                         NetId::D_t, NetId::D_s, NetId::D_p1, NetId::D_p2};
std::string_view to_string(NetId id);

// ---------------------------------------------------------------------------
// Building blocks

/// Batch normalisation whose running statistics can be frozen while still
/// normalising with batch statistics in training mode. The trainer only lets
/// the encoder's statistics move during the encoder's own update stage.
class SwitchableBatchNormImpl : public torch::nn::Module {
 public:
  explicit SwitchableBatchNormImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);
  void set_track_running_stats(bool on) { track_ = on; }

  torch::Tensor weight, bias, running_mean, running_var;

 private:
  bool track_ = true;
};
TORCH_MODULE(SwitchableBatchNorm);

/// conv3x3 - BN - ReLU - conv3x3 - BN, plus identity or 1x1 projection
/// shortcut, then ReLU. Zero padding; `dilation` 2 gives the D-blocks.
class EncoderResBlockImpl : public torch::nn::Module {
 public:
  EncoderResBlockImpl(int64_t in, int64_t out, int64_t dilation);
  torch::Tensor forward(const torch::Tensor& x);
  void set_track_running_stats(bool on);

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, proj{nullptr};
  SwitchableBatchNorm bn1{nullptr}, bn2{nullptr}, bn_proj{nullptr};
};
TORCH_MODULE(EncoderResBlock);

/// CycleGAN residual block: reflect-pad, conv3x3, IN, ReLU, reflect-pad,
/// conv3x3, IN, identity shortcut.
class ReflectResBlockImpl : public torch::nn::Module {
 public:
  explicit ReflectResBlockImpl(int64_t channels);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr};
};
TORCH_MODULE(ReflectResBlock);

// ---------------------------------------------------------------------------
// The nine networks

/// G_t: c7 stem, two stride-2 convs, 9 residual blocks, two x2 transposed
/// convs, c7 output conv. Linear output.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const ArchConfig& cfg);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d stem{nullptr}, down1{nullptr}, down2{nullptr}, out{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::ConvTranspose2d up1{nullptr}, up2{nullptr};
};
TORCH_MODULE(Generator);

struct EncoderFeatures {
  torch::Tensor deep;     // after the final 2xC block; feeds C_1 and U
  torch::Tensor shallow;  // after the 2xR512 block; feeds C_2
};

/// E: {C16, R16, M, R32, M, 2xR64, M, 2xR128, 4xR256, 2xR512, 2xD512, 2xC512}.
class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const ArchConfig& cfg);
  EncoderFeatures forward(const torch::Tensor& x);
  void set_track_running_stats(bool on);

  /// Parameters of the layers that sit after the shallow tap.
  std::vector<torch::Tensor> parameters_after_shallow_tap() const;

 private:
  torch::nn::Conv2d stem{nullptr};
  SwitchableBatchNorm stem_bn{nullptr};
  torch::nn::ModuleList to_shallow{nullptr};  // residual blocks, with pooling recorded in pool_after_
  torch::nn::ModuleList dilated{nullptr};
  torch::nn::Conv2d final1{nullptr}, final2{nullptr};
  SwitchableBatchNorm final_bn1{nullptr}, final_bn2{nullptr};
  std::vector<bool> pool_after_;
};
TORCH_MODULE(Encoder);

/// U: conv, 4 residual blocks, three x2 transposed convs, c7 output conv.
/// Maps the deep tap back to an image at full resolution; linear output.
class DecoderImpl : public torch::nn::Module {
 public:
  explicit DecoderImpl(const ArchConfig& cfg);
  torch::Tensor forward(const torch::Tensor& deep_features);

 private:
  torch::nn::Conv2d in_conv{nullptr}, out{nullptr};
  torch::nn::ModuleList blocks{nullptr};
  torch::nn::ConvTranspose2d up1{nullptr}, up2{nullptr}, up3{nullptr};
};
TORCH_MODULE(Decoder);

/// C_1 / C_2: 1x1 conv to class logits followed by bilinear x8 upsampling.
class ClassifierImpl : public torch::nn::Module {
 public:
  explicit ClassifierImpl(const ArchConfig& cfg);
  torch::Tensor forward(const torch::Tensor& features);

 private:
  torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(Classifier);

struct PatchLogits {
  torch::Tensor main;
  torch::Tensor aux;  // undefined for single-head discriminators
};

/// PatchGAN: four 4x4 convs (strides 2,2,2,1) each followed by instance
/// norm and LeakyReLU(0.2), then a 4x4 stride-1 head producing patch logits.
/// With `dual_head` a second head shares the trunk (D_s).
class DiscriminatorImpl : public torch::nn::Module {
 public:
  DiscriminatorImpl(const ArchConfig& cfg, int64_t in_channels, bool dual_head);
  PatchLogits forward(const torch::Tensor& x);
  torch::Tensor trunk(const torch::Tensor& x);
  torch::Tensor head_main(const torch::Tensor& trunk_out) { return head1->forward(trunk_out); }
  torch::Tensor head_aux(const torch::Tensor& trunk_out);
  bool dual_head() const { return !head2.is_empty(); }

 private:
  std::array<torch::nn::Conv2d, 4> layers{nullptr, nullptr, nullptr, nullptr};
  torch::nn::Conv2d head1{nullptr}, head2{nullptr};
};
TORCH_MODULE(Discriminator);

/// Layer ledger of the PatchGAN used for receptive-field and output-size
/// arithmetic: (kernel, stride, padding) per conv.
struct ConvGeometry {
  int kernel, stride, padding;
};
std::vector<ConvGeometry> discriminator_geometry();
int receptive_field(const std::vector<ConvGeometry>& layers);
int output_extent(int input, const std::vector<ConvGeometry>& layers);

/// The nine networks of the framework. G_s has no parameters of its own: it
/// is always `decoder(encoder(x).deep)`, see TargetToSource.
struct Networks {
  Generator G_t{nullptr};
  Encoder E{nullptr};
  Decoder U{nullptr};
  Classifier C_1{nullptr};
  Classifier C_2{nullptr};
  Discriminator D_t{nullptr};
  Discriminator D_s{nullptr};
  Discriminator D_p1{nullptr};
  Discriminator D_p2{nullptr};

  std::shared_ptr<torch::nn::Module> module(NetId id) const;
  std::vector<torch::Tensor> parameters(NetId id) const;
  void set_training(bool on);
};

Generator build_generator(const ArchConfig& cfg, std::uint64_t seed);
Encoder build_encoder(const ArchConfig& cfg, std::uint64_t seed);
Decoder build_decoder(const ArchConfig& cfg, std::uint64_t seed);
Classifier build_classifier(const ArchConfig& cfg, std::uint64_t seed);
/// `in_channels` is 1 for image-space discriminators and num_classes for the
/// prediction-space ones.
Discriminator build_discriminator(const ArchConfig& cfg, int64_t in_channels, bool dual_head, std::uint64_t seed);

/// All nine networks, each seeded from `seed` and its NetId.
Networks build_networks(const ArchConfig& cfg, std::uint64_t seed);

/// Target-to-source generator view over the shared encoder and decoder.
class TargetToSource {
 public:
  TargetToSource(Encoder e, Decoder u) : encoder_(std::move(e)), decoder_(std::move(u)) {}
  torch::Tensor operator()(const torch::Tensor& x) const { return decoder_.ptr()->forward(encoder_.ptr()->forward(x).deep); }
  const Encoder& encoder() const { return encoder_; }
  const Decoder& decoder() const { return decoder_; }
  std::vector<torch::Tensor> parameters() const;

 private:
  Encoder encoder_;
  Decoder decoder_;
};

std::int64_t count_parameters(const torch::nn::Module& m);

/// Gaussian(0, 0.02) conv weights and zero biases; BN scale 1, shift 0.
void init_weights(torch::nn::Module& m, std::uint64_t seed);

}  // namespace sifa
