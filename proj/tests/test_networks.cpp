#include <gtest/gtest.h>

#include "sifa/networks.hpp"
#include "support.hpp"

using namespace sifa;
using namespace sifa::testing;

namespace {

// Parameter counts re-derived from the layer ledger, independent of the
// module code: 3x3 convs without bias, BN scale+shift, 1x1 projections when
// the width changes.
std::int64_t encoder_count_oracle(const ArchConfig& a) {
  auto w = [&](std::int64_t p) {
    return std::max<std::int64_t>(1, std::min<std::int64_t>(a.max_encoder_channels, p * a.encoder_channels / 16));
  };
  auto block = [](std::int64_t in, std::int64_t out) {
    return 9 * in * out + 2 * out + 9 * out * out + 2 * out + (in != out ? in * out + 2 * out : 0);
  };
  std::int64_t n = 9 * w(16) + 2 * w(16);
  const std::vector<std::int64_t> ledger{16, 32, 64, 64, 128, 128, 256, 256, 256, 256, 512, 512, 512, 512};
  std::int64_t prev = w(16);
  for (auto p : ledger) {
    n += block(prev, w(p));
    prev = w(p);
  }
  n += 2 * (9 * w(512) * w(512) + 2 * w(512));
  return n;
}

std::int64_t generator_count_oracle(const ArchConfig& a) {
  const std::int64_t g = a.generator_channels;
  return 49 * g + 9 * g * 2 * g + 9 * 2 * g * 4 * g + 9 * 2 * 9 * 16 * g * g + 9 * 4 * g * 2 * g + 9 * 2 * g * g +
         49 * g + 1;
}

std::int64_t decoder_count_oracle(const ArchConfig& a) {
  const std::int64_t g = a.generator_channels, t = a.tap_channels();
  return 9 * t * 4 * g + 4 * 2 * 9 * 16 * g * g + 9 * 4 * g * 2 * g + 9 * 2 * g * g + 9 * g * g + 49 * g + 1;
}

std::int64_t discriminator_count_oracle(const ArchConfig& a, std::int64_t in, int heads) {
  const std::int64_t d = a.discriminator_channels;
  return 16 * (in * d + d * 2 * d + 2 * d * 4 * d + 4 * d * 8 * d) + heads * (16 * 8 * d + 1);
}

// Forward accumulation of receptive field and jump, the opposite direction
// of the library's recursion.
int receptive_field_forward(const std::vector<ConvGeometry>& layers) {
  int rf = 1, jump = 1;
  for (const auto& l : layers) {
    rf += (l.kernel - 1) * jump;
    jump *= l.stride;
  }
  return rf;
}

}  // namespace

TEST(Networks, ParameterCountsMatchLedger) {
  for (const auto& a : {toy_arch(), ArchConfig::desk(64, 3), ArchConfig::paper(5)}) {
    EXPECT_EQ(count_parameters(*build_encoder(a, 1)), encoder_count_oracle(a)) << a.canonical();
    EXPECT_EQ(count_parameters(*build_generator(a, 1)), generator_count_oracle(a));
    EXPECT_EQ(count_parameters(*build_decoder(a, 1)), decoder_count_oracle(a));
    EXPECT_EQ(count_parameters(*build_classifier(a, 1)), a.tap_channels() * a.num_classes + a.num_classes);
    EXPECT_EQ(count_parameters(*build_discriminator(a, 1, false, 1)), discriminator_count_oracle(a, 1, 1));
    EXPECT_EQ(count_parameters(*build_discriminator(a, 1, true, 1)), discriminator_count_oracle(a, 1, 2));
    EXPECT_EQ(count_parameters(*build_discriminator(a, a.num_classes, false, 1)),
              discriminator_count_oracle(a, a.num_classes, 1));
  }
}

TEST(Networks, PaperParameterCountsFrozen) {
  const auto a = ArchConfig::paper(5);
  EXPECT_EQ(count_parameters(*build_encoder(a, 1)), 27693360);
  EXPECT_EQ(count_parameters(*build_generator(a, 1)), 2841665);
  EXPECT_EQ(count_parameters(*build_discriminator(a, 1, false, 1)), 2761729);
}

TEST(Networks, ReceptiveField) {
  const auto geo = discriminator_geometry();
  EXPECT_EQ(receptive_field_forward(geo), 70);
  EXPECT_EQ(receptive_field(geo), 70);
}

TEST(Networks, PatchOutputExtent) {
  const auto geo = discriminator_geometry();
  EXPECT_EQ(output_extent(256, geo), 30);
  EXPECT_EQ(output_extent(64, geo), 6);
  torch::NoGradGuard ng;
  auto d = build_discriminator(toy_arch(), 1, true, 3);
  for (int n : {32, 64, 256}) {
    const auto out = d->forward(torch::randn({2, 1, n, n}));
    EXPECT_EQ(out.main.sizes(), (std::vector<std::int64_t>{2, 1, output_extent(n, geo), output_extent(n, geo)}));
    EXPECT_EQ(out.aux.sizes(), out.main.sizes());
  }
}

TEST(Networks, EncoderTapsAtEighthResolutionPaperWidths) {
  torch::NoGradGuard ng;
  const auto a = ArchConfig::paper(5);
  auto e = build_encoder(a, 2);
  e->eval();
  const auto f = e->forward(torch::randn({1, 1, 64, 64}));
  EXPECT_EQ(f.deep.sizes(), (std::vector<std::int64_t>{1, 512, 8, 8}));
  EXPECT_EQ(f.shallow.sizes(), (std::vector<std::int64_t>{1, 512, 8, 8}));
  auto c = build_classifier(a, 3);
  EXPECT_EQ(c->forward(f.deep).sizes(), (std::vector<std::int64_t>{1, 5, 64, 64}));
}

TEST(Networks, ForwardShapesToy) {
  torch::NoGradGuard ng;
  const auto a = toy_arch(4);
  auto n = build_networks(a, 5);
  const auto x = torch::randn({3, 1, 32, 32});
  EXPECT_EQ(n.G_t(x).sizes(), x.sizes());
  const auto f = n.E(x);
  EXPECT_EQ(f.deep.size(2), 4);
  EXPECT_EQ(f.deep.size(1), a.tap_channels());
  EXPECT_EQ(n.U(f.deep).sizes(), x.sizes());
  EXPECT_EQ(n.C_1(f.deep).sizes(), (std::vector<std::int64_t>{3, 4, 32, 32}));
  EXPECT_EQ(n.C_2(f.shallow).sizes(), (std::vector<std::int64_t>{3, 4, 32, 32}));
  EXPECT_FALSE(n.D_t->forward(x).aux.defined());
  EXPECT_SIFA_ERROR(n.D_t->head_aux(n.D_t->trunk(x)), ErrorKind::InvalidArgument);
}

TEST(Networks, GeneratorOutputIsLinear) {
  torch::NoGradGuard ng;
  auto g = build_generator(toy_arch(), 1);
  for (auto& p : g->named_parameters()) {
    if (p.key().rfind("out.", 0) == 0) p.value().mul_(200.0);
  }
  const auto y = g->forward(torch::randn({2, 1, 32, 32}));
  EXPECT_GT(y.abs().max().item<double>(), 1.0);
}

TEST(Networks, SeededInitialisation) {
  const auto a = toy_arch();
  auto g1 = build_generator(a, 7), g2 = build_generator(a, 7), g3 = build_generator(a, 8);
  const auto p1 = g1->parameters(), p2 = g2->parameters(), p3 = g3->parameters();
  bool differs = false;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    EXPECT_TRUE(torch::equal(p1[i], p2[i]));
    differs = differs || !torch::equal(p1[i], p3[i]);
  }
  EXPECT_TRUE(differs);
}

TEST(Networks, InitStatistics) {
  auto e = build_encoder(ArchConfig::desk(64, 3), 4);
  std::vector<torch::Tensor> conv;
  for (const auto& p : e->named_parameters()) {
    if (p.value().dim() > 1) conv.push_back(p.value().flatten());
    if (p.key().find("bn") != std::string::npos) {
      const double expect = p.key().ends_with("weight") ? 1.0 : 0.0;
      EXPECT_TRUE(torch::all(p.value() == expect).item<bool>()) << p.key();
    }
  }
  const auto all = torch::cat(conv);
  EXPECT_NEAR(all.mean().item<double>(), 0.0, 2e-3);
  EXPECT_NEAR(all.std().item<double>(), 0.02, 1e-3);
}

TEST(Networks, TargetToSourceSharesEncoderStorage) {
  auto n = build_networks(toy_arch(), 1);
  TargetToSource g_s(n.E, n.U);
  auto shared = g_s.parameters();
  auto e = n.E->parameters();
  auto u = n.U->parameters();
  ASSERT_EQ(shared.size(), e.size() + u.size());
  for (std::size_t i = 0; i < e.size(); ++i) EXPECT_EQ(shared[i].data_ptr(), e[i].data_ptr());
  for (std::size_t i = 0; i < u.size(); ++i) EXPECT_EQ(shared[e.size() + i].data_ptr(), u[i].data_ptr());
  // Mutating E is visible through G_s.
  torch::NoGradGuard ng;
  const auto x = torch::randn({2, 1, 32, 32});
  n.E->eval();
  n.U->eval();
  const auto before = g_s(x);
  e[0].add_(0.5);
  EXPECT_FALSE(torch::equal(before, g_s(x)));
}

TEST(Networks, SwitchableBatchNormTracking) {
  SwitchableBatchNorm bn(3);
  bn->train();
  const auto x = torch::randn({4, 3, 5, 5}) * 3 + 2;
  bn->set_track_running_stats(false);
  bn->forward(x);
  EXPECT_TRUE(torch::equal(bn->running_mean, torch::zeros({3})));
  bn->set_track_running_stats(true);
  bn->forward(x);
  EXPECT_FALSE(torch::equal(bn->running_mean, torch::zeros({3})));
  // Training output uses batch statistics either way.
  bn->set_track_running_stats(false);
  const auto y = bn->forward(x);
  EXPECT_NEAR(y.mean().item<double>(), 0.0, 1e-5);
}

TEST(Networks, ArchValidationAndHash) {
  auto a = ArchConfig::desk(64, 3);
  auto b = a;
  b.num_classes = 4;
  EXPECT_NE(a.hash(), b.hash());
  EXPECT_EQ(a.hash(), ArchConfig::desk(64, 3).hash());
  a.input_resolution = 60;
  EXPECT_SIFA_ERROR(a.validate(), ErrorKind::InvalidArgument);
}
