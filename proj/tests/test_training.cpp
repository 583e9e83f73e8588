#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "sifa/trainer.hpp"
#include "support.hpp"

using namespace sifa;
using namespace sifa::testing;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kRes = 32;

TrainConfig small_config(std::int64_t iterations, std::uint64_t seed = 3) {
  TrainConfig c;
  c.iterations = iterations;
  c.batch_size = 2;
  c.seed = seed;
  c.image_pool_size = 4;
  return c;
}

struct Fixture {
  SifaState state;
  SliceBatch src, tgt;
  TrainConfig cfg = small_config(1);

  explicit Fixture(LossWeights w = {}, std::uint64_t seed = 5)
      : state(toy_arch(3), seed, 2e-4, 4, w),
        src(random_batch(2, kRes, 3, true, seed + 100)),
        tgt(random_batch(2, kRes, 3, false, seed + 200)) {
    cfg.loss_weights = w;
  }
};

std::vector<torch::Tensor> e_params(const Snapshot& s) { return s.params[static_cast<std::size_t>(NetId::E)]; }

// E's parameter change made by the E stage alone.
std::vector<torch::Tensor> e_stage_delta(LossWeights w) {
  Fixture f(w);
  std::vector<torch::Tensor> before, after;
  train_step(f.state, f.src, f.tgt, f.cfg, [&](Stage s, bool post) {
    if (s != Stage::E) return;
    (post ? after : before) = e_params(snapshot(f.state));
  });
  std::vector<torch::Tensor> delta;
  for (std::size_t i = 0; i < before.size(); ++i) delta.push_back(after[i] - before[i]);
  return delta;
}

}  // namespace

TEST(TrainStep, IncrementsIterationAndRecordsAllTerms) {
  Fixture f;
  const auto rec = train_step(f.state, f.src, f.tgt, f.cfg);
  EXPECT_EQ(f.state.iteration, 1);
  EXPECT_EQ(rec.iteration, 0);
  for (int i = 0; i < kNumLossTerms; ++i) EXPECT_TRUE(rec.values[i].has_value()) << to_string(LossTerm(i));
}

TEST(TrainStep, VariantRecordsOmitDisabledTerms) {
  const LossWeights base;
  {
    Fixture f(effective_weights(TrainVariant::image_alignment_only, base));
    const auto rec = train_step(f.state, f.src, f.tgt, f.cfg);
    for (auto t : {LossTerm::adv_p1, LossTerm::adv_p2, LossTerm::adv_s_tilde, LossTerm::disc_p1, LossTerm::disc_p2,
                   LossTerm::disc_s_aux}) {
      EXPECT_FALSE(rec.has(t)) << to_string(t);
    }
    for (auto t : {LossTerm::adv_t, LossTerm::adv_s, LossTerm::cyc, LossTerm::seg_1, LossTerm::seg_2,
                   LossTerm::disc_t, LossTerm::disc_s}) {
      EXPECT_TRUE(rec.has(t)) << to_string(t);
    }
  }
  {
    Fixture f(effective_weights(TrainVariant::image_plus_fap, base));
    const auto rec = train_step(f.state, f.src, f.tgt, f.cfg);
    EXPECT_TRUE(rec.has(LossTerm::adv_p1));
    EXPECT_TRUE(rec.has(LossTerm::disc_p2));
    EXPECT_FALSE(rec.has(LossTerm::adv_s_tilde));
    EXPECT_FALSE(rec.has(LossTerm::disc_s_aux));
  }
}

TEST(TrainStep, EffectiveWeights) {
  const LossWeights w;
  EXPECT_EQ(effective_weights(TrainVariant::full_sifa, w), w);
  const auto bound = effective_weights(TrainVariant::no_adaptation_lower_bound, w);
  EXPECT_EQ(bound, (LossWeights{0, 0, 0, 1, 0, 0, 0, 0}));
  EXPECT_EQ(effective_weights(TrainVariant::supervised_upper_bound, w), bound);
  const auto ia = effective_weights(TrainVariant::image_alignment_only, w);
  EXPECT_EQ(ia.adv_p1, 0.0);
  EXPECT_EQ(ia.adv_p2, 0.0);
  EXPECT_EQ(ia.adv_s_tilde, 0.0);
  EXPECT_EQ(ia.cyc, 10.0);
  EXPECT_EQ(effective_weights(TrainVariant::image_plus_fap, w).adv_p2, 0.01);
}

TEST(TrainStep, OnlySegmentationPathMovesWithSeg1Alone) {
  Fixture f(LossWeights{0, 0, 0, 1, 0, 0, 0, 0});
  const auto before = snapshot(f.state);
  std::vector<Stage> ran;
  train_step(f.state, f.src, f.tgt, f.cfg, [&](Stage s, bool post) {
    if (!post) ran.push_back(s);
  });
  const auto after = snapshot(f.state);
  EXPECT_EQ(ran, (std::vector<Stage>{Stage::E, Stage::C}));
  for (auto id : kAllNets) {
    const bool expect = id == NetId::E || id == NetId::C_1;
    EXPECT_EQ(net_changed(before, after, id), expect) << to_string(id);
  }
}

TEST(TrainStep, DefaultWeightsMoveEveryNetwork) {
  Fixture f;
  const auto before = snapshot(f.state);
  train_step(f.state, f.src, f.tgt, f.cfg);
  const auto after = snapshot(f.state);
  for (auto id : kAllNets) EXPECT_TRUE(net_changed(before, after, id)) << to_string(id);
}

TEST(TrainStep, StagesRunInOrderAndTouchOnlyTheirNetworks) {
  Fixture f;
  std::vector<Stage> ran;
  Snapshot pre;
  train_step(f.state, f.src, f.tgt, f.cfg, [&](Stage s, bool post) {
    if (!post) {
      ran.push_back(s);
      pre = snapshot(f.state);
      return;
    }
    const auto now = snapshot(f.state);
    const auto owned = stage_networks(s);
    for (auto id : kAllNets) {
      const bool mine = std::find(owned.begin(), owned.end(), id) != owned.end();
      EXPECT_EQ(net_changed(pre, now, id), mine) << to_string(s) << " / " << to_string(id);
      EXPECT_EQ(net_buffers_changed(pre, now, id), s == Stage::E && id == NetId::E)
          << to_string(s) << " / " << to_string(id);
    }
  });
  EXPECT_EQ(ran, std::vector<Stage>(kStageOrder.begin(), kStageOrder.end()));
}

TEST(TrainStep, EncoderUpdateCombinesSegmentationAndCycle) {
  const LossWeights full;
  LossWeights no_cyc = full;
  no_cyc.cyc = 0;
  LossWeights no_seg = full;
  no_seg.seg_1 = no_seg.seg_2 = 0;
  const auto d_full = e_stage_delta(full);
  const auto d_no_cyc = e_stage_delta(no_cyc);
  const auto d_no_seg = e_stage_delta(no_seg);
  EXPECT_GT(param_diff_norm(d_full, d_no_cyc), 0.0);
  EXPECT_GT(param_diff_norm(d_full, d_no_seg), 0.0);
  EXPECT_GT(param_diff_norm(d_no_cyc, d_no_seg), 0.0);
}

TEST(TrainStep, DiscriminatorLossDescendsAtSmallStep) {
  // With a tiny learning rate the D_t update is a gradient step, so its own
  // objective on the same inputs must not increase.
  SifaState state(toy_arch(3), 7, 1e-5, 0);
  auto& n = state.nets();
  const auto src = random_batch(2, kRes, 3, true, 11);
  const auto tgt = random_batch(2, kRes, 3, false, 12);
  auto d_loss = [&] {
    torch::NoGradGuard ng;
    auto fake = n.G_t(src.images);
    return adv_loss(n.D_t->forward(tgt.images).main, n.D_t->forward(fake).main, GanLossPhase::discriminator_phase,
                    GanLossForm::log_loss)
        .item<double>();
  };
  double before = 0;
  TrainConfig cfg = small_config(1);
  train_step(state, src, tgt, cfg, [&](Stage s, bool post) {
    if (s == Stage::D_t && !post) before = d_loss();
    if (s == Stage::D_t && post) EXPECT_LT(d_loss(), before);
  });
}

TEST(TrainStep, RejectsBadBatches) {
  Fixture f;
  auto unlabeled = random_batch(2, kRes, 3, false, 1);
  EXPECT_SIFA_ERROR(train_step(f.state, unlabeled, f.tgt, f.cfg), ErrorKind::InvalidArgument);
  auto three = random_batch(3, kRes, 3, false, 1);
  EXPECT_SIFA_ERROR(train_step(f.state, f.src, three, f.cfg), ErrorKind::InvalidArgument);
}

TEST(TrainStep, NanInputRaisesNonFiniteLoss) {
  Fixture f;
  f.src.images = torch::full_like(f.src.images, NAN);
  EXPECT_SIFA_ERROR(train_step(f.state, f.src, f.tgt, f.cfg), ErrorKind::NonFiniteLoss);
}

TEST(TrainStep, SupervisedStepTouchesEncoderAndFirstClassifier) {
  SifaState state(toy_arch(3), 9, 2e-4, 0, LossWeights{0, 0, 0, 1, 0, 0, 0, 0});
  const auto before = snapshot(state);
  const auto rec = supervised_step(state, random_batch(2, kRes, 3, true, 4), small_config(1));
  const auto after = snapshot(state);
  EXPECT_TRUE(rec.has(LossTerm::seg_1));
  EXPECT_EQ(state.iteration, 1);
  for (auto id : kAllNets) {
    EXPECT_EQ(net_changed(before, after, id), id == NetId::E || id == NetId::C_1) << to_string(id);
  }
}

TEST(Train, ZeroIterationsLeavesStateUntouched) {
  const auto data = toy_training_data(kRes, 3, 4, 1);
  auto cfg = small_config(0);
  const auto result = train(TrainVariant::full_sifa, data, toy_arch(3), cfg);
  SifaState fresh(toy_arch(3), cfg.seed, cfg.learning_rate, cfg.image_pool_size);
  EXPECT_TRUE(same_parameters(result.state, fresh));
  EXPECT_EQ(result.state.iteration, 0);
  EXPECT_TRUE(result.records.empty());
}

TEST(Train, RecordsPerVariant) {
  const auto data = toy_training_data(kRes, 3, 4, 2);
  auto labeled = data;
  for (auto& s : labeled.target) s.label = std::vector<std::int32_t>(s.pixels.size(), 0);
  for (auto v : kAblationLadder) {
    const auto r = train(v, labeled, toy_arch(3), small_config(2));
    ASSERT_EQ(r.records.size(), 2u) << to_string(v);
    EXPECT_EQ(r.records[1].iteration, 1);
    EXPECT_EQ(r.records[0].has(LossTerm::adv_t), !is_bound_variant(v)) << to_string(v);
    EXPECT_EQ(r.records[0].has(LossTerm::adv_s_tilde), v == TrainVariant::full_sifa) << to_string(v);
    EXPECT_TRUE(r.records[0].has(LossTerm::seg_1));
  }
}

TEST(Train, UpperBoundNeedsTargetLabels) {
  const auto data = toy_training_data(kRes, 3, 4, 2);
  EXPECT_SIFA_ERROR(train(TrainVariant::supervised_upper_bound, data, toy_arch(3), small_config(1)),
                    ErrorKind::InvalidArgument);
}

TEST(Train, SameSeedSameResult) {
  const auto data = toy_training_data(kRes, 3, 4, 3);
  const auto a = train(TrainVariant::full_sifa, data, toy_arch(3), small_config(3));
  const auto b = train(TrainVariant::full_sifa, data, toy_arch(3), small_config(3));
  EXPECT_TRUE(same_parameters(a.state, b.state));
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].values, b.records[i].values);
  const auto c = train(TrainVariant::full_sifa, data, toy_arch(3), small_config(3, 4));
  EXPECT_FALSE(same_parameters(a.state, c.state));
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  const auto data = toy_training_data(kRes, 3, 4, 4);
  const auto dir_a = scratch_dir("resume_a");
  const auto dir_b = scratch_dir("resume_b");
  auto cfg = small_config(4);
  cfg.output_dir = dir_a;
  const auto full = train(TrainVariant::full_sifa, data, toy_arch(3), cfg);

  auto half = cfg;
  half.output_dir = dir_b;
  half.iterations = 2;
  half.checkpoint_every = 1;
  const auto first = train(TrainVariant::full_sifa, data, toy_arch(3), half);
  ASSERT_EQ(first.checkpoints.size(), 3u);
  auto restored = load_checkpoint(dir_b / "checkpoints" / "final", toy_arch(3));
  EXPECT_EQ(restored.iteration, 2);
  auto rest = cfg;
  rest.output_dir = dir_b;
  const auto second = train(TrainVariant::full_sifa, data, toy_arch(3), rest, std::move(restored));

  EXPECT_TRUE(same_parameters(full.state, second.state));
  ASSERT_EQ(second.records.size(), 2u);
  EXPECT_EQ(second.records[1].values, full.records[3].values);
  const auto log = read_loss_log(dir_b / "loss_log.jsonl");
  ASSERT_EQ(log.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(log[i].iteration, static_cast<std::int64_t>(i));
    EXPECT_EQ(log[i].values, full.records[i].values);
  }
}

TEST(Train, ResumeWithOtherArchitectureFails) {
  const auto data = toy_training_data(kRes, 3, 4, 4);
  SifaState other(toy_arch(4), 1);
  EXPECT_SIFA_ERROR(train(TrainVariant::full_sifa, data, toy_arch(3), small_config(1), std::move(other)),
                    ErrorKind::ArchMismatch);
}

TEST(Checkpoint, RoundTripAndErrors) {
  Fixture f;
  train_step(f.state, f.src, f.tgt, f.cfg);
  const auto dir = scratch_dir("ckpt");
  save_checkpoint(f.state, dir / "a");
  auto back = load_checkpoint(dir / "a");
  EXPECT_TRUE(same_parameters(f.state, back));
  EXPECT_EQ(back.iteration, 1);
  EXPECT_EQ(back.pool_t.images().size(), f.state.pool_t.images().size());

  // Both copies continue identically.
  auto a = train_step(f.state, f.src, f.tgt, f.cfg);
  auto b = train_step(back, f.src, f.tgt, f.cfg);
  EXPECT_EQ(a.values, b.values);
  EXPECT_TRUE(same_parameters(f.state, back));

  EXPECT_SIFA_ERROR(load_checkpoint(dir / "a", toy_arch(4)), ErrorKind::ArchMismatch);
  EXPECT_SIFA_ERROR(load_checkpoint(dir / "missing"), ErrorKind::CorruptCheckpoint);
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    if (e.path().filename() != "manifest.json") {
      std::ofstream(e.path(), std::ios::trunc) << "garbage";
      break;
    }
  }
  EXPECT_SIFA_ERROR(load_checkpoint(dir / "a"), ErrorKind::CorruptCheckpoint);
}

TEST(LossLog, RoundTripKeepsAbsentTerms) {
  const auto dir = scratch_dir("losslog");
  const auto path = dir / "log.jsonl";
  LossRecord a;
  a.iteration = 0;
  a.wall_clock_s = 0.5;
  a.set(LossTerm::seg_1, 0.25);
  LossRecord b;
  b.iteration = 1;
  b.set(LossTerm::cyc, 1.5);
  b.set(LossTerm::disc_p2, 0.0);
  append_loss_log(path, a);
  append_loss_log(path, b);
  const auto back = read_loss_log(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].values, a.values);
  EXPECT_EQ(back[1].values, b.values);
  EXPECT_DOUBLE_EQ(back[0].wall_clock_s, 0.5);
  EXPECT_FALSE(back[1].has(LossTerm::seg_1));
  EXPECT_TRUE(back[1].has(LossTerm::disc_p2));
}

TEST(LossLog, EmptyLogRejected) {
  const auto dir = scratch_dir("emptylog");
  std::ofstream(dir / "log.jsonl").close();
  EXPECT_SIFA_ERROR(read_loss_log(dir / "log.jsonl"), ErrorKind::EmptyLog);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 0;
  EXPECT_SIFA_ERROR(c.validate(), ErrorKind::InvalidArgument);
  c = TrainConfig{};
  c.learning_rate = -1;
  EXPECT_SIFA_ERROR(c.validate(), ErrorKind::InvalidArgument);
  c = TrainConfig{};
  c.loss_weights.cyc = -1;
  EXPECT_SIFA_ERROR(c.validate(), ErrorKind::InvalidArgument);
  EXPECT_SIFA_ERROR(train_variant_from_string("bogus"), ErrorKind::InvalidArgument);
  for (auto v : kAblationLadder) EXPECT_EQ(train_variant_from_string(to_string(v)), v);
}
