#include "sifa/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "sifa/config_io.hpp"

namespace sifa {

namespace fs = std::filesystem;

std::string_view to_string(TrainVariant v) {
  switch (v) {
    case TrainVariant::no_adaptation_lower_bound: return "no_adaptation_lower_bound";
    case TrainVariant::supervised_upper_bound: return "supervised_upper_bound";
    case TrainVariant::image_alignment_only: return "image_alignment_only";
    case TrainVariant::image_plus_fap: return "image_plus_fap";
    case TrainVariant::full_sifa: return "full_sifa";
  }
  return "?";
}

TrainVariant train_variant_from_string(std::string_view s) {
  for (auto v : kAblationLadder) {
    if (to_string(v) == s) return v;
  }
  fail(ErrorKind::InvalidArgument, "unknown training variant '" + std::string(s) + "'");
}

bool is_bound_variant(TrainVariant v) {
  return v == TrainVariant::no_adaptation_lower_bound || v == TrainVariant::supervised_upper_bound;
}

void TrainConfig::validate() const {
  require(iterations >= 0, ErrorKind::InvalidArgument, "iterations must be >= 0");
  require(batch_size >= 1, ErrorKind::InvalidArgument, "batch_size must be >= 1");
  require(std::isfinite(learning_rate) && learning_rate > 0, ErrorKind::InvalidArgument, "learning_rate must be > 0");
  require(checkpoint_every >= 0, ErrorKind::InvalidArgument, "checkpoint_every must be >= 0");
  require(image_pool_size >= 0, ErrorKind::InvalidArgument, "image_pool_size must be >= 0");
  loss_weights.validate();
  if (augmentation) augmentation->validate();
}

LossWeights effective_weights(TrainVariant v, const LossWeights& w) {
  LossWeights out = w;
  switch (v) {
    case TrainVariant::no_adaptation_lower_bound:
    case TrainVariant::supervised_upper_bound:
      out = LossWeights{0, 0, 0, 1, 0, 0, 0, 0};
      break;
    case TrainVariant::image_alignment_only:
      out.adv_p1 = out.adv_p2 = out.adv_s_tilde = 0;
      break;
    case TrainVariant::image_plus_fap:
      out.adv_s_tilde = 0;
      break;
    case TrainVariant::full_sifa:
      break;
  }
  return out;
}

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::G_t: return "G_t";
    case Stage::D_t: return "D_t";
    case Stage::E: return "E";
    case Stage::C: return "C";
    case Stage::U: return "U";
    case Stage::D_s: return "D_s";
    case Stage::D_p: return "D_p";
  }
  return "?";
}

std::vector<NetId> stage_networks(Stage s) {
  switch (s) {
    case Stage::G_t: return {NetId::G_t};
    case Stage::D_t: return {NetId::D_t};
    case Stage::E: return {NetId::E};
    case Stage::C: return {NetId::C_1, NetId::C_2};
    case Stage::U: return {NetId::U};
    case Stage::D_s: return {NetId::D_s};
    case Stage::D_p: return {NetId::D_p1, NetId::D_p2};
  }
  return {};
}

namespace {

// Accumulates the weighted terms of one stage objective.
class Objective {
 public:
  void add(double weight, const torch::Tensor& term) {
    if (weight == 0.0) return;
    total_ = total_.defined() ? total_ + weight * term : weight * term;
  }
  bool empty() const { return !total_.defined(); }
  const torch::Tensor& total() const { return total_; }

 private:
  torch::Tensor total_;
};

// Gradient of `loss` with respect to the stage networks only; every other
// network keeps whatever .grad it had and is never stepped here.
void apply_stage(SifaState& state, const std::vector<NetId>& nets, const torch::Tensor& loss) {
  std::vector<torch::Tensor> params;
  for (auto id : nets) {
    auto p = state.nets().parameters(id);
    params.insert(params.end(), p.begin(), p.end());
  }
  auto grads = torch::autograd::grad({loss}, params, {}, /*retain_graph=*/false, /*create_graph=*/false,
                                     /*allow_unused=*/true);
  for (std::size_t i = 0; i < params.size(); ++i) params[i].mutable_grad() = grads[i];
  for (auto id : nets) state.optimizer(id).step();
  for (auto& p : params) p.mutable_grad() = torch::Tensor();
}

double scalar(const torch::Tensor& t) { return t.detach().item<double>(); }

torch::Tensor softmax(const torch::Tensor& logits) { return torch::softmax(logits, 1); }

class StageRunner {
 public:
  StageRunner(SifaState& state, const StageObserver& observer) : state_(state), observer_(observer) {}

  // Called before a stage's forward passes; `active` must agree with the
  // stage objective being non-empty.
  void begin(Stage s, bool active) {
    if (active && observer_) observer_(s, false);
  }

  void run(Stage s, const Objective& obj) {
    if (obj.empty()) return;
    apply_stage(state_, stage_networks(s), obj.total());
    if (observer_) observer_(s, true);
  }

 private:
  SifaState& state_;
  const StageObserver& observer_;
};

}  // namespace

LossRecord train_step(SifaState& state, const SliceBatch& source, const SliceBatch& target, const TrainConfig& cfg,
                      const StageObserver& observer) {
  require(source.has_labels(), ErrorKind::InvalidArgument, "source batch must carry labels");
  require(source.size() == target.size(), ErrorKind::InvalidArgument, "source and target batch sizes differ");
  require(source.images.sizes() == target.images.sizes(), ErrorKind::ShapeMismatch,
          "source and target slices differ in shape");
  const auto& w = state.weights;
  const auto form = cfg.gan_loss_form;
  const auto gen = GanLossPhase::generator_phase;
  const auto disc = GanLossPhase::discriminator_phase;
  auto& n = state.nets();
  const auto& x_s = source.images;
  const auto& y_s = *source.labels;
  const auto& x_t = target.images;

  LossRecord rec;
  rec.iteration = state.iteration;
  StageRunner runner(state, observer);
  n.set_training(true);
  n.E->set_track_running_stats(false);

  const bool need_pred_adv = w.adv_p1 != 0 || w.adv_p2 != 0;
  const bool need_recon_adv = w.adv_s != 0 || w.adv_s_tilde != 0;

  // (1) G_t: fool D_t and close both cycles.
  {
    runner.begin(Stage::G_t, w.adv_t != 0 || w.cyc != 0);
    Objective obj;
    auto fake_t = n.G_t(x_s);
    if (w.adv_t != 0) {
      auto l = adv_loss({}, n.D_t->forward(fake_t).main, gen, form);
      rec.set(LossTerm::adv_t, scalar(l));
      obj.add(w.adv_t, l);
    }
    if (w.cyc != 0) {
      torch::Tensor recon_t;  // G_t only sees it as an input here
      {
        torch::NoGradGuard ng;
        recon_t = n.U(n.E(x_t).deep);
      }
      auto l = cycle_loss(n.U(n.E(fake_t).deep), x_s, n.G_t(recon_t), x_t);
      rec.set(LossTerm::cyc, scalar(l));
      obj.add(w.cyc, l);
    }
    runner.run(Stage::G_t, obj);
  }

  torch::Tensor fake_t;  // x^{s->t} from the updated G_t
  {
    torch::NoGradGuard ng;
    fake_t = n.G_t(x_s);
  }

  // (2) D_t: real target images against pooled translations.
  if (w.adv_t != 0) {
    runner.begin(Stage::D_t, true);
    Objective obj;
    auto pooled = state.pool_t.query(fake_t, state.rng);
    auto l = adv_loss(n.D_t->forward(x_t).main, n.D_t->forward(pooled).main, disc, form);
    rec.set(LossTerm::disc_t, scalar(l));
    obj.add(1.0, l);
    runner.run(Stage::D_t, obj);
  }

  // (3) E: segmentation of translated images, both cycles, and every
  // adversarial term that passes through the shared encoder. Only this
  // stage lets the encoder's running statistics move.
  {
    runner.begin(Stage::E, w.seg_1 != 0 || w.seg_2 != 0 || w.cyc != 0 || need_recon_adv || need_pred_adv);
    Objective obj;
    n.E->set_track_running_stats(true);
    auto f_st = n.E(fake_t);
    auto f_t = n.E(x_t);
    n.E->set_track_running_stats(false);
    if (w.seg_1 != 0) {
      auto l = seg_loss(n.C_1(f_st.deep), y_s);
      rec.set(LossTerm::seg_1, scalar(l));
      obj.add(w.seg_1, l);
    }
    if (w.seg_2 != 0) {
      auto l = seg_loss(n.C_2(f_st.shallow), y_s);
      rec.set(LossTerm::seg_2, scalar(l));
      obj.add(w.seg_2, l);
    }
    torch::Tensor recon_t;
    if (w.cyc != 0 || need_recon_adv) recon_t = n.U(f_t.deep);
    if (w.cyc != 0) obj.add(w.cyc, cycle_loss(n.U(f_st.deep), x_s, n.G_t(recon_t), x_t));
    if (need_recon_adv) {
      auto trunk = n.D_s->trunk(recon_t);
      if (w.adv_s != 0) {
        auto l = adv_loss({}, n.D_s->head_main(trunk), gen, form);
        rec.set(LossTerm::adv_s, scalar(l));
        obj.add(w.adv_s, l);
      }
      if (w.adv_s_tilde != 0) {
        auto l = adv_loss({}, n.D_s->head_aux(trunk), gen, form);
        rec.set(LossTerm::adv_s_tilde, scalar(l));
        obj.add(w.adv_s_tilde, l);
      }
    }
    if (w.adv_p1 != 0) {
      auto l = adv_loss({}, n.D_p1->forward(softmax(n.C_1(f_t.deep))).main, gen, form);
      rec.set(LossTerm::adv_p1, scalar(l));
      obj.add(w.adv_p1, l);
    }
    if (w.adv_p2 != 0) {
      auto l = adv_loss({}, n.D_p2->forward(softmax(n.C_2(f_t.shallow))).main, gen, form);
      rec.set(LossTerm::adv_p2, scalar(l));
      obj.add(w.adv_p2, l);
    }
    runner.run(Stage::E, obj);
  }

  EncoderFeatures f_st, f_t;  // from the updated encoder, detached
  {
    torch::NoGradGuard ng;
    f_st = n.E(fake_t);
    f_t = n.E(x_t);
  }

  // (4) C_1, C_2: segmentation plus prediction-space adversarial terms.
  {
    runner.begin(Stage::C, w.seg_1 != 0 || w.seg_2 != 0 || need_pred_adv);
    Objective obj;
    if (w.seg_1 != 0) obj.add(w.seg_1, seg_loss(n.C_1(f_st.deep), y_s));
    if (w.seg_2 != 0) obj.add(w.seg_2, seg_loss(n.C_2(f_st.shallow), y_s));
    if (w.adv_p1 != 0) obj.add(w.adv_p1, adv_loss({}, n.D_p1->forward(softmax(n.C_1(f_t.deep))).main, gen, form));
    if (w.adv_p2 != 0) obj.add(w.adv_p2, adv_loss({}, n.D_p2->forward(softmax(n.C_2(f_t.shallow))).main, gen, form));
    runner.run(Stage::C, obj);
  }

  // (5) U: both cycles and the image-space terms on U(E(x_t)).
  {
    runner.begin(Stage::U, w.cyc != 0 || need_recon_adv);
    Objective obj;
    if (w.cyc != 0 || need_recon_adv) {
      auto recon_t = n.U(f_t.deep);
      if (w.cyc != 0) obj.add(w.cyc, cycle_loss(n.U(f_st.deep), x_s, n.G_t(recon_t), x_t));
      if (need_recon_adv) {
        auto trunk = n.D_s->trunk(recon_t);
        if (w.adv_s != 0) obj.add(w.adv_s, adv_loss({}, n.D_s->head_main(trunk), gen, form));
        if (w.adv_s_tilde != 0) obj.add(w.adv_s_tilde, adv_loss({}, n.D_s->head_aux(trunk), gen, form));
      }
    }
    runner.run(Stage::U, obj);
  }

  // (6) D_s: head 1 tells real source images from U(E(x_t)); head 2 tells
  // U(E(x_{s->t})) from U(E(x_t)).
  if (need_recon_adv) {
    runner.begin(Stage::D_s, true);
    Objective obj;
    torch::Tensor recon_t, recon_st;
    {
      torch::NoGradGuard ng;
      recon_t = n.U(f_t.deep);
      recon_st = n.U(f_st.deep);
    }
    if (w.adv_s != 0) {
      auto pooled = state.pool_s.query(recon_t, state.rng);
      auto l = adv_loss(n.D_s->forward(x_s).main, n.D_s->forward(pooled).main, disc, form);
      rec.set(LossTerm::disc_s, scalar(l));
      obj.add(1.0, l);
    }
    if (w.adv_s_tilde != 0) {
      auto l = adv_loss(n.D_s->head_aux(n.D_s->trunk(recon_st)), n.D_s->head_aux(n.D_s->trunk(recon_t)), disc, form);
      rec.set(LossTerm::disc_s_aux, scalar(l));
      obj.add(1.0, l);
    }
    runner.run(Stage::D_s, obj);
  }

  // (7) D_p1, D_p2: predictions on translated source (real) against target.
  if (need_pred_adv) {
    runner.begin(Stage::D_p, true);
    Objective obj;
    if (w.adv_p1 != 0) {
      torch::Tensor real, fake;
      {
        torch::NoGradGuard ng;
        real = softmax(n.C_1(f_st.deep));
        fake = softmax(n.C_1(f_t.deep));
      }
      auto l = adv_loss(n.D_p1->forward(real).main, n.D_p1->forward(fake).main, disc, form);
      rec.set(LossTerm::disc_p1, scalar(l));
      obj.add(1.0, l);
    }
    if (w.adv_p2 != 0) {
      torch::Tensor real, fake;
      {
        torch::NoGradGuard ng;
        real = softmax(n.C_2(f_st.shallow));
        fake = softmax(n.C_2(f_t.shallow));
      }
      auto l = adv_loss(n.D_p2->forward(real).main, n.D_p2->forward(fake).main, disc, form);
      rec.set(LossTerm::disc_p2, scalar(l));
      obj.add(1.0, l);
    }
    runner.run(Stage::D_p, obj);
  }

  n.E->set_track_running_stats(true);
  ++state.iteration;
  return rec;
}

LossRecord supervised_step(SifaState& state, const SliceBatch& labeled, const TrainConfig&) {
  require(labeled.has_labels(), ErrorKind::InvalidArgument, "supervised batch must carry labels");
  auto& n = state.nets();
  n.set_training(true);
  n.E->set_track_running_stats(true);
  auto l = seg_loss(n.C_1(n.E(labeled.images).deep), *labeled.labels);
  LossRecord rec;
  rec.iteration = state.iteration;
  rec.set(LossTerm::seg_1, scalar(l));
  apply_stage(state, {NetId::E, NetId::C_1}, l);
  ++state.iteration;
  return rec;
}

namespace {

std::string checkpoint_name(std::int64_t iteration) {
  std::ostringstream os;
  os << "iter_" << std::setw(7) << std::setfill('0') << iteration;
  return os.str();
}

void rewrite_loss_log(const fs::path& path, std::int64_t keep_before) {
  std::vector<LossRecord> kept;
  if (fs::exists(path) && fs::file_size(path) > 0) {
    for (auto& r : read_loss_log(path)) {
      if (r.iteration < keep_before) kept.push_back(r);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  for (const auto& r : kept) out << to_json(r).dump() << '\n';
}

}  // namespace

TrainResult train(TrainVariant variant, const TrainingData& data, const ArchConfig& arch, const TrainConfig& cfg,
                  std::optional<SifaState> resume) {
  cfg.validate();
  arch.validate();
  const auto weights = effective_weights(variant, cfg.loss_weights);
  SifaState state = [&] {
    if (!resume) return SifaState(arch, cfg.seed, cfg.learning_rate, cfg.image_pool_size, weights);
    if (!(resume->arch() == arch)) {
      fail(ErrorKind::ArchMismatch,
           "resumed state architecture {" + resume->arch().canonical() + "} differs from {" + arch.canonical() + "}");
    }
    resume->weights = weights;
    return std::move(*resume);
  }();

  const bool bound = is_bound_variant(variant);
  const auto& labeled_set = variant == TrainVariant::supervised_upper_bound ? data.target : data.source;
  for (const auto& s : labeled_set) {
    require(s.label.has_value(), ErrorKind::InvalidArgument,
            std::string(to_string(variant)) + " needs labels on every " + std::string(to_string(s.domain)) +
                " training slice");
  }
  BatchStream labeled(labeled_set, cfg.batch_size, cfg.seed * 2 + 1, cfg.augmentation, true);
  std::optional<BatchStream> unlabeled;
  if (!bound) unlabeled.emplace(data.target, cfg.batch_size, cfg.seed * 2 + 2, cfg.augmentation, false);

  TrainResult result{std::move(state), {}, {}};
  auto& st = result.state;
  fs::path log_path;
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    log_path = cfg.output_dir / "loss_log.jsonl";
    rewrite_loss_log(log_path, resume ? st.iteration : 0);
  }

  const auto t0 = std::chrono::steady_clock::now();
  while (st.iteration < cfg.iterations) {
    const auto i = st.iteration;
    LossRecord rec = bound ? supervised_step(st, labeled.batch(i), cfg)
                           : train_step(st, labeled.batch(i), unlabeled->batch(i), cfg);
    rec.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!log_path.empty()) append_loss_log(log_path, rec);
    result.records.push_back(rec);
    if (!cfg.output_dir.empty() && cfg.checkpoint_every > 0 && st.iteration % cfg.checkpoint_every == 0) {
      const auto dir = cfg.output_dir / "checkpoints" / checkpoint_name(st.iteration);
      save_checkpoint(st, dir);
      result.checkpoints.push_back(dir);
    }
  }
  if (!cfg.output_dir.empty()) {
    const auto dir = cfg.output_dir / "checkpoints" / "final";
    save_checkpoint(st, dir);
    result.checkpoints.push_back(dir);
  }
  st.nets().set_training(false);
  return result;
}

void append_loss_log(const fs::path& path, const LossRecord& record) {
  std::ofstream out(path, std::ios::app);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot append to " + path.string());
  out << to_json(record).dump() << '\n';
}

std::vector<LossRecord> read_loss_log(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open loss log " + path.string());
  std::vector<LossRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(loss_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::InvalidArgument, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  require(!out.empty(), ErrorKind::EmptyLog, "loss log " + path.string() + " has no records");
  return out;
}

}  // namespace sifa
