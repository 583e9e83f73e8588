#include "sifa/losses.hpp"

#include <cmath>

namespace sifa {

namespace F = torch::nn::functional;

void check_finite(const torch::Tensor& loss, std::string_view term) {
  const double v = loss.item<double>();
  if (!std::isfinite(v)) fail(ErrorKind::NonFiniteLoss, std::string(term) + " evaluated to " + std::to_string(v));
}

torch::Tensor adv_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits, GanLossPhase phase,
                       GanLossForm form) {
  require(fake_logits.defined(), ErrorKind::InvalidArgument, "fake logits are required");
  torch::Tensor loss;
  if (phase == GanLossPhase::generator_phase) {
    // -log s(x) = softplus(-x), evaluated stably for large |x|.
    loss = form == GanLossForm::log_loss ? F::softplus(-fake_logits).mean() : (fake_logits - 1.0).pow(2).mean();
  } else {
    require(real_logits.defined(), ErrorKind::InvalidArgument, "real logits are required in the discriminator phase");
    if (form == GanLossForm::log_loss) {
      // -log(1 - s(x)) = softplus(x)
      loss = F::softplus(-real_logits).mean() + F::softplus(fake_logits).mean();
    } else {
      loss = (real_logits - 1.0).pow(2).mean() + fake_logits.pow(2).mean();
    }
  }
  check_finite(loss, "adversarial loss");
  return loss;
}

torch::Tensor cycle_loss(const torch::Tensor& recon_s, const torch::Tensor& x_s, const torch::Tensor& recon_t,
                         const torch::Tensor& x_t) {
  require(recon_s.sizes() == x_s.sizes() && recon_t.sizes() == x_t.sizes(), ErrorKind::ShapeMismatch,
          "cycle reconstruction shape differs from its input");
  auto loss = (recon_s - x_s).abs().mean() + (recon_t - x_t).abs().mean();
  check_finite(loss, "cycle loss");
  return loss;
}

torch::Tensor soft_dice_loss(const torch::Tensor& probs, const torch::Tensor& one_hot) {
  // Sums over batch and pixels, one Dice score per class, averaged over classes.
  const std::vector<int64_t> dims{0, 2, 3};
  auto inter = (probs * one_hot).sum(dims);
  auto denom = probs.sum(dims) + one_hot.sum(dims);
  auto dice = (2.0 * inter + kDiceEpsilon) / (denom + kDiceEpsilon);
  return 1.0 - dice.mean();
}

torch::Tensor seg_loss(const torch::Tensor& logits, const torch::Tensor& labels) {
  require(logits.dim() == 4 && labels.dim() == 3, ErrorKind::ShapeMismatch, "expected logits [B,K,H,W], labels [B,H,W]");
  require(logits.size(0) == labels.size(0) && logits.size(2) == labels.size(1) && logits.size(3) == labels.size(2),
          ErrorKind::ShapeMismatch, "logits and labels disagree in shape");
  const auto k = logits.size(1);
  const auto lo = labels.min().item<int64_t>();
  const auto hi = labels.max().item<int64_t>();
  if (lo < 0 || hi >= k) {
    fail(ErrorKind::LabelOutOfRange, "labels span [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                         "] but logits have " + std::to_string(k) + " classes");
  }
  auto log_probs = torch::log_softmax(logits, 1);
  auto ce = F::nll_loss(log_probs, labels);
  auto one_hot = F::one_hot(labels, k).permute({0, 3, 1, 2}).to(logits.scalar_type());
  auto loss = ce + soft_dice_loss(log_probs.exp(), one_hot);
  check_finite(loss, "segmentation loss");
  return loss;
}

double total_objective(const LossRecord& r, const LossWeights& w) {
  const std::array<std::pair<LossTerm, double>, 8> terms{{{LossTerm::adv_t, w.adv_t},
                                                          {LossTerm::adv_s, w.adv_s},
                                                          {LossTerm::cyc, w.cyc},
                                                          {LossTerm::seg_1, w.seg_1},
                                                          {LossTerm::seg_2, w.seg_2},
                                                          {LossTerm::adv_p1, w.adv_p1},
                                                          {LossTerm::adv_p2, w.adv_p2},
                                                          {LossTerm::adv_s_tilde, w.adv_s_tilde}}};
  double total = 0.0;
  for (const auto& [term, weight] : terms) {
    if (r.has(term)) total += weight * *r[term];
  }
  if (!std::isfinite(total)) fail(ErrorKind::NonFiniteLoss, "total objective is not finite");
  return total;
}

}  // namespace sifa
