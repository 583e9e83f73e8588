#pragma once

#include <torch/torch.h>

#include "sifa/domain.hpp"
#include "sifa/networks.hpp"

namespace sifa {

enum class GanLossPhase { discriminator_phase, generator_phase };

/// Adversarial loss over patch logit maps, averaged over batch and patch
/// positions. Discriminator phase scores `real` as real and `fake` as fake;
/// generator phase is the non-saturating loss that asks `fake` to score as
/// real (`real` is ignored and may be undefined).
///
///   log_loss:      D: -mean log s(real) - mean log(1 - s(fake))   G: -mean log s(fake)
///   least_squares: D: mean (real - 1)^2 + mean fake^2             G: mean (fake - 1)^2
torch::Tensor adv_loss(const torch::Tensor& real_logits, const torch::Tensor& fake_logits, GanLossPhase phase,
                       GanLossForm form);

/// Mean absolute error of both reconstructions, summed.
torch::Tensor cycle_loss(const torch::Tensor& recon_s, const torch::Tensor& x_s, const torch::Tensor& recon_t,
                         const torch::Tensor& x_t);

inline constexpr double kDiceEpsilon = 1e-7;

/// Pixel-mean cross-entropy plus soft multi-class Dice loss (all classes,
/// background included). logits [B, K, H, W], labels [B, H, W] int64.
torch::Tensor seg_loss(const torch::Tensor& logits, const torch::Tensor& labels);

/// The soft Dice term alone, exposed for tests.
torch::Tensor soft_dice_loss(const torch::Tensor& probs, const torch::Tensor& one_hot);

/// Weighted sum of the recorded generator-side terms. L_adv^t carries
/// weight adv_t (1 by default); absent terms contribute nothing.
double total_objective(const LossRecord& record, const LossWeights& w);

/// Throws NonFiniteLoss naming `term` when the scalar is NaN/Inf.
void check_finite(const torch::Tensor& loss, std::string_view term);

}  // namespace sifa
