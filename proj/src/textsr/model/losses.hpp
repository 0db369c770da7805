#pragma once

#include "textsr/core/ops.hpp"

namespace textsr::model {

// Mean L1 distance between the forward-difference gradient fields of two
// images: both difference fields contribute their absolute errors to one
// combined mean. Invariant to adding a global constant to both inputs.
Val gradient_profile_loss(Val x_sr, Val x_gt);

// 1 - 2 sum(PG) / (sum P^2 + sum G^2 + eps).
Val dice_loss(Val pred, Val gt, real eps = 1e-6);

// RMS distance between Laplacian responses.
Val edge_loss(Val x0_hat, Val x0);

// Plain soft dice overlap score on tensors (evaluation path).
real dice_score(const Tensor& pred, const Tensor& gt, real eps = 1e-6);

}  // namespace textsr::model
