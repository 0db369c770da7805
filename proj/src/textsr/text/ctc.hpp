#pragma once

#include <vector>

#include "textsr/core/ops.hpp"
#include "textsr/text/charset.hpp"

namespace textsr::text {

// Mean CTC negative log-likelihood over a batch. logits is (L, N, C) with
// C = charset size + 1 (blank = last class). Throws when a target cannot be
// aligned within L frames or contains ids outside [0, C-2].
Val ctc_loss(Val logits, const std::vector<std::vector<int>>& targets, int blank);

// Greedy decode: argmax per frame, collapse repeats, drop blanks.
// probs_or_logits is (L, C) for a single sequence.
std::vector<int> ctc_greedy(const Tensor& probs_or_logits, int blank);

std::string ctc_greedy_decode(const Tensor& probs_or_logits, const Charset& cs);

}  // namespace textsr::text
