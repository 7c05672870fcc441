#pragma once

// Differentiable primitives. Every op validates shapes, computes the forward
// value, rejects non-finite results, and — when any input requires a
// gradient — records a backward closure on the tape.

#include <vector>

#include "radar/tensor.hpp"

namespace radar {

// Probabilities fed to binary_cross_entropy are clamped into
// [kBceProbClamp, 1 - kBceProbClamp] so the loss stays bounded.
inline constexpr double kBceProbClamp = 1e-7;

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// Cross-correlation convention, square kernel, zero padding.
// x: [B,C,H,W], w: [F,C,k,k] -> [B,F,H',W'] with H' = (H+2*pad-k)/stride + 1.
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, int stride, int pad);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);  // same shape
Tensor add_bias_rows(Tape& tape, const Tensor& x, const Tensor& b);      // [B,n] + [n]
Tensor add_bias_channels(Tape& tape, const Tensor& x, const Tensor& b);  // [B,C,H,W] + [C]

Tensor relu(Tape& tape, const Tensor& x);
Tensor sigmoid(Tape& tape, const Tensor& x);
Tensor scale(Tape& tape, const Tensor& x, double c);
Tensor flatten(Tape& tape, const Tensor& x);     // [B,...] -> [B,rest]
Tensor mean_pool2(Tape& tape, const Tensor& x);  // 2x2 window, stride 2; H,W even

Tensor sum(Tape& tape, const Tensor& x);   // -> scalar
Tensor mean(Tape& tape, const Tensor& x);  // -> scalar

// Inner product with constant weights; an exactly-zero weight contributes
// exactly zero gradient (the masked-loss building block for SPGD).
Tensor weighted_sum(Tape& tape, const Tensor& v, const std::vector<double>& weights);

// Mean over the batch of -log softmax(logits)[label]; log-sum-exp stabilized.
Tensor cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& labels);
Tensor cross_entropy_per_item(Tape& tape, const Tensor& logits, const std::vector<int>& labels);

// Mean over the batch of -[t log p + (1-t) log(1-p)] with p clamped.
// prob may be shaped [B] or [B,1]; targets must be exactly 0 or 1.
Tensor binary_cross_entropy(Tape& tape, const Tensor& prob, const std::vector<double>& targets);
Tensor binary_cross_entropy_per_item(Tape& tape, const Tensor& prob,
                                     const std::vector<double>& targets);

// Row-wise argmax of a [B,K] tensor; ties resolve to the lowest index.
std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace radar
