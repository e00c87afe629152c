#pragma once

#include <vector>

#include "qfusion/rng.hpp"
#include "qfusion/tensor.hpp"

namespace qfusion::nn {

/// 2-D convolution, stride 1. x: [B,C,H,W], w: [F,C,kh,kw], b: [F].
/// Output spatial size is H+2p-kh+1 x W+2p-kw+1 (equal to the input for
/// 3x3 kernels with padding 1).
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b,
              int padding = 1);

/// Batch normalization over [B,H,W] per channel. Train mode normalizes by
/// biased batch statistics and folds unbiased ones into the running buffers
/// (momentum 0.1); eval mode reads the running buffers.
Tensor batchnorm2d(Tape& tape, const Tensor& x, const Tensor& gamma,
                   const Tensor& beta, Tensor& running_mean, Tensor& running_var,
                   bool training, double momentum = 0.1, double eps = 1e-5);

/// 2x2/stride-2 max pooling. Gradient routes to the first (row-major)
/// argmax of each window. Requires even H and W.
Tensor maxpool2d(Tape& tape, const Tensor& x);

/// Adaptive average pooling to out_size x out_size. Bin i covers rows
/// floor(i*H/out) .. ceil((i+1)*H/out)-1, likewise for columns.
Tensor adaptive_avgpool2d(Tape& tape, const Tensor& x, std::size_t out_size = 4);

/// Affine map. x: [B,N], w: [M,N], b: [M] -> [B,M].
Tensor linear(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

/// Row-wise layer normalization with scale/shift. x: [B,N].
Tensor layernorm(Tape& tape, const Tensor& x, const Tensor& gamma,
                 const Tensor& beta, double eps = 1e-5);

Tensor relu(Tape& tape, const Tensor& x);
Tensor tanh_act(Tape& tape, const Tensor& x);

/// Inverted dropout: train mode zeroes each element with probability `rate`
/// and scales survivors by 1/(1-rate); eval mode is the identity.
Tensor dropout(Tape& tape, const Tensor& x, double rate, bool training,
               Xoshiro256& rng);

/// Row-wise softmax with max subtraction. x: [B,N].
Tensor softmax(Tape& tape, const Tensor& x);

/// Mean cross entropy against label-smoothed targets: the true class gets
/// 1-eps+eps/K, every class gains eps/K. logits: [B,K], labels in [0,K).
Tensor cross_entropy_smoothed(Tape& tape, const Tensor& logits,
                              const std::vector<int>& labels,
                              double epsilon = 0.1);

/// Column-wise concatenation of [B,Na] and [B,Nb] -> [B,Na+Nb].
Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b);

/// Copying reshape (same element count, new shape).
Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape);

}  // namespace qfusion::nn
