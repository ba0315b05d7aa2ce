#pragma once

#include <cstdint>
#include <vector>

#include "syncmatrix/tensor.hpp"

namespace syncmatrix {

/// Per-channel normalization statistics carried across batches.
/// Training-mode batchnorm updates the running stats in place; eval mode
/// reads them and leaves them untouched.
struct BatchNormState {
    std::vector<double> running_mean;
    std::vector<double> running_var;
    double eps = 1e-5;
    double momentum = 0.1;

    explicit BatchNormState(std::size_t channels = 0)
        : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

namespace ops {

// ---- elementwise ----
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& x, double s);
Tensor add_const(Tape& tape, const Tensor& x, double c);
Tensor recip(Tape& tape, const Tensor& x);
Tensor sqrt(Tape& tape, const Tensor& x);
Tensor relu(Tape& tape, const Tensor& x);
/// y = w*x + b elementwise, with scalar tensors w and b.
Tensor scalar_affine(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b);

// ---- reductions / indexing ----
Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);
Tensor select(Tape& tape, const Tensor& x, std::size_t flat_index);
Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape);

// ---- linear algebra ----
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor transpose(Tape& tape, const Tensor& x);
/// Unit-normalizes a 1-D vector, or every row of a 2-D matrix.
Tensor l2_normalize(Tape& tape, const Tensor& x);
/// Adds a length-D bias to every row of an N x D matrix.
Tensor row_bias_add(Tape& tape, const Tensor& x, const Tensor& bias);

// ---- distances ----
/// out[i] = ||a_i - b_i||^2 for N x D inputs.
Tensor rowwise_sqdist(Tape& tape, const Tensor& a, const Tensor& b);
/// out[i][j] = ||a_i - b_j||^2 for N x D inputs.
Tensor pairwise_sqdist(Tape& tape, const Tensor& a, const Tensor& b);

// ---- neural-net layers ----
/// 2-D cross-correlation, stride 1. x is C_in x H x W or B x C_in x H x W,
/// kernel is C_out x C_in x kh x kw; output spatial dims are
/// H + 2*padding - kh + 1 by W + 2*padding - kw + 1.
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& kernel, int padding);
/// Adds a per-channel bias to a B x C x H x W tensor.
Tensor channel_bias_add(Tape& tape, const Tensor& x, const Tensor& bias);
/// Per-channel batch normalization over B x C x H x W. Training mode uses
/// batch statistics (and requires B >= 2); eval mode uses the running stats.
Tensor batchnorm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BatchNormState& state, bool training);
Tensor softmax(Tape& tape, const Tensor& logits);
/// -log softmax(logits)[klass] for a length-K logit vector.
Tensor cross_entropy(Tape& tape, const Tensor& logits, int klass);
/// Mean cross-entropy of each row of a B x K logit matrix against its class.
Tensor cross_entropy_mean(Tape& tape, const Tensor& logits, const std::vector<int>& classes);

// ---- sequence helpers ----
/// Rows [start, start + count) of a 2-D matrix.
Tensor slice_rows(Tape& tape, const Tensor& x, std::size_t start, std::size_t count);
/// Vertical concatenation of two matrices with equal column counts.
Tensor concat_rows(Tape& tape, const Tensor& a, const Tensor& b);
/// Slides a length-`context` window over the rows of a T x D matrix:
/// output row t is rows [t, t+context) flattened, for t in [0, T-context].
Tensor unfold_windows(Tape& tape, const Tensor& x, std::size_t context);
/// Stacks B equally-shaped H x W matrices into a B x 1 x H x W batch.
Tensor stack_as_batch(Tape& tape, const std::vector<Tensor>& mats);

}  // namespace ops
}  // namespace syncmatrix
