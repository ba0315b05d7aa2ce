#pragma once

#include <vector>

#include "syncmatrix/ops.hpp"
#include "syncmatrix/tensor.hpp"

namespace syncmatrix {

/// A batch of audio/visual embedding pairs, row i of each matrix belonging to
/// the same nominal timestep. `labels` is only consulted by the contrastive
/// loss: 1 marks a matching pair, 0 a non-matching one.
struct PairBatch {
    Tensor audio;   // N x D
    Tensor visual;  // N x D
    std::vector<int> labels;

    std::size_t count() const { return audio.dim(0); }
};

/// Learnable dynamic-range parameters of the angular matching loss. w stays
/// positive; the optimizer clamps it after every step.
struct AngularScale {
    Tensor w;
    Tensor b;

    static AngularScale init(double w0 = 10.0, double b0 = -5.0) {
        return {Tensor::scalar(w0, true), Tensor::scalar(b0, true)};
    }
};

/// Siamese contrastive loss over matched/non-matched pairs:
/// (1/2N) * sum_i [ y_i * d_i^2 + (1 - y_i) * max(margin - d_i, 0)^2 ]
/// with d_i the Euclidean distance between audio_i and visual_i.
Tensor contrastive_loss(Tape& tape, const PairBatch& batch, double margin = 1.0);

/// Multi-way matching loss on inverse Euclidean distances: each audio feature
/// is classified against all visual features of the batch via a row softmax,
/// with the matching column as the target. Inverse distance is 1/(d + 1e-8).
Tensor multiway_euclidean_loss(Tape& tape, const PairBatch& batch);

/// Angular variant of the multi-way loss: logits are w * cos(a_i, v_j) + b on
/// unit-normalized features. Gradients reach the features and both scalars.
Tensor angular_multiway_loss(Tape& tape, const PairBatch& batch, const AngularScale& scale);

}  // namespace syncmatrix
