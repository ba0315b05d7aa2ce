#include "syncmatrix/losses.hpp"

#include <cmath>
#include <numeric>

#include "syncmatrix/errors.hpp"

namespace syncmatrix {

namespace {
constexpr double kInverseDistanceEps = 1e-8;

void validate_batch(const PairBatch& batch, std::size_t min_count, const char* what) {
    if (!batch.audio.defined() || !batch.visual.defined() || batch.audio.size() == 0)
        throw ArgumentError(std::string(what) + ": empty batch");
    if (batch.audio.ndim() != 2 || batch.visual.ndim() != 2)
        throw DimensionError(std::string(what) + ": features must be N x D");
    if (batch.audio.dim(0) != batch.visual.dim(0) || batch.audio.dim(1) != batch.visual.dim(1))
        throw DimensionError(std::string(what) + ": audio/visual shapes differ");
    if (batch.audio.dim(0) < min_count)
        throw ArgumentError(std::string(what) + ": batch too small");
    if (!batch.audio.all_finite() || !batch.visual.all_finite())
        throw NumericError(std::string(what) + ": non-finite feature value");
}

std::vector<int> identity_classes(std::size_t n) {
    std::vector<int> cls(n);
    std::iota(cls.begin(), cls.end(), 0);
    return cls;
}
}  // namespace

Tensor contrastive_loss(Tape& tape, const PairBatch& batch, double margin) {
    validate_batch(batch, 1, "contrastive_loss");
    if (margin <= 0.0) throw ArgumentError("contrastive_loss: margin must be positive");
    const std::size_t n = batch.count();
    if (batch.labels.size() != n)
        throw DimensionError("contrastive_loss: one label per pair required");

    std::vector<double> y(n), y_inv(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (batch.labels[i] != 0 && batch.labels[i] != 1)
            throw ArgumentError("contrastive_loss: labels must be 0 or 1");
        y[i] = static_cast<double>(batch.labels[i]);
        y_inv[i] = 1.0 - y[i];
    }
    Tensor y_t(Shape{n}, std::move(y));
    Tensor y_inv_t(Shape{n}, std::move(y_inv));

    Tensor sq = ops::rowwise_sqdist(tape, batch.audio, batch.visual);
    Tensor d = ops::sqrt(tape, sq);
    // max(margin - d, 0)^2
    Tensor hinge = ops::relu(tape, ops::add_const(tape, ops::scale(tape, d, -1.0), margin));
    Tensor hinge_sq = ops::mul(tape, hinge, hinge);
    Tensor terms = ops::add(tape, ops::mul(tape, y_t, sq), ops::mul(tape, y_inv_t, hinge_sq));
    return ops::scale(tape, ops::sum(tape, terms), 1.0 / (2.0 * static_cast<double>(n)));
}

Tensor multiway_euclidean_loss(Tape& tape, const PairBatch& batch) {
    validate_batch(batch, 2, "multiway_euclidean_loss");
    const std::size_t n = batch.count();
    Tensor sq = ops::pairwise_sqdist(tape, batch.audio, batch.visual);
    Tensor d = ops::sqrt(tape, sq);
    Tensor inv = ops::recip(tape, ops::add_const(tape, d, kInverseDistanceEps));
    if (!inv.all_finite()) throw NumericError("multiway_euclidean_loss: non-finite distance");
    return ops::cross_entropy_mean(tape, inv, identity_classes(n));
}

Tensor angular_multiway_loss(Tape& tape, const PairBatch& batch, const AngularScale& scale) {
    validate_batch(batch, 2, "angular_multiway_loss");
    const std::size_t n = batch.count();
    Tensor a_n = ops::l2_normalize(tape, batch.audio);
    Tensor v_n = ops::l2_normalize(tape, batch.visual);
    Tensor cos = ops::matmul(tape, a_n, ops::transpose(tape, v_n));
    Tensor logits = ops::scalar_affine(tape, cos, scale.w, scale.b);
    return ops::cross_entropy_mean(tape, logits, identity_classes(n));
}

}  // namespace syncmatrix
