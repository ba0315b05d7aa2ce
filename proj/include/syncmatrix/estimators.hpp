#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "syncmatrix/checkpoint.hpp"
#include "syncmatrix/encoders.hpp"
#include "syncmatrix/ops.hpp"
#include "syncmatrix/similarity.hpp"
#include "syncmatrix/synthdata.hpp"
#include "syncmatrix/tensor.hpp"

namespace syncmatrix {

/// Estimator output: the chosen offset plus the 11 per-candidate scores,
/// indexed by class (0 = offset -5). Scores are mean distances for the
/// sliding-window baseline (argmin), band means for the diagonal-average
/// heuristic (argmax), and softmax probabilities for the classifier (argmax).
struct Prediction {
    OffsetLabel offset;
    std::array<double, kNumOffsetClasses> scores{};
};

/// Sliding-window baseline: score(o) is the mean over t of
/// 1 - cos(a_{t-o}, v_t), with audio outside the segment taken as the zero
/// vector (cosine with zero defined as 0, i.e. distance 1). The smallest mean
/// distance wins; ties prefer small |o|, then the negative sign.
Prediction sliding_window_offset(const FeatureStream& audio, const FeatureStream& visual);

/// Diagonal-average heuristic: the offset band with the largest mean
/// similarity wins, same tie-breaking. Requires N > 5.
Prediction diag_avg_offset(const SimilarityMatrix& m);

struct TrainHyper {
    double lr = 1e-3;
    double weight_decay = 0.0;
    std::size_t batch = 32;
    std::size_t epochs = 20;
    std::size_t patience = 3;  // early stop after this many non-improving epochs
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct TrainCurvePoint {
    std::size_t epoch;
    double train_loss;
    double val_metric;  // validation accuracy for classifiers, -loss for embeddings
};

/// Pattern classifier over N x N similarity matrices. Four convolutions: a
/// 3x3 local stage (padding 1), an N x N global stage that collapses the
/// matrix to 1x1, then two 1x1 stages down to 11 logits. Batchnorm and relu
/// follow every convolution except the last; there is no stride or pooling
/// anywhere, since the pattern's location is the signal.
class SyncClsNet {
public:
    SyncClsNet() = default;

    static SyncClsNet random_init(std::size_t n, std::uint64_t seed);

    std::size_t matrix_size() const { return n_; }

    /// B x 1 x N x N batch to B x 11 logits. Training mode folds batch
    /// statistics into the batchnorm running state.
    Tensor forward(Tape& tape, const Tensor& batch, bool training) const;

    Prediction predict(const SimilarityMatrix& m) const;
    std::vector<OffsetLabel> predict_batch(const std::vector<SimilarityMatrix>& ms) const;

    /// d(logit[klass]) / d(matrix), entry-wise, as an n*n row-major map.
    std::vector<double> saliency(const SimilarityMatrix& m, int klass) const;

    std::vector<Tensor> parameters() const;
    /// Replaces the parameter tensors (same order as parameters()). The new
    /// handles become the live weights, so external optimizers or gradient
    /// probes can share storage with the network.
    void set_parameters(const std::vector<Tensor>& ps);
    SyncClsNet clone() const;

    void save_into(Checkpoint& ckpt) const;
    static SyncClsNet load_from(const Checkpoint& ckpt);
    void save(const std::string& path) const;
    static SyncClsNet load(const std::string& path);

private:
    std::size_t n_ = 0;
    Tensor conv1_, conv2_, conv3_, conv4_, bias4_;
    Tensor gamma1_, beta1_, gamma2_, beta2_, gamma3_, beta3_;
    mutable BatchNormState bn1_, bn2_, bn3_;
};

struct ClsTrainResult {
    SyncClsNet net;
    std::vector<TrainCurvePoint> curve;
};

/// Trains the classifier on pre-extracted similarity matrices. Early-stops
/// when validation accuracy stops improving and returns the best snapshot.
ClsTrainResult train_synccls(const std::vector<SimilarityMatrix>& matrices,
                             const std::vector<OffsetLabel>& labels, std::size_t n,
                             const TrainHyper& hyper);

/// Joint fine-tuning of both encoders and the classifier under the same
/// cross-entropy loss; gradients flow through the similarity matrix into the
/// feature extractors. Mutates enc and net in place.
std::vector<TrainCurvePoint> train_synce2e(const std::vector<SyntheticClip>& clips,
                                           EncoderPair& enc, SyncClsNet& net,
                                           const TrainHyper& hyper);

/// Similarity matrix of one clip under the given encoders.
SimilarityMatrix clip_similarity(const EncoderPair& enc, const SyntheticClip& clip);

}  // namespace syncmatrix
