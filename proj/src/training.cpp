#include "syncmatrix/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "syncmatrix/errors.hpp"
#include "syncmatrix/optimizer.hpp"
#include "syncmatrix/rng.hpp"

namespace syncmatrix {

EmbedObjective embed_objective_from_string(const std::string& name) {
    if (name == "contrastive") return EmbedObjective::contrastive;
    if (name == "multiway") return EmbedObjective::multiway;
    if (name == "angular") return EmbedObjective::angular;
    throw ConfigError("unknown training objective '" + name + "'");
}

namespace {

struct AlignedSlices {
    Tensor audio;
    Tensor visual;
    std::size_t count;
};

// Features of both modalities re-aligned by the clip's planted offset, so
// row i of each side describes the same latent content.
AlignedSlices aligned_features(Tape& tape, const EncoderPair& enc, const SyntheticClip& clip) {
    Tensor a = enc.audio.forward(tape, clip.audio_raw);
    Tensor v = enc.video.forward(tape, clip.video_raw);
    const std::size_t n = a.dim(0);
    const int o = clip.truth.offset;
    const std::size_t cnt = n - static_cast<std::size_t>(std::abs(o));
    const std::size_t i0 = o < 0 ? static_cast<std::size_t>(-o) : 0;
    const std::size_t j0 = o > 0 ? static_cast<std::size_t>(o) : 0;
    return {ops::slice_rows(tape, a, i0, cnt), ops::slice_rows(tape, v, j0, cnt), cnt};
}

Tensor clip_loss(Tape& tape, const EncoderPair& enc, const SyntheticClip& clip,
                 EmbedObjective objective, const AngularScale& scale, double margin) {
    AlignedSlices s = aligned_features(tape, enc, clip);
    switch (objective) {
        case EmbedObjective::angular:
            return angular_multiway_loss(tape, {s.audio, s.visual, {}}, scale);
        case EmbedObjective::multiway:
            return multiway_euclidean_loss(tape, {s.audio, s.visual, {}});
        case EmbedObjective::contrastive: {
            // positives: aligned rows; negatives: the same rows misaligned by one
            if (s.count < 2)
                throw ArgumentError("contrastive objective needs at least 2 aligned pairs");
            Tensor neg_a = ops::slice_rows(tape, s.audio, 0, s.count - 1);
            Tensor neg_v = ops::slice_rows(tape, s.visual, 1, s.count - 1);
            PairBatch batch;
            batch.audio = ops::concat_rows(tape, s.audio, neg_a);
            batch.visual = ops::concat_rows(tape, s.visual, neg_v);
            batch.labels.assign(s.count, 1);
            batch.labels.insert(batch.labels.end(), s.count - 1, 0);
            return contrastive_loss(tape, batch, margin);
        }
    }
    throw ArgumentError("unknown objective");
}

}  // namespace

EmbedTrainResult train_embedding(const std::vector<SyntheticClip>& clips, EncoderPair& enc,
                                 EmbedObjective objective, const TrainHyper& hyper,
                                 double margin) {
    if (clips.empty()) throw ArgumentError("train_embedding: empty dataset");

    EmbedTrainResult result;
    result.scale = AngularScale::init();

    std::vector<Tensor> params = enc.parameters();
    for (Tensor& p : params) p.set_requires_grad(true);
    if (objective == EmbedObjective::angular) {
        params.push_back(result.scale.w);
        params.push_back(result.scale.b);
    }
    Adam opt(params, AdamConfig{.lr = hyper.lr, .weight_decay = hyper.weight_decay});

    std::vector<std::size_t> idx(clips.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng split_rng = make_rng(derive_seed(hyper.seed, "embed.split"));
    std::shuffle(idx.begin(), idx.end(), split_rng);
    std::size_t val_count = static_cast<std::size_t>(
        std::llround(hyper.val_fraction * static_cast<double>(clips.size())));
    val_count = std::min(val_count, clips.size() > 1 ? clips.size() - 1 : 0);
    std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + static_cast<long>(val_count));
    std::vector<std::size_t> order(idx.begin() + static_cast<long>(val_count), idx.end());

    EncoderPair best_enc = enc.clone();
    AngularScale best_scale{result.scale.w.clone(), result.scale.b.clone()};
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t stall = 0;

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        Rng rng = make_rng(derive_seed(hyper.seed, "embed.epoch", epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += hyper.batch) {
            const std::size_t end = std::min(begin + hyper.batch, order.size());
            Tape tape;
            Tensor total;
            for (std::size_t i = begin; i < end; ++i) {
                Tensor l = clip_loss(tape, enc, clips[order[i]], objective, result.scale, margin);
                total = total.defined() ? ops::add(tape, total, l) : l;
            }
            Tensor loss = ops::scale(tape, total, 1.0 / static_cast<double>(end - begin));
            if (!std::isfinite(loss.item()))
                throw TrainingError("train_embedding: loss diverged");
            tape.backward(loss);
            opt.step();
            opt.zero_grad();
            // the angular scale stays positive
            result.scale.w.data()[0] = std::max(result.scale.w.at(0), 1e-4);
            loss_sum += loss.item();
            ++batches;
        }

        double val_loss = 0;
        if (!val_idx.empty()) {
            Tape tape(false);
            for (std::size_t i : val_idx)
                val_loss += clip_loss(tape, enc, clips[i], objective, result.scale, margin).item();
            val_loss /= static_cast<double>(val_idx.size());
        }
        result.curve.push_back(
            {epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0, -val_loss});

        if (!val_idx.empty()) {
            if (val_loss < best_val - 1e-12) {
                best_val = val_loss;
                best_enc = enc.clone();
                best_scale = {result.scale.w.clone(), result.scale.b.clone()};
                stall = 0;
            } else if (++stall >= hyper.patience) {
                break;
            }
        }
    }
    if (std::isfinite(best_val)) {
        enc = best_enc;
        result.scale = best_scale;
    }
    return result;
}

}  // namespace syncmatrix
