#include "syncmatrix/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "syncmatrix/errors.hpp"
#include "syncmatrix/optimizer.hpp"
#include "syncmatrix/rng.hpp"

namespace syncmatrix {

namespace {

// Candidate preference for ties: small |o| first, -k before +k.
constexpr std::array<int, kNumOffsetClasses> kTieOrder = {0, -1, 1, -2, 2, -3, 3, -4, 4, -5, 5};

OffsetLabel pick_best(const std::array<double, kNumOffsetClasses>& scores_by_class,
                      bool minimize) {
    int best = kTieOrder[0];
    double best_score = scores_by_class[OffsetLabel(best).class_index()];
    for (std::size_t i = 1; i < kTieOrder.size(); ++i) {
        const double s = scores_by_class[OffsetLabel(kTieOrder[i]).class_index()];
        if (minimize ? s < best_score : s > best_score) {
            best = kTieOrder[i];
            best_score = s;
        }
    }
    return OffsetLabel(best);
}

Tensor gaussian_kernel(Shape shape, std::size_t fan_in, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
    return t;
}

}  // namespace

Prediction sliding_window_offset(const FeatureStream& audio, const FeatureStream& visual) {
    const Tensor& a = audio.features;
    const Tensor& v = visual.features;
    if (!a.defined() || !v.defined() || a.size() == 0 || v.size() == 0)
        throw ArgumentError("sliding_window_offset: empty stream");
    if (a.ndim() != 2 || v.ndim() != 2) throw DimensionError("sliding_window_offset: N x D expected");
    if (a.dim(0) != v.dim(0) || a.dim(1) != v.dim(1))
        throw DimensionError("sliding_window_offset: stream shapes differ");
    const std::size_t n = a.dim(0), d = a.dim(1);

    std::vector<double> norm_a(n), norm_v(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sa = 0, sv = 0;
        for (std::size_t k = 0; k < d; ++k) {
            sa += a.at(i * d + k) * a.at(i * d + k);
            sv += v.at(i * d + k) * v.at(i * d + k);
        }
        if (sa == 0.0 || sv == 0.0)
            throw DegenerateInputError("sliding_window_offset: zero-norm feature row");
        norm_a[i] = std::sqrt(sa);
        norm_v[i] = std::sqrt(sv);
    }

    Prediction pred;
    for (int o = kMinOffset; o <= kMaxOffset; ++o) {
        double total = 0;
        for (std::size_t t = 0; t < n; ++t) {
            const long ai = static_cast<long>(t) - o;
            if (ai < 0 || ai >= static_cast<long>(n)) {
                total += 1.0;  // zero-padded audio: cosine defined as 0
                continue;
            }
            double dot = 0;
            for (std::size_t k = 0; k < d; ++k)
                dot += a.at(static_cast<std::size_t>(ai) * d + k) * v.at(t * d + k);
            total += 1.0 - dot / (norm_a[static_cast<std::size_t>(ai)] * norm_v[t]);
        }
        pred.scores[OffsetLabel(o).class_index()] = total / static_cast<double>(n);
    }
    pred.offset = pick_best(pred.scores, /*minimize=*/true);
    return pred;
}

Prediction diag_avg_offset(const SimilarityMatrix& m) {
    if (m.n <= static_cast<std::size_t>(kMaxOffset))
        throw ArgumentError("diag_avg_offset: matrix too small for the offset range");
    Prediction pred;
    for (int o = kMinOffset; o <= kMaxOffset; ++o)
        pred.scores[OffsetLabel(o).class_index()] = band_mean(m, OffsetLabel(o));
    pred.offset = pick_best(pred.scores, /*minimize=*/false);
    return pred;
}

SyncClsNet SyncClsNet::random_init(std::size_t n, std::uint64_t seed) {
    if (n <= static_cast<std::size_t>(kMaxOffset))
        throw ArgumentError("SyncClsNet: matrix size must exceed the offset range");
    SyncClsNet net;
    net.n_ = n;
    Rng rng = make_rng(derive_seed(seed, "cls.init"));
    net.conv1_ = gaussian_kernel(Shape{256, 1, 3, 3}, 9, rng);
    net.conv2_ = gaussian_kernel(Shape{256, 256, n, n}, 256 * n * n, rng);
    net.conv3_ = gaussian_kernel(Shape{128, 256, 1, 1}, 256, rng);
    net.conv4_ = gaussian_kernel(Shape{11, 128, 1, 1}, 128, rng);
    net.bias4_ = Tensor(Shape{11});
    net.gamma1_ = Tensor(Shape{256}, 1.0);
    net.beta1_ = Tensor(Shape{256});
    net.gamma2_ = Tensor(Shape{256}, 1.0);
    net.beta2_ = Tensor(Shape{256});
    net.gamma3_ = Tensor(Shape{128}, 1.0);
    net.beta3_ = Tensor(Shape{128});
    net.bn1_ = BatchNormState(256);
    net.bn2_ = BatchNormState(256);
    net.bn3_ = BatchNormState(128);
    for (Tensor& p : net.parameters()) p.set_requires_grad(true);
    return net;
}

Tensor SyncClsNet::forward(Tape& tape, const Tensor& batch, bool training) const {
    if (batch.ndim() != 4 || batch.dim(1) != 1 || batch.dim(2) != n_ || batch.dim(3) != n_)
        throw DimensionError("SyncClsNet: input must be B x 1 x N x N with configured N");
    Tensor h = ops::conv2d(tape, batch, conv1_, 1);
    h = ops::relu(tape, ops::batchnorm(tape, h, gamma1_, beta1_, bn1_, training));
    h = ops::conv2d(tape, h, conv2_, 0);
    h = ops::relu(tape, ops::batchnorm(tape, h, gamma2_, beta2_, bn2_, training));
    h = ops::conv2d(tape, h, conv3_, 0);
    h = ops::relu(tape, ops::batchnorm(tape, h, gamma3_, beta3_, bn3_, training));
    h = ops::channel_bias_add(tape, ops::conv2d(tape, h, conv4_, 0), bias4_);
    return ops::reshape(tape, h, Shape{batch.dim(0), static_cast<std::size_t>(kNumOffsetClasses)});
}

Prediction SyncClsNet::predict(const SimilarityMatrix& m) const {
    if (m.n != n_) throw DimensionError("SyncClsNet: matrix size does not match the network");
    Tape tape(false);
    Tensor in(Shape{1, 1, n_, n_}, m.values);
    Tensor logits = forward(tape, in, false);
    Tensor probs = ops::softmax(tape, ops::reshape(tape, logits, Shape{kNumOffsetClasses}));
    Prediction pred;
    for (int c = 0; c < kNumOffsetClasses; ++c) pred.scores[c] = probs.at(c);
    pred.offset = pick_best(pred.scores, /*minimize=*/false);
    return pred;
}

std::vector<OffsetLabel> SyncClsNet::predict_batch(const std::vector<SimilarityMatrix>& ms) const {
    constexpr std::size_t kChunk = 64;
    std::vector<OffsetLabel> out;
    out.reserve(ms.size());
    for (std::size_t begin = 0; begin < ms.size(); begin += kChunk) {
        const std::size_t end = std::min(begin + kChunk, ms.size());
        Tensor in(Shape{end - begin, 1, n_, n_});
        for (std::size_t i = begin; i < end; ++i) {
            if (ms[i].n != n_)
                throw DimensionError("SyncClsNet: matrix size does not match the network");
            std::copy(ms[i].values.begin(), ms[i].values.end(),
                      in.data() + (i - begin) * n_ * n_);
        }
        Tape tape(false);
        Tensor logits = forward(tape, in, false);
        for (std::size_t i = begin; i < end; ++i) {
            std::array<double, kNumOffsetClasses> row{};
            for (int c = 0; c < kNumOffsetClasses; ++c)
                row[c] = logits.at((i - begin) * kNumOffsetClasses + c);
            out.push_back(pick_best(row, /*minimize=*/false));
        }
    }
    return out;
}

std::vector<double> SyncClsNet::saliency(const SimilarityMatrix& m, int klass) const {
    if (klass < 0 || klass >= kNumOffsetClasses)
        throw ArgumentError("saliency: class index outside [0, 10]");
    if (m.n != n_) throw DimensionError("saliency: matrix size does not match the network");
    Tape tape;
    Tensor in(Shape{1, 1, n_, n_}, m.values, /*requires_grad=*/true);
    Tensor logits = forward(tape, in, false);
    Tensor target = ops::select(tape, logits, static_cast<std::size_t>(klass));
    tape.backward(target);
    const double* g = in.grad();
    return g ? std::vector<double>(g, g + n_ * n_) : std::vector<double>(n_ * n_, 0.0);
}

std::vector<Tensor> SyncClsNet::parameters() const {
    return {conv1_, gamma1_, beta1_, conv2_, gamma2_, beta2_,
            conv3_, gamma3_, beta3_, conv4_, bias4_};
}

void SyncClsNet::set_parameters(const std::vector<Tensor>& ps) {
    if (ps.size() != 11) throw ArgumentError("SyncClsNet: expected 11 parameter tensors");
    Tensor* slots[11] = {&conv1_, &gamma1_, &beta1_, &conv2_, &gamma2_, &beta2_,
                         &conv3_, &gamma3_, &beta3_, &conv4_, &bias4_};
    for (std::size_t i = 0; i < 11; ++i) {
        if (ps[i].shape() != slots[i]->shape())
            throw DimensionError("SyncClsNet: parameter shape mismatch");
        *slots[i] = ps[i];
    }
}

SyncClsNet SyncClsNet::clone() const {
    SyncClsNet c;
    c.n_ = n_;
    auto cp = [](const Tensor& t) {
        Tensor out = t.clone();
        out.set_requires_grad(t.requires_grad());
        return out;
    };
    c.conv1_ = cp(conv1_);
    c.conv2_ = cp(conv2_);
    c.conv3_ = cp(conv3_);
    c.conv4_ = cp(conv4_);
    c.bias4_ = cp(bias4_);
    c.gamma1_ = cp(gamma1_);
    c.beta1_ = cp(beta1_);
    c.gamma2_ = cp(gamma2_);
    c.beta2_ = cp(beta2_);
    c.gamma3_ = cp(gamma3_);
    c.beta3_ = cp(beta3_);
    c.bn1_ = bn1_;
    c.bn2_ = bn2_;
    c.bn3_ = bn3_;
    return c;
}

void SyncClsNet::save_into(Checkpoint& ckpt) const {
    ckpt.put_vector("cls.meta", {static_cast<double>(n_)});
    ckpt.put("cls.conv1.weight", conv1_);
    ckpt.put("cls.conv2.weight", conv2_);
    ckpt.put("cls.conv3.weight", conv3_);
    ckpt.put("cls.conv4.weight", conv4_);
    ckpt.put("cls.conv4.bias", bias4_);
    const Tensor* gammas[3] = {&gamma1_, &gamma2_, &gamma3_};
    const Tensor* betas[3] = {&beta1_, &beta2_, &beta3_};
    const BatchNormState* states[3] = {&bn1_, &bn2_, &bn3_};
    for (int i = 0; i < 3; ++i) {
        const std::string p = "cls.bn" + std::to_string(i + 1);
        ckpt.put(p + ".gamma", *gammas[i]);
        ckpt.put(p + ".beta", *betas[i]);
        ckpt.put_vector(p + ".running_mean", states[i]->running_mean);
        ckpt.put_vector(p + ".running_var", states[i]->running_var);
    }
}

SyncClsNet SyncClsNet::load_from(const Checkpoint& ckpt) {
    SyncClsNet net;
    net.n_ = static_cast<std::size_t>(ckpt.get_vector("cls.meta").at(0));
    net.conv1_ = ckpt.get("cls.conv1.weight").clone();
    net.conv2_ = ckpt.get("cls.conv2.weight").clone();
    net.conv3_ = ckpt.get("cls.conv3.weight").clone();
    net.conv4_ = ckpt.get("cls.conv4.weight").clone();
    net.bias4_ = ckpt.get("cls.conv4.bias").clone();
    Tensor* gammas[3] = {&net.gamma1_, &net.gamma2_, &net.gamma3_};
    Tensor* betas[3] = {&net.beta1_, &net.beta2_, &net.beta3_};
    BatchNormState* states[3] = {&net.bn1_, &net.bn2_, &net.bn3_};
    for (int i = 0; i < 3; ++i) {
        const std::string p = "cls.bn" + std::to_string(i + 1);
        *gammas[i] = ckpt.get(p + ".gamma").clone();
        *betas[i] = ckpt.get(p + ".beta").clone();
        states[i]->running_mean = ckpt.get_vector(p + ".running_mean");
        states[i]->running_var = ckpt.get_vector(p + ".running_var");
    }
    for (Tensor& p : net.parameters()) p.set_requires_grad(true);
    return net;
}

void SyncClsNet::save(const std::string& path) const {
    Checkpoint ckpt;
    save_into(ckpt);
    ckpt.save(path);
}

SyncClsNet SyncClsNet::load(const std::string& path) {
    return load_from(Checkpoint::load(path));
}

SimilarityMatrix clip_similarity(const EncoderPair& enc, const SyntheticClip& clip) {
    return build_similarity_matrix(enc.audio.encode(clip.audio_raw, Modality::audio),
                                   enc.video.encode(clip.video_raw, Modality::visual));
}

namespace {

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

SplitIndices split_train_val(std::size_t count, double val_fraction, std::uint64_t seed) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(derive_seed(seed, "split"));
    std::shuffle(idx.begin(), idx.end(), rng);
    std::size_t val_count = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(count)));
    val_count = std::min(val_count, count > 1 ? count - 1 : 0);
    SplitIndices out;
    out.val.assign(idx.begin(), idx.begin() + static_cast<long>(val_count));
    out.train.assign(idx.begin() + static_cast<long>(val_count), idx.end());
    return out;
}

double batch_accuracy(const std::vector<OffsetLabel>& preds,
                      const std::vector<OffsetLabel>& truths) {
    if (preds.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == truths[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

}  // namespace

ClsTrainResult train_synccls(const std::vector<SimilarityMatrix>& matrices,
                             const std::vector<OffsetLabel>& labels, std::size_t n,
                             const TrainHyper& hyper) {
    if (matrices.empty()) throw ArgumentError("train_synccls: empty dataset");
    if (matrices.size() != labels.size())
        throw DimensionError("train_synccls: one label per matrix required");
    for (const auto& m : matrices)
        if (m.n != n) throw DimensionError("train_synccls: matrix size mismatch");

    ClsTrainResult result;
    result.net = SyncClsNet::random_init(n, derive_seed(hyper.seed, "cls"));
    SyncClsNet& net = result.net;
    Adam opt(net.parameters(), AdamConfig{.lr = hyper.lr, .weight_decay = hyper.weight_decay});

    const SplitIndices split = split_train_val(matrices.size(), hyper.val_fraction, hyper.seed);
    std::vector<SimilarityMatrix> val_ms;
    std::vector<OffsetLabel> val_labels;
    for (std::size_t i : split.val) {
        val_ms.push_back(matrices[i]);
        val_labels.push_back(labels[i]);
    }

    SyncClsNet best = net.clone();
    double best_val = -1.0;
    std::size_t stall = 0;

    std::vector<std::size_t> order = split.train;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        Rng rng = make_rng(derive_seed(hyper.seed, "epoch", epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += hyper.batch) {
            const std::size_t end = std::min(begin + hyper.batch, order.size());
            if (end - begin < 2) continue;  // training-mode batchnorm needs >= 2
            Tensor in(Shape{end - begin, 1, n, n});
            std::vector<int> classes(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                const std::size_t k = order[i];
                std::copy(matrices[k].values.begin(), matrices[k].values.end(),
                          in.data() + (i - begin) * n * n);
                classes[i - begin] = labels[k].class_index();
            }
            Tape tape;
            Tensor logits = net.forward(tape, in, true);
            Tensor loss = ops::cross_entropy_mean(tape, logits, classes);
            if (!std::isfinite(loss.item()))
                throw TrainingError("train_synccls: loss diverged");
            tape.backward(loss);
            opt.step();
            opt.zero_grad();
            loss_sum += loss.item();
            ++batches;
        }

        const double val_acc =
            val_ms.empty() ? 0.0 : batch_accuracy(net.predict_batch(val_ms), val_labels);
        result.curve.push_back({epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0,
                                val_acc});

        if (!val_ms.empty()) {
            if (val_acc > best_val + 1e-12) {
                best_val = val_acc;
                best = net.clone();
                stall = 0;
            } else if (++stall >= hyper.patience) {
                break;
            }
        }
    }
    if (best_val >= 0.0) result.net = best;
    return result;
}

std::vector<TrainCurvePoint> train_synce2e(const std::vector<SyntheticClip>& clips,
                                           EncoderPair& enc, SyncClsNet& net,
                                           const TrainHyper& hyper) {
    if (clips.empty()) throw ArgumentError("train_synce2e: empty dataset");
    const std::size_t n = net.matrix_size();
    const std::size_t expected = clips.front().audio_raw.dim(0) - enc.audio.context() + 1;
    if (expected != n)
        throw DimensionError("train_synce2e: clip length does not match the network's N");

    std::vector<Tensor> params = enc.parameters();
    for (Tensor& p : net.parameters()) params.push_back(p);
    for (Tensor& p : params) p.set_requires_grad(true);
    Adam opt(std::move(params), AdamConfig{.lr = hyper.lr, .weight_decay = hyper.weight_decay});

    const SplitIndices split = split_train_val(clips.size(), hyper.val_fraction, hyper.seed);

    std::vector<TrainCurvePoint> curve;
    EncoderPair best_enc = enc.clone();
    SyncClsNet best_net = net.clone();
    double best_val = -1.0;
    std::size_t stall = 0;

    std::vector<std::size_t> order = split.train;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        Rng rng = make_rng(derive_seed(hyper.seed, "e2e.epoch", epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0;
        std::size_t batches = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += hyper.batch) {
            const std::size_t end = std::min(begin + hyper.batch, order.size());
            if (end - begin < 2) continue;
            Tape tape;
            std::vector<Tensor> sims;
            std::vector<int> classes;
            sims.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                const SyntheticClip& clip = clips[order[i]];
                Tensor a = enc.audio.forward(tape, clip.audio_raw);
                Tensor v = enc.video.forward(tape, clip.video_raw);
                sims.push_back(similarity_matrix_op(tape, a, v));
                classes.push_back(clip.truth.class_index());
            }
            Tensor in = ops::stack_as_batch(tape, sims);
            Tensor logits = net.forward(tape, in, true);
            Tensor loss = ops::cross_entropy_mean(tape, logits, classes);
            if (!std::isfinite(loss.item()))
                throw TrainingError("train_synce2e: loss diverged");
            tape.backward(loss);
            opt.step();
            opt.zero_grad();
            loss_sum += loss.item();
            ++batches;
        }

        double val_acc = 0.0;
        if (!split.val.empty()) {
            std::vector<SimilarityMatrix> val_ms;
            std::vector<OffsetLabel> val_labels;
            for (std::size_t i : split.val) {
                val_ms.push_back(clip_similarity(enc, clips[i]));
                val_labels.push_back(clips[i].truth);
            }
            val_acc = batch_accuracy(net.predict_batch(val_ms), val_labels);
        }
        curve.push_back({epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0, val_acc});

        if (!split.val.empty()) {
            if (val_acc > best_val + 1e-12) {
                best_val = val_acc;
                best_enc = enc.clone();
                best_net = net.clone();
                stall = 0;
            } else if (++stall >= hyper.patience) {
                break;
            }
        }
    }
    if (best_val >= 0.0) {
        enc = best_enc;
        net = best_net;
    }
    return curve;
}

}  // namespace syncmatrix
