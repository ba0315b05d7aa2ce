#include "syncmatrix/encoders.hpp"

#include <cmath>

#include "syncmatrix/errors.hpp"
#include "syncmatrix/ops.hpp"
#include "syncmatrix/rng.hpp"

namespace syncmatrix {

void EncoderConfig::validate() const {
    if (context < 1) throw ArgumentError("encoder config: context must be >= 1");
    if (embed_dim < 2) throw ArgumentError("encoder config: embed_dim must be >= 2");
    if (raw_dim_audio == 0 || raw_dim_video == 0)
        throw ArgumentError("encoder config: raw dimensions must be positive");
}

namespace {
Tensor gaussian_tensor(Shape shape, double stddev, Rng& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, stddev);
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
    return t;
}
}  // namespace

Encoder Encoder::random_init(std::size_t context, std::size_t raw_dim, std::size_t embed_dim,
                             const std::vector<std::size_t>& hidden, std::uint64_t seed) {
    Encoder enc;
    enc.context_ = context;
    enc.raw_dim_ = raw_dim;
    enc.embed_dim_ = embed_dim;
    Rng rng = make_rng(seed);
    std::size_t in = context * raw_dim;
    std::vector<std::size_t> widths = hidden;
    widths.push_back(embed_dim);
    for (std::size_t out : widths) {
        // fan-in scaled Gaussian
        enc.weights_.push_back(
            gaussian_tensor(Shape{in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng));
        enc.biases_.push_back(Tensor(Shape{out}));
        in = out;
    }
    enc.set_trainable(true);
    return enc;
}

Encoder Encoder::linear(std::size_t context, std::size_t raw_dim, std::size_t embed_dim,
                        std::vector<double> weight) {
    if (weight.size() != context * raw_dim * embed_dim)
        throw DimensionError("linear encoder: weight size mismatch");
    Encoder enc;
    enc.context_ = context;
    enc.raw_dim_ = raw_dim;
    enc.embed_dim_ = embed_dim;
    enc.weights_.push_back(Tensor(Shape{context * raw_dim, embed_dim}, std::move(weight)));
    enc.biases_.push_back(Tensor(Shape{embed_dim}));
    return enc;
}

Tensor Encoder::forward(Tape& tape, const Tensor& raw) const {
    if (raw.ndim() != 2 || raw.dim(1) != raw_dim_)
        throw DimensionError("encoder: raw input must be T x raw_dim");
    if (raw.dim(0) < context_)
        throw ArgumentError("encoder: insufficient frames for context window");
    Tensor h = ops::unfold_windows(tape, raw, context_);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        h = ops::row_bias_add(tape, ops::matmul(tape, h, weights_[l]), biases_[l]);
        if (l + 1 < weights_.size()) h = ops::relu(tape, h);
    }
    return h;
}

FeatureStream Encoder::encode(const Tensor& raw, Modality modality) const {
    Tape tape(false);
    return FeatureStream{modality, forward(tape, raw)};
}

std::vector<Tensor> Encoder::parameters() const {
    std::vector<Tensor> ps;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        ps.push_back(weights_[l]);
        ps.push_back(biases_[l]);
    }
    return ps;
}

void Encoder::set_trainable(bool trainable) {
    for (auto& w : weights_) w.set_requires_grad(trainable);
    for (auto& b : biases_) b.set_requires_grad(trainable);
}

Encoder Encoder::clone() const {
    Encoder enc;
    enc.context_ = context_;
    enc.raw_dim_ = raw_dim_;
    enc.embed_dim_ = embed_dim_;
    for (const auto& w : weights_) {
        Tensor c = w.clone();
        c.set_requires_grad(w.requires_grad());
        enc.weights_.push_back(c);
    }
    for (const auto& b : biases_) {
        Tensor c = b.clone();
        c.set_requires_grad(b.requires_grad());
        enc.biases_.push_back(c);
    }
    return enc;
}

void Encoder::save_into(Checkpoint& ckpt, const std::string& prefix) const {
    ckpt.put_vector(prefix + ".meta", {static_cast<double>(context_)});
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        ckpt.put(prefix + ".w" + std::to_string(l), weights_[l]);
        ckpt.put(prefix + ".b" + std::to_string(l), biases_[l]);
    }
}

Encoder Encoder::load_from(const Checkpoint& ckpt, const std::string& prefix) {
    Encoder enc;
    const auto meta = ckpt.get_vector(prefix + ".meta");
    enc.context_ = static_cast<std::size_t>(meta.at(0));
    for (std::size_t l = 0;; ++l) {
        const std::string wname = prefix + ".w" + std::to_string(l);
        if (!ckpt.contains(wname)) break;
        enc.weights_.push_back(ckpt.get(wname).clone());
        enc.biases_.push_back(ckpt.get(prefix + ".b" + std::to_string(l)).clone());
    }
    if (enc.weights_.empty()) throw IoError("encoder checkpoint: no layers under " + prefix);
    enc.raw_dim_ = enc.weights_.front().dim(0) / enc.context_;
    enc.embed_dim_ = enc.weights_.back().dim(1);
    return enc;
}

EncoderPair EncoderPair::random_init(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    return {Encoder::random_init(cfg.context, cfg.raw_dim_audio, cfg.embed_dim, cfg.hidden,
                                 derive_seed(seed, "enc.audio")),
            Encoder::random_init(cfg.context, cfg.raw_dim_video, cfg.embed_dim, cfg.hidden,
                                 derive_seed(seed, "enc.video"))};
}

std::vector<Tensor> EncoderPair::parameters() const {
    std::vector<Tensor> ps = audio.parameters();
    for (auto& p : video.parameters()) ps.push_back(p);
    return ps;
}

void EncoderPair::save_into(Checkpoint& ckpt) const {
    audio.save_into(ckpt, "enc.audio");
    video.save_into(ckpt, "enc.video");
}

EncoderPair EncoderPair::load_from(const Checkpoint& ckpt) {
    return {Encoder::load_from(ckpt, "enc.audio"), Encoder::load_from(ckpt, "enc.video")};
}

void EncoderPair::save(const std::string& path) const {
    Checkpoint ckpt;
    save_into(ckpt);
    ckpt.save(path);
}

EncoderPair EncoderPair::load(const std::string& path) {
    return load_from(Checkpoint::load(path));
}

}  // namespace syncmatrix
