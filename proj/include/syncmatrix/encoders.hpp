#pragma once

#include <cstdint>
#include <vector>

#include "syncmatrix/checkpoint.hpp"
#include "syncmatrix/similarity.hpp"
#include "syncmatrix/tensor.hpp"

namespace syncmatrix {

struct EncoderConfig {
    std::size_t context = 5;       // frames digested per feature
    std::size_t raw_dim_audio = 12;
    std::size_t raw_dim_video = 16;
    std::size_t embed_dim = 32;
    std::vector<std::size_t> hidden = {64};  // empty = single linear map

    void validate() const;
};

/// One modality's feature extractor: the context window is flattened and fed
/// through affine layers with relu in between (none after the last). A
/// T-frame input yields T - context + 1 embeddings at stride 1.
class Encoder {
public:
    Encoder() = default;

    static Encoder random_init(std::size_t context, std::size_t raw_dim, std::size_t embed_dim,
                               const std::vector<std::size_t>& hidden, std::uint64_t seed);
    /// Single fixed affine map (zero bias), e.g. a reference projection built
    /// from known mixing matrices.
    static Encoder linear(std::size_t context, std::size_t raw_dim, std::size_t embed_dim,
                          std::vector<double> weight /* (context*raw_dim) x embed_dim */);

    Tensor forward(Tape& tape, const Tensor& raw) const;
    FeatureStream encode(const Tensor& raw, Modality modality) const;

    std::size_t context() const { return context_; }
    std::size_t raw_dim() const { return raw_dim_; }
    std::size_t embed_dim() const { return embed_dim_; }
    std::size_t layer_count() const { return weights_.size(); }

    std::vector<Tensor> parameters() const;
    void set_trainable(bool trainable);
    Encoder clone() const;

    Tensor& weight(std::size_t layer) { return weights_[layer]; }
    Tensor& bias(std::size_t layer) { return biases_[layer]; }

    void save_into(Checkpoint& ckpt, const std::string& prefix) const;
    static Encoder load_from(const Checkpoint& ckpt, const std::string& prefix);

private:
    std::size_t context_ = 0;
    std::size_t raw_dim_ = 0;
    std::size_t embed_dim_ = 0;
    std::vector<Tensor> weights_;  // per layer, in x out
    std::vector<Tensor> biases_;   // per layer, out
};

/// Audio and visual encoders are architecturally identical but
/// parameter-disjoint; only the raw input dimension differs.
struct EncoderPair {
    Encoder audio;
    Encoder video;

    static EncoderPair random_init(const EncoderConfig& cfg, std::uint64_t seed);

    std::vector<Tensor> parameters() const;
    EncoderPair clone() const { return {audio.clone(), video.clone()}; }

    void save_into(Checkpoint& ckpt) const;
    static EncoderPair load_from(const Checkpoint& ckpt);
    void save(const std::string& path) const;
    static EncoderPair load(const std::string& path);
};

}  // namespace syncmatrix
