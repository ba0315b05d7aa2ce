#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "syncmatrix/encoders.hpp"
#include "syncmatrix/similarity.hpp"
#include "syncmatrix/tensor.hpp"

namespace syncmatrix {

struct GenConfig {
    std::size_t latent_dim = 8;
    std::size_t raw_dim_audio = 12;
    std::size_t raw_dim_video = 16;
    std::size_t frames = 15;        // raw frames T; features per clip = T - 4
    double noise_sigma = 0.5;
    double occlusion_prob = 0.2;    // chance a clip contains an occluded span
    std::size_t occlusion_len = 4;  // span length in video frames
    double smoothness = 0.8;        // AR(1) coefficient of the latent walk
    double signal_scale = 0.3;      // mixing-row norm; sets the signal level noise_sigma acts on
    std::uint64_t seed = 0;         // fixes the mixing maps

    void validate() const;
};

/// Paired raw streams with a known planted offset. Occluded video frames are
/// pure noise and carry no latent information.
struct SyntheticClip {
    Tensor audio_raw;  // T x raw_dim_audio
    Tensor video_raw;  // T x raw_dim_video
    OffsetLabel truth;
    std::vector<bool> occluded;  // per video frame
};

/// Seed-deterministic clip factory. A latent Gaussian walk z is mixed into
/// both modalities through fixed full-rank maps drawn once per generator:
/// audio frame t sees z[t+5], video frame t sees z[t+5-offset], so the
/// similarity band for a clip sits at i - j = -offset. Two calls with the
/// same clip seed produce bit-identical clips.
class ClipGenerator {
public:
    explicit ClipGenerator(const GenConfig& cfg);

    SyntheticClip generate(std::uint64_t clip_seed, OffsetLabel offset) const;
    /// Offset drawn uniformly from [-5, +5] via a sub-seed.
    SyntheticClip generate(std::uint64_t clip_seed) const;

    const GenConfig& config() const { return cfg_; }
    /// Row-major mixing maps, raw_dim x latent_dim.
    const std::vector<double>& audio_mixing() const { return mix_audio_; }
    const std::vector<double>& video_mixing() const { return mix_video_; }

    /// Fixed linear encoders that invert the mixing maps, embedding each
    /// context window as the latent window itself. Matched content then has
    /// cosine similarity exactly 1 on noiseless clips, which isolates the
    /// estimators from feature-learning quality.
    EncoderPair reference_encoders(std::size_t context = 5) const;

private:
    GenConfig cfg_;
    std::vector<double> mix_audio_;
    std::vector<double> mix_video_;
};

struct Dataset {
    GenConfig cfg;
    std::uint64_t master_seed = 0;
    std::vector<SyntheticClip> clips;
    std::vector<std::uint64_t> clip_seeds;

    std::size_t size() const { return clips.size(); }
};

/// Balanced dataset: every offset class appears count/11 times, within +-1.
/// Per-clip seeds derive from the master seed, so any clip can be rebuilt
/// independently.
Dataset generate_dataset(const GenConfig& cfg, std::size_t count, std::uint64_t seed);

/// Writes <prefix>.bin (clip tensors in the shared checkpoint container) and
/// <prefix>.csv (manifest: clip_id, frames, offset, occluded_spans, seed,
/// preceded by '#' lines recording the generator config and master seed).
void save_dataset(const Dataset& ds, const std::string& prefix);
Dataset load_dataset(const std::string& prefix);
/// Rebuilds the dataset from the manifest's config and master seed alone.
Dataset regenerate_from_manifest(const std::string& prefix);

}  // namespace syncmatrix
