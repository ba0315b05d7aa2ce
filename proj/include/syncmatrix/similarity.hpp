#pragma once

#include <string>
#include <utility>
#include <vector>

#include "syncmatrix/tensor.hpp"

namespace syncmatrix {

constexpr int kMinOffset = -5;
constexpr int kMaxOffset = 5;
constexpr int kNumOffsetClasses = 11;

/// Integer audio-visual offset in [-5, +5]; negative means the visual stream
/// leads the audio. Class index is offset + 5, giving an 11-way labelling
/// with class 5 = perfectly synchronised.
struct OffsetLabel {
    int offset = 0;

    OffsetLabel() = default;
    explicit OffsetLabel(int o);
    static OffsetLabel from_class(int class_index);

    int class_index() const { return offset - kMinOffset; }
    bool operator==(const OffsetLabel&) const = default;
};

enum class Modality { audio, visual };

/// One modality's embedding sequence for a clip: N features of dimension D,
/// one per timestep at the nominal frame rate.
struct FeatureStream {
    Modality modality = Modality::audio;
    Tensor features;  // N x D
    double frame_rate = 25.0;

    std::size_t count() const { return features.dim(0); }
    std::size_t dim() const { return features.dim(1); }
};

/// N x N cosine similarities; rows index audio features, columns visual ones.
/// A clip at offset o lights up the band i - j = -o.
struct SimilarityMatrix {
    std::size_t n = 0;
    std::vector<double> values;  // row-major

    SimilarityMatrix() = default;
    SimilarityMatrix(std::size_t n_, std::vector<double> v) : n(n_), values(std::move(v)) {}

    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

/// Pairwise cosine similarity between two equal-length streams.
SimilarityMatrix build_similarity_matrix(const FeatureStream& audio, const FeatureStream& visual);

/// Tensor-op version used where gradients must flow through the matrix.
Tensor similarity_matrix_op(Tape& tape, const Tensor& audio_features,
                            const Tensor& visual_features);

/// All (i, j) with i - j = -offset, in row order. Length is n - |offset|.
std::vector<std::pair<std::size_t, std::size_t>> band_indices(std::size_t n, OffsetLabel offset);

/// Mean of the matrix over one offset band.
double band_mean(const SimilarityMatrix& m, OffsetLabel offset);

// Inspection exports: CSV at 9 significant digits, and an 8-bit binary PGM
// mapping [-1, 1] linearly onto [0, 255].
void write_matrix_csv(const SimilarityMatrix& m, const std::string& path);
void write_matrix_pgm(const SimilarityMatrix& m, const std::string& path);
/// PGM for signed maps (saliency): [-max|g|, +max|g|] onto [0, 255].
void write_signed_pgm(const std::vector<double>& values, std::size_t n, const std::string& path);
void write_values_csv(const std::vector<double>& values, std::size_t rows, std::size_t cols,
                      const std::string& path);

}  // namespace syncmatrix
