#include "syncmatrix/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "syncmatrix/errors.hpp"
#include "syncmatrix/ops.hpp"

namespace syncmatrix {

OffsetLabel::OffsetLabel(int o) : offset(o) {
    if (o < kMinOffset || o > kMaxOffset)
        throw ArgumentError("offset outside [-5, +5]");
}

OffsetLabel OffsetLabel::from_class(int class_index) {
    if (class_index < 0 || class_index >= kNumOffsetClasses)
        throw ArgumentError("offset class outside [0, 10]");
    return OffsetLabel(class_index + kMinOffset);
}

SimilarityMatrix build_similarity_matrix(const FeatureStream& audio,
                                         const FeatureStream& visual) {
    const Tensor& a = audio.features;
    const Tensor& v = visual.features;
    if (a.ndim() != 2 || v.ndim() != 2) throw DimensionError("similarity: features must be N x D");
    if (a.dim(0) != v.dim(0)) throw DimensionError("similarity: stream lengths differ");
    if (a.dim(1) != v.dim(1)) throw DimensionError("similarity: feature dimensions differ");
    const std::size_t n = a.dim(0), d = a.dim(1);

    std::vector<double> a_norm(n), v_norm(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sa = 0, sv = 0;
        for (std::size_t k = 0; k < d; ++k) {
            sa += a.at(i * d + k) * a.at(i * d + k);
            sv += v.at(i * d + k) * v.at(i * d + k);
        }
        if (sa == 0.0 || sv == 0.0)
            throw DegenerateInputError("similarity: zero-norm feature row");
        a_norm[i] = std::sqrt(sa);
        v_norm[i] = std::sqrt(sv);
    }

    std::vector<double> values(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double dot = 0;
            for (std::size_t k = 0; k < d; ++k) dot += a.at(i * d + k) * v.at(j * d + k);
            values[i * n + j] = dot / (a_norm[i] * v_norm[j]);
        }
    return SimilarityMatrix(n, std::move(values));
}

Tensor similarity_matrix_op(Tape& tape, const Tensor& audio_features,
                            const Tensor& visual_features) {
    if (audio_features.dim(0) != visual_features.dim(0))
        throw DimensionError("similarity: stream lengths differ");
    Tensor a_n = ops::l2_normalize(tape, audio_features);
    Tensor v_n = ops::l2_normalize(tape, visual_features);
    return ops::matmul(tape, a_n, ops::transpose(tape, v_n));
}

std::vector<std::pair<std::size_t, std::size_t>> band_indices(std::size_t n, OffsetLabel offset) {
    const int o = offset.offset;
    if (static_cast<std::size_t>(std::abs(o)) >= n)
        throw ArgumentError("band_indices: |offset| must be smaller than n");
    std::vector<std::pair<std::size_t, std::size_t>> idx;
    idx.reserve(n - static_cast<std::size_t>(std::abs(o)));
    for (std::size_t i = 0; i < n; ++i) {
        const long j = static_cast<long>(i) + o;  // i - j = -o
        if (j >= 0 && j < static_cast<long>(n))
            idx.emplace_back(i, static_cast<std::size_t>(j));
    }
    return idx;
}

double band_mean(const SimilarityMatrix& m, OffsetLabel offset) {
    const auto idx = band_indices(m.n, offset);
    double s = 0;
    for (const auto& [i, j] : idx) s += m.at(i, j);
    return s / static_cast<double>(idx.size());
}

void write_values_csv(const std::vector<double>& values, std::size_t rows, std::size_t cols,
                      const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    char buf[40];
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            std::snprintf(buf, sizeof buf, "%.9g", values[i * cols + j]);
            os << buf;
            if (j + 1 < cols) os << ',';
        }
        os << '\n';
    }
    if (!os) throw IoError("write failed for '" + path + "'");
}

void write_matrix_csv(const SimilarityMatrix& m, const std::string& path) {
    write_values_csv(m.values, m.n, m.n, path);
}

namespace {
void write_pgm_bytes(const std::vector<unsigned char>& bytes, std::size_t n,
                     const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os << "P5\n" << n << ' ' << n << "\n255\n";
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw IoError("write failed for '" + path + "'");
}

unsigned char to_byte(double unit) {  // unit in [-1, 1]
    const double v = std::clamp((unit + 1.0) * 127.5, 0.0, 255.0);
    return static_cast<unsigned char>(std::lround(v));
}
}  // namespace

void write_matrix_pgm(const SimilarityMatrix& m, const std::string& path) {
    std::vector<unsigned char> bytes(m.values.size());
    for (std::size_t i = 0; i < m.values.size(); ++i) bytes[i] = to_byte(m.values[i]);
    write_pgm_bytes(bytes, m.n, path);
}

void write_signed_pgm(const std::vector<double>& values, std::size_t n,
                      const std::string& path) {
    double gmax = 0;
    for (double v : values) gmax = std::max(gmax, std::fabs(v));
    std::vector<unsigned char> bytes(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        bytes[i] = gmax == 0.0 ? 128 : to_byte(values[i] / gmax);
    write_pgm_bytes(bytes, n, path);
}

}  // namespace syncmatrix
