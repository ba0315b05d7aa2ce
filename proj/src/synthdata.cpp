#include "syncmatrix/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "syncmatrix/checkpoint.hpp"
#include "syncmatrix/errors.hpp"
#include "syncmatrix/rng.hpp"

namespace syncmatrix {

void GenConfig::validate() const {
    if (latent_dim == 0) throw ArgumentError("gen config: latent_dim must be positive");
    if (frames < 10)
        throw ArgumentError("gen config: frames - 4 must exceed 5 so all offsets fit");
    if (raw_dim_audio < latent_dim || raw_dim_video < latent_dim)
        throw ArgumentError("gen config: raw dims must be >= latent_dim for full-rank mixing");
    if (noise_sigma < 0.0) throw ArgumentError("gen config: noise_sigma must be >= 0");
    if (occlusion_prob < 0.0 || occlusion_prob > 1.0)
        throw ArgumentError("gen config: occlusion_prob must be in [0, 1]");
    if (smoothness < 0.0 || smoothness >= 1.0)
        throw ArgumentError("gen config: smoothness must be in [0, 1)");
    if (signal_scale <= 0.0) throw ArgumentError("gen config: signal_scale must be positive");
}

namespace {
constexpr int kLatentPad = 5;  // covers |offset| <= 5 on both sides

std::vector<double> scaled_row_mixing(std::size_t rows, std::size_t cols, double row_norm,
                                      Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> m(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            m[r * cols + c] = dist(rng);
            s += m[r * cols + c] * m[r * cols + c];
        }
        const double f = row_norm / std::sqrt(s);
        for (std::size_t c = 0; c < cols; ++c) m[r * cols + c] *= f;
    }
    return m;
}

// Solves G x = b in place for small symmetric positive-definite G via
// Gaussian elimination with partial pivoting. G is n x n row-major.
void solve_small(std::vector<double> g, std::vector<double>& b, std::size_t n,
                 std::size_t nrhs) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(g[r * n + col]) > std::fabs(g[piv * n + col])) piv = r;
        if (std::fabs(g[piv * n + col]) < 1e-12)
            throw NumericError("mixing map is numerically rank deficient");
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(g[col * n + c], g[piv * n + c]);
            for (std::size_t c = 0; c < nrhs; ++c)
                std::swap(b[col * nrhs + c], b[piv * nrhs + c]);
        }
        const double inv = 1.0 / g[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = g[r * n + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) g[r * n + c] -= f * g[col * n + c];
            for (std::size_t c = 0; c < nrhs; ++c) b[r * nrhs + c] -= f * b[col * nrhs + c];
        }
    }
    for (std::size_t col = n; col-- > 0;) {
        const double inv = 1.0 / g[col * n + col];
        for (std::size_t c = 0; c < nrhs; ++c) {
            double v = b[col * nrhs + c];
            for (std::size_t k = col + 1; k < n; ++k) v -= g[col * n + k] * b[k * nrhs + c];
            b[col * nrhs + c] = v * inv;
        }
    }
}

// Moore-Penrose pseudoinverse (L x raw) of a full-column-rank raw x L map.
std::vector<double> pinv(const std::vector<double>& a, std::size_t raw, std::size_t l) {
    std::vector<double> gram(l * l, 0.0);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t j = 0; j < l; ++j) {
            double s = 0;
            for (std::size_t r = 0; r < raw; ++r) s += a[r * l + i] * a[r * l + j];
            gram[i * l + j] = s;
        }
    std::vector<double> at(l * raw);
    for (std::size_t i = 0; i < l; ++i)
        for (std::size_t r = 0; r < raw; ++r) at[i * raw + r] = a[r * l + i];
    solve_small(std::move(gram), at, l, raw);
    return at;  // (A^T A)^-1 A^T
}
}  // namespace

ClipGenerator::ClipGenerator(const GenConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    Rng rng = make_rng(derive_seed(cfg_.seed, "mixing"));
    mix_audio_ = scaled_row_mixing(cfg_.raw_dim_audio, cfg_.latent_dim, cfg_.signal_scale, rng);
    mix_video_ = scaled_row_mixing(cfg_.raw_dim_video, cfg_.latent_dim, cfg_.signal_scale, rng);
}

SyntheticClip ClipGenerator::generate(std::uint64_t clip_seed, OffsetLabel offset) const {
    const std::size_t t_frames = cfg_.frames;
    const std::size_t l = cfg_.latent_dim;
    const std::size_t z_len = t_frames + 2 * kLatentPad;

    // stationary AR(1) latent walk, unit marginal variance
    Rng latent_rng = make_rng(derive_seed(clip_seed, "latent"));
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> z(z_len * l);
    const double s = cfg_.smoothness;
    const double innov = std::sqrt(1.0 - s * s);
    for (std::size_t k = 0; k < l; ++k) z[k] = gauss(latent_rng);
    for (std::size_t t = 1; t < z_len; ++t)
        for (std::size_t k = 0; k < l; ++k)
            z[t * l + k] = s * z[(t - 1) * l + k] + innov * gauss(latent_rng);

    // occlusion span decision precedes the fill noise on the same stream
    Rng occl_rng = make_rng(derive_seed(clip_seed, "occlusion"));
    std::vector<bool> occluded(t_frames, false);
    if (cfg_.occlusion_prob > 0.0 && cfg_.occlusion_len > 0) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        if (unif(occl_rng) < cfg_.occlusion_prob) {
            const std::size_t len = std::min(cfg_.occlusion_len, t_frames);
            std::uniform_int_distribution<std::size_t> start_dist(0, t_frames - len);
            const std::size_t start = start_dist(occl_rng);
            for (std::size_t i = start; i < start + len; ++i) occluded[i] = true;
        }
    }

    Rng noise_rng = make_rng(derive_seed(clip_seed, "noise"));
    auto mix_at = [&](const std::vector<double>& mix, std::size_t raw_dim, std::size_t zt,
                      double* out) {
        for (std::size_t r = 0; r < raw_dim; ++r) {
            double v = 0;
            for (std::size_t k = 0; k < l; ++k) v += mix[r * l + k] * z[zt * l + k];
            out[r] = v;
        }
    };

    SyntheticClip clip;
    clip.truth = offset;
    clip.occluded = occluded;
    clip.audio_raw = Tensor(Shape{t_frames, cfg_.raw_dim_audio});
    clip.video_raw = Tensor(Shape{t_frames, cfg_.raw_dim_video});

    for (std::size_t t = 0; t < t_frames; ++t) {
        double* row = clip.audio_raw.data() + t * cfg_.raw_dim_audio;
        mix_at(mix_audio_, cfg_.raw_dim_audio, t + kLatentPad, row);
        if (cfg_.noise_sigma > 0.0)
            for (std::size_t r = 0; r < cfg_.raw_dim_audio; ++r)
                row[r] += cfg_.noise_sigma * gauss(noise_rng);
    }
    for (std::size_t t = 0; t < t_frames; ++t) {
        double* row = clip.video_raw.data() + t * cfg_.raw_dim_video;
        if (occluded[t]) {
            // pure noise at the amplitude of an ordinary frame
            const double occl_sd = std::sqrt(cfg_.signal_scale * cfg_.signal_scale +
                                             cfg_.noise_sigma * cfg_.noise_sigma);
            for (std::size_t r = 0; r < cfg_.raw_dim_video; ++r)
                row[r] = occl_sd * gauss(occl_rng);
            continue;
        }
        const std::size_t zt = static_cast<std::size_t>(
            static_cast<long>(t) + kLatentPad - offset.offset);
        mix_at(mix_video_, cfg_.raw_dim_video, zt, row);
        if (cfg_.noise_sigma > 0.0)
            for (std::size_t r = 0; r < cfg_.raw_dim_video; ++r)
                row[r] += cfg_.noise_sigma * gauss(noise_rng);
    }
    return clip;
}

SyntheticClip ClipGenerator::generate(std::uint64_t clip_seed) const {
    Rng rng = make_rng(derive_seed(clip_seed, "offset"));
    std::uniform_int_distribution<int> dist(kMinOffset, kMaxOffset);
    return generate(clip_seed, OffsetLabel(dist(rng)));
}

EncoderPair ClipGenerator::reference_encoders(std::size_t context) const {
    const std::size_t l = cfg_.latent_dim;
    const std::size_t embed = context * l;
    auto build = [&](const std::vector<double>& mix, std::size_t raw_dim) {
        const std::vector<double> inv = pinv(mix, raw_dim, l);  // l x raw
        std::vector<double> w(context * raw_dim * embed, 0.0);
        // block-diagonal: window slot c recovers latent frame c
        for (std::size_t c = 0; c < context; ++c)
            for (std::size_t r = 0; r < raw_dim; ++r)
                for (std::size_t k = 0; k < l; ++k)
                    w[(c * raw_dim + r) * embed + (c * l + k)] = inv[k * raw_dim + r];
        return Encoder::linear(context, raw_dim, embed, std::move(w));
    };
    return {build(mix_audio_, cfg_.raw_dim_audio), build(mix_video_, cfg_.raw_dim_video)};
}

Dataset generate_dataset(const GenConfig& cfg, std::size_t count, std::uint64_t seed) {
    cfg.validate();
    if (count == 0) throw ArgumentError("generate_dataset: count must be positive");

    // balanced to within +-1 per class, then shuffled
    std::vector<int> offsets;
    offsets.reserve(count);
    const std::size_t base = count / kNumOffsetClasses;
    const std::size_t extra = count % kNumOffsetClasses;
    for (int c = 0; c < kNumOffsetClasses; ++c) {
        const std::size_t reps = base + (static_cast<std::size_t>(c) < extra ? 1 : 0);
        for (std::size_t r = 0; r < reps; ++r) offsets.push_back(c + kMinOffset);
    }
    Rng shuffle_rng = make_rng(derive_seed(seed, "shuffle"));
    std::shuffle(offsets.begin(), offsets.end(), shuffle_rng);

    ClipGenerator gen(cfg);
    Dataset ds;
    ds.cfg = cfg;
    ds.master_seed = seed;
    ds.clips.reserve(count);
    ds.clip_seeds.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::uint64_t clip_seed = derive_seed(seed, "clip", k);
        ds.clip_seeds.push_back(clip_seed);
        ds.clips.push_back(gen.generate(clip_seed, OffsetLabel(offsets[k])));
    }
    return ds;
}

namespace {
std::string spans_to_string(const std::vector<bool>& mask) {
    std::string out;
    std::size_t i = 0;
    while (i < mask.size()) {
        if (!mask[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < mask.size() && mask[j]) ++j;
        if (!out.empty()) out += ';';
        out += std::to_string(i) + ":" + std::to_string(j - i);
        i = j;
    }
    return out;
}

std::vector<bool> spans_from_string(const std::string& s, std::size_t frames) {
    std::vector<bool> mask(frames, false);
    std::stringstream ss(s);
    std::string span;
    while (std::getline(ss, span, ';')) {
        if (span.empty()) continue;
        const auto colon = span.find(':');
        if (colon == std::string::npos) throw IoError("manifest: bad occlusion span");
        const std::size_t start = std::stoul(span.substr(0, colon));
        const std::size_t len = std::stoul(span.substr(colon + 1));
        for (std::size_t i = start; i < start + len && i < frames; ++i) mask[i] = true;
    }
    return mask;
}
}  // namespace

void save_dataset(const Dataset& ds, const std::string& prefix) {
    Checkpoint ckpt;
    for (std::size_t k = 0; k < ds.clips.size(); ++k) {
        ckpt.put("clip." + std::to_string(k) + ".audio", ds.clips[k].audio_raw);
        ckpt.put("clip." + std::to_string(k) + ".video", ds.clips[k].video_raw);
    }
    ckpt.save(prefix + ".bin");

    std::ofstream os(prefix + ".csv");
    if (!os) throw IoError("cannot open '" + prefix + ".csv' for writing");
    char buf[64];
    os << "# latent_dim=" << ds.cfg.latent_dim << '\n';
    os << "# raw_dim_audio=" << ds.cfg.raw_dim_audio << '\n';
    os << "# raw_dim_video=" << ds.cfg.raw_dim_video << '\n';
    os << "# frames=" << ds.cfg.frames << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", ds.cfg.noise_sigma);
    os << "# noise_sigma=" << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", ds.cfg.occlusion_prob);
    os << "# occlusion_prob=" << buf << '\n';
    os << "# occlusion_len=" << ds.cfg.occlusion_len << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", ds.cfg.smoothness);
    os << "# smoothness=" << buf << '\n';
    std::snprintf(buf, sizeof buf, "%.17g", ds.cfg.signal_scale);
    os << "# signal_scale=" << buf << '\n';
    os << "# gen_seed=" << ds.cfg.seed << '\n';
    os << "# master_seed=" << ds.master_seed << '\n';
    os << "# count=" << ds.clips.size() << '\n';
    os << "clip_id,frames,offset,occluded_spans,seed\n";
    for (std::size_t k = 0; k < ds.clips.size(); ++k) {
        os << k << ',' << ds.cfg.frames << ',' << ds.clips[k].truth.offset << ','
           << spans_to_string(ds.clips[k].occluded) << ',' << ds.clip_seeds[k] << '\n';
    }
    if (!os) throw IoError("write failed for '" + prefix + ".csv'");
}

namespace {
struct ManifestData {
    GenConfig cfg;
    std::uint64_t master_seed = 0;
    std::size_t count = 0;
    std::vector<int> offsets;
    std::vector<std::string> spans;
    std::vector<std::uint64_t> seeds;
};

ManifestData read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open '" + path + "'");
    ManifestData md;
    std::string line;
    bool header_seen = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(2, eq - 2);
            const std::string val = line.substr(eq + 1);
            if (key == "latent_dim") md.cfg.latent_dim = std::stoul(val);
            else if (key == "raw_dim_audio") md.cfg.raw_dim_audio = std::stoul(val);
            else if (key == "raw_dim_video") md.cfg.raw_dim_video = std::stoul(val);
            else if (key == "frames") md.cfg.frames = std::stoul(val);
            else if (key == "noise_sigma") md.cfg.noise_sigma = std::stod(val);
            else if (key == "occlusion_prob") md.cfg.occlusion_prob = std::stod(val);
            else if (key == "occlusion_len") md.cfg.occlusion_len = std::stoul(val);
            else if (key == "smoothness") md.cfg.smoothness = std::stod(val);
            else if (key == "signal_scale") md.cfg.signal_scale = std::stod(val);
            else if (key == "gen_seed") md.cfg.seed = std::stoull(val);
            else if (key == "master_seed") md.master_seed = std::stoull(val);
            else if (key == "count") md.count = std::stoul(val);
            continue;
        }
        if (!header_seen) {  // column header row
            header_seen = true;
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        while (fields.size() < 5) fields.emplace_back();
        md.offsets.push_back(std::stoi(fields[2]));
        md.spans.push_back(fields[3]);
        md.seeds.push_back(std::stoull(fields[4]));
    }
    if (md.offsets.size() != md.count)
        throw IoError("manifest: row count disagrees with recorded count");
    return md;
}
}  // namespace

Dataset load_dataset(const std::string& prefix) {
    const ManifestData md = read_manifest(prefix + ".csv");
    const Checkpoint ckpt = Checkpoint::load(prefix + ".bin");
    Dataset ds;
    ds.cfg = md.cfg;
    ds.master_seed = md.master_seed;
    ds.clip_seeds = md.seeds;
    ds.clips.reserve(md.count);
    for (std::size_t k = 0; k < md.count; ++k) {
        SyntheticClip clip;
        clip.audio_raw = ckpt.get("clip." + std::to_string(k) + ".audio").clone();
        clip.video_raw = ckpt.get("clip." + std::to_string(k) + ".video").clone();
        clip.truth = OffsetLabel(md.offsets[k]);
        clip.occluded = spans_from_string(md.spans[k], md.cfg.frames);
        ds.clips.push_back(std::move(clip));
    }
    return ds;
}

Dataset regenerate_from_manifest(const std::string& prefix) {
    const ManifestData md = read_manifest(prefix + ".csv");
    return generate_dataset(md.cfg, md.count, md.master_seed);
}

}  // namespace syncmatrix
