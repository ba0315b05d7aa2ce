#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <random>

#include "syncmatrix/errors.hpp"
#include "syncmatrix/estimators.hpp"
#include "syncmatrix/synthdata.hpp"

using namespace syncmatrix;

namespace {
GenConfig noiseless_cfg() {
    GenConfig cfg;
    cfg.frames = 15;
    cfg.noise_sigma = 0.0;
    cfg.occlusion_prob = 0.0;
    cfg.seed = 99;
    return cfg;
}

std::string tmp_prefix(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / "syncmatrix_synth_test";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}
}  // namespace

TEST_CASE("same seed gives bit-identical clips") {
    GenConfig cfg;
    cfg.seed = 5;
    ClipGenerator gen(cfg);
    SyntheticClip c1 = gen.generate(1234, OffsetLabel(3));
    SyntheticClip c2 = gen.generate(1234, OffsetLabel(3));
    CHECK(c1.audio_raw.values() == c2.audio_raw.values());
    CHECK(c1.video_raw.values() == c2.video_raw.values());
    CHECK(c1.occluded == c2.occluded);

    SyntheticClip c3 = gen.generate(1235, OffsetLabel(3));
    CHECK(c1.audio_raw.values() != c3.audio_raw.values());
}

TEST_CASE("synchronized noiseless clip peaks on the main diagonal") {
    ClipGenerator gen(noiseless_cfg());
    EncoderPair enc = gen.reference_encoders();
    SyntheticClip clip = gen.generate(7, OffsetLabel(0));
    SimilarityMatrix m = clip_similarity(enc, clip);
    const double diag = band_mean(m, OffsetLabel(0));
    CHECK(diag == doctest::Approx(1.0).epsilon(1e-9));
    for (int o = -5; o <= 5; ++o)
        if (o != 0) CHECK(band_mean(m, OffsetLabel(o)) < diag);
}

TEST_CASE("offset -2 moves the dominant band below the diagonal") {
    ClipGenerator gen(noiseless_cfg());
    EncoderPair enc = gen.reference_encoders();
    SyntheticClip clip = gen.generate(8, OffsetLabel(-2));
    SimilarityMatrix m = clip_similarity(enc, clip);
    double best = -2;
    int best_off = 99;
    for (int o = -5; o <= 5; ++o) {
        const double bm = band_mean(m, OffsetLabel(o));
        if (bm > best) {
            best = bm;
            best_off = o;
        }
    }
    CHECK(best_off == -2);
    // band i - j = +2 sits below the diagonal (audio row 2 matches visual col 0)
    const auto idx = band_indices(m.n, OffsetLabel(-2));
    CHECK(idx.front().first > idx.front().second);
}

TEST_CASE("regenerating with a different offset time-shifts the video stream") {
    GenConfig cfg = noiseless_cfg();
    cfg.occlusion_prob = 0.0;
    ClipGenerator gen(cfg);
    const int o1 = 4, o2 = 1;  // shift = 3
    SyntheticClip a = gen.generate(42, OffsetLabel(o1));
    SyntheticClip b = gen.generate(42, OffsetLabel(o2));
    const std::size_t dv = cfg.raw_dim_video;
    const int shift = o1 - o2;
    for (std::size_t t = 0; t + shift < cfg.frames; ++t)
        for (std::size_t k = 0; k < dv; ++k)
            CHECK(b.video_raw.at(t * dv + k) ==
                  doctest::Approx(a.video_raw.at((t + shift) * dv + k)).epsilon(1e-15));
    CHECK(a.audio_raw.values() == b.audio_raw.values());
}

TEST_CASE("occluded frames are uncorrelated with the latent signal") {
    GenConfig cfg;
    cfg.noise_sigma = 0.0;
    cfg.occlusion_prob = 1.0;
    cfg.occlusion_len = 6;
    cfg.frames = 15;
    cfg.seed = 13;
    ClipGenerator gen(cfg);

    // correlate occluded video values against what the un-occluded signal
    // would have been (the clean mix of the same clip)
    GenConfig clean_cfg = cfg;
    clean_cfg.occlusion_prob = 0.0;
    ClipGenerator clean_gen(clean_cfg);

    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    std::size_t count = 0;
    for (std::uint64_t k = 0; k < 500 && count < 10000; ++k) {
        SyntheticClip occluded = gen.generate(k, OffsetLabel(0));
        SyntheticClip clean = clean_gen.generate(k, OffsetLabel(0));
        for (std::size_t t = 0; t < cfg.frames; ++t) {
            if (!occluded.occluded[t]) continue;
            for (std::size_t r = 0; r < cfg.raw_dim_video; ++r) {
                const double x = occluded.video_raw.at(t * cfg.raw_dim_video + r);
                const double y = clean.video_raw.at(t * cfg.raw_dim_video + r);
                sx += x; sy += y; sxx += x * x; syy += y * y; sxy += x * y;
                ++count;
            }
        }
    }
    REQUIRE(count >= 10000);
    const double nd = static_cast<double>(count);
    const double corr = (sxy - sx * sy / nd) /
                        std::sqrt((sxx - sx * sx / nd) * (syy - sy * sy / nd));
    CHECK(std::fabs(corr) < 0.1);
}

TEST_CASE("generated datasets are balanced within one per class") {
    GenConfig cfg = noiseless_cfg();
    Dataset ds = generate_dataset(cfg, 1100, 17);
    std::array<int, kNumOffsetClasses> hist{};
    for (const auto& clip : ds.clips) ++hist[clip.truth.class_index()];
    for (int c = 0; c < kNumOffsetClasses; ++c) CHECK(hist[c] == 100);

    Dataset odd = generate_dataset(cfg, 25, 17);
    std::array<int, kNumOffsetClasses> hist2{};
    for (const auto& clip : odd.clips) ++hist2[clip.truth.class_index()];
    for (int c = 0; c < kNumOffsetClasses; ++c) CHECK(std::abs(hist2[c] - 25 / 11) <= 1);
}

TEST_CASE("manifest round-trip reproduces identical clips") {
    GenConfig cfg;
    cfg.frames = 13;
    cfg.seed = 3;
    Dataset ds = generate_dataset(cfg, 33, 23);
    const std::string prefix = tmp_prefix("roundtrip");
    save_dataset(ds, prefix);

    Dataset regen = regenerate_from_manifest(prefix);
    REQUIRE(regen.size() == ds.size());
    for (std::size_t k = 0; k < ds.size(); ++k) {
        CHECK(regen.clips[k].audio_raw.values() == ds.clips[k].audio_raw.values());
        CHECK(regen.clips[k].video_raw.values() == ds.clips[k].video_raw.values());
        CHECK(regen.clips[k].truth == ds.clips[k].truth);
        CHECK(regen.clips[k].occluded == ds.clips[k].occluded);
    }

    // the stored container holds the same streams at f32 precision
    Dataset loaded = load_dataset(prefix);
    REQUIRE(loaded.size() == ds.size());
    for (std::size_t k = 0; k < ds.size(); ++k) {
        CHECK(loaded.clips[k].truth == ds.clips[k].truth);
        CHECK(loaded.clips[k].occluded == ds.clips[k].occluded);
        for (std::size_t i = 0; i < ds.clips[k].audio_raw.size(); ++i)
            CHECK(loaded.clips[k].audio_raw.at(i) ==
                  doctest::Approx(ds.clips[k].audio_raw.at(i)).epsilon(1e-6));
    }
}

TEST_CASE("config validation") {
    GenConfig cfg;
    cfg.frames = 9;  // too short for the offset range
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = GenConfig{};
    cfg.raw_dim_audio = 4;  // below latent_dim
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    cfg = GenConfig{};
    cfg.occlusion_prob = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ArgumentError);
    CHECK_THROWS_AS(generate_dataset(GenConfig{}, 0, 1), ArgumentError);
}
