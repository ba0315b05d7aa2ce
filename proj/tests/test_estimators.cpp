#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "syncmatrix/errors.hpp"
#include "syncmatrix/estimators.hpp"
#include "syncmatrix/synthdata.hpp"
#include "test_util.hpp"

using namespace syncmatrix;
using testutil::rand_tensor;

namespace {

FeatureStream stream(Tensor t, Modality m = Modality::audio) { return FeatureStream{m, std::move(t)}; }

// iid random feature rows: off-band cosines hover near zero, so shifted
// copies are recovered with a wide margin
std::pair<FeatureStream, FeatureStream> shifted_streams(std::size_t n, std::size_t d, int offset,
                                                        std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor base = rand_tensor(Shape{n + 12, d}, rng);
    Tensor a(Shape{n, d}), v(Shape{n, d});
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t k = 0; k < d; ++k) {
            a.data()[t * d + k] = base.at((t + 6) * d + k);
            // v_t matches a_{t-offset}
            v.data()[t * d + k] = base.at((t + 6 - offset) * d + k);
        }
    return {stream(std::move(a)), stream(std::move(v), Modality::visual)};
}

// independent enumeration for the diag-avg oracle, with the same tie rule
int brute_force_diag_avg(const SimilarityMatrix& m) {
    const int order[11] = {0, -1, 1, -2, 2, -3, 3, -4, 4, -5, 5};
    int best = 0;
    double best_mean = -1e300;
    for (int oi = 0; oi < 11; ++oi) {
        const int o = order[oi];
        double s = 0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < m.n; ++i) {
            const long j = static_cast<long>(i) + o;
            if (j < 0 || j >= static_cast<long>(m.n)) continue;
            s += m.at(i, static_cast<std::size_t>(j));
            ++cnt;
        }
        const double mean = s / static_cast<double>(cnt);
        if (mean > best_mean) {
            best_mean = mean;
            best = o;
        }
    }
    return best;
}

GenConfig noiseless_cfg(std::size_t frames) {
    GenConfig cfg;
    cfg.frames = frames;
    cfg.noise_sigma = 0.0;
    cfg.occlusion_prob = 0.0;
    cfg.smoothness = 0.0;
    cfg.seed = 31;
    return cfg;
}

// shared noiseless classifier: trained once, reused by the slow tests
struct TrainedFixture {
    ClsTrainResult result;
    std::vector<SimilarityMatrix> held_out;
    std::vector<OffsetLabel> held_labels;
};

const TrainedFixture& trained_noiseless() {
    static TrainedFixture fix = [] {
        GenConfig cfg = noiseless_cfg(15);
        ClipGenerator gen(cfg);
        EncoderPair enc = gen.reference_encoders();

        Dataset train = generate_dataset(cfg, 5000, 401);
        std::vector<SimilarityMatrix> ms;
        std::vector<OffsetLabel> labels;
        for (const auto& clip : train.clips) {
            ms.push_back(clip_similarity(enc, clip));
            labels.push_back(clip.truth);
        }
        TrainHyper hyper;
        hyper.epochs = 3;
        hyper.seed = 71;
        TrainedFixture fix;
        fix.result = train_synccls(ms, labels, 11, hyper);

        Dataset test = generate_dataset(cfg, 550, 907);
        for (const auto& clip : test.clips) {
            fix.held_out.push_back(clip_similarity(enc, clip));
            fix.held_labels.push_back(clip.truth);
        }
        return fix;
    }();
    return fix;
}

}  // namespace

TEST_CASE("sliding window recovers exact shifts") {
    for (int o = -5; o <= 5; ++o) {
        auto [a, v] = shifted_streams(15, 16, o, 1000 + o);
        Prediction p = sliding_window_offset(a, v);
        CHECK(p.offset.offset == o);
    }
}

TEST_CASE("sliding window tie-break on constant streams") {
    Tensor c(Shape{9, 4}, 0.5);
    Prediction p = sliding_window_offset(stream(c), stream(c, Modality::visual));
    CHECK(p.offset.offset == 0);
}

TEST_CASE("padding penalty at the extreme offset") {
    // exact shifted copy at +5 with N=11: the true candidate pays 5 padded
    // terms of distance 1 while its 6 valid terms are exact matches
    auto [a, v] = shifted_streams(11, 16, 5, 77);
    Prediction p = sliding_window_offset(a, v);
    CHECK(p.offset.offset == 5);
    CHECK(p.scores[OffsetLabel(5).class_index()] == doctest::Approx(5.0 / 11.0).epsilon(1e-9));
}

TEST_CASE("sliding window error cases") {
    CHECK_THROWS_AS(sliding_window_offset(stream(Tensor()), stream(Tensor())), ArgumentError);
    Tensor z(Shape{6, 3}, 0.0);
    Tensor ok(Shape{6, 3}, 1.0);
    CHECK_THROWS_AS(sliding_window_offset(stream(z), stream(ok, Modality::visual)),
                    DegenerateInputError);
}

TEST_CASE("diag-avg picks the strongest band") {
    SimilarityMatrix m(8, std::vector<double>(64, 0.0));
    for (const auto& [i, j] : band_indices(8, OffsetLabel(2))) m.values[i * 8 + j] = 1.0;
    Prediction p = diag_avg_offset(m);
    CHECK(p.offset.offset == 2);

    SimilarityMatrix flat(8, std::vector<double>(64, 0.37));
    CHECK(diag_avg_offset(flat).offset.offset == 0);

    SimilarityMatrix tiny(5, std::vector<double>(25, 0.0));
    CHECK_THROWS_AS(diag_avg_offset(tiny), ArgumentError);
}

TEST_CASE("diag-avg equals a brute-force enumeration on random matrices") {
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int rep = 0; rep < 300; ++rep) {
        SimilarityMatrix m(11, std::vector<double>(121));
        for (double& v : m.values) v = dist(rng);
        CHECK(diag_avg_offset(m).offset.offset == brute_force_diag_avg(m));
    }
}

TEST_CASE("diag-avg is invariant to constant shifts of the matrix") {
    std::mt19937_64 rng(57);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
        SimilarityMatrix m(9, std::vector<double>(81));
        for (double& v : m.values) v = dist(rng);
        SimilarityMatrix shifted = m;
        for (double& v : shifted.values) v += 0.73;
        CHECK(diag_avg_offset(m).offset == diag_avg_offset(shifted).offset);
    }
}

TEST_CASE("baseline and diag-avg agree on noiseless shifted copies at N=20") {
    for (int o = -5; o <= 5; ++o) {
        auto [a, v] = shifted_streams(20, 16, o, 2000 + o);
        const Prediction sw = sliding_window_offset(a, v);
        const Prediction da = diag_avg_offset(build_similarity_matrix(a, v));
        CHECK(sw.offset.offset == o);
        CHECK(da.offset.offset == o);
    }
}

TEST_CASE("all estimators stay inside the offset range") {
    std::mt19937_64 rng(59);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
        SimilarityMatrix m(7, std::vector<double>(49));
        for (double& v : m.values) v = dist(rng);
        const int d = diag_avg_offset(m).offset.offset;
        CHECK(d >= -5);
        CHECK(d <= 5);
    }
}

TEST_CASE("classifier outputs a probability vector and respects logit order") {
    SyncClsNet net = SyncClsNet::random_init(7, 123);
    std::mt19937_64 rng(61);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    SimilarityMatrix m(7, std::vector<double>(49));
    for (double& v : m.values) v = dist(rng);

    Prediction p = net.predict(m);
    double total = 0;
    for (double s : p.scores) {
        CHECK(s >= 0.0);
        total += s;
    }
    CHECK(std::fabs(total - 1.0) < 1e-6);

    // softmax is strictly increasing in the logits, so the argmax must match
    // the raw logit argmax
    Tape tape(false);
    Tensor in(Shape{1, 1, 7, 7}, m.values);
    Tensor logits = net.forward(tape, in, false);
    int best = 0;
    for (int c = 1; c < 11; ++c)
        if (logits.at(c) > logits.at(best)) best = c;
    CHECK(p.offset.class_index() == best);

    SimilarityMatrix wrong(9, std::vector<double>(81, 0.0));
    CHECK_THROWS_AS(net.predict(wrong), DimensionError);
}

TEST_CASE("untrained classifier sits at chance level on balanced labels") {
    GenConfig cfg;
    cfg.frames = 15;
    cfg.seed = 67;
    ClipGenerator gen(cfg);
    EncoderPair enc = gen.reference_encoders();
    SyncClsNet net = SyncClsNet::random_init(11, 5150);

    Dataset ds = generate_dataset(cfg, 2000, 68);
    std::vector<SimilarityMatrix> ms;
    ms.reserve(ds.size());
    for (const auto& clip : ds.clips) ms.push_back(clip_similarity(enc, clip));
    const auto preds = net.predict_batch(ms);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == ds.clips[i].truth) ++hits;
    const double acc = 100.0 * static_cast<double>(hits) / static_cast<double>(preds.size());
    CHECK(acc > 100.0 / 11.0 - 3.0);
    CHECK(acc < 100.0 / 11.0 + 3.0);
}

TEST_CASE("classifier loss starts near ln(11)") {
    GenConfig cfg = noiseless_cfg(15);
    ClipGenerator gen(cfg);
    EncoderPair enc = gen.reference_encoders();
    SyncClsNet net = SyncClsNet::random_init(11, 31337);

    Dataset ds = generate_dataset(cfg, 32, 69);
    Tensor in(Shape{32, 1, 11, 11});
    std::vector<int> classes(32);
    for (std::size_t i = 0; i < 32; ++i) {
        SimilarityMatrix m = clip_similarity(enc, ds.clips[i]);
        std::copy(m.values.begin(), m.values.end(), in.data() + i * 121);
        classes[i] = ds.clips[i].truth.class_index();
    }
    Tape tape;
    Tensor logits = net.forward(tape, in, true);
    const double loss = ops::cross_entropy_mean(tape, logits, classes).item();
    CHECK(loss == doctest::Approx(std::log(11.0)).epsilon(0.15));
}

TEST_CASE("training on 5k noiseless matrices exceeds 99% held-out accuracy") {
    const TrainedFixture& fix = trained_noiseless();
    const auto preds = fix.result.net.predict_batch(fix.held_out);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == fix.held_labels[i]) ++hits;
    const double acc = 100.0 * static_cast<double>(hits) / static_cast<double>(preds.size());
    CHECK(acc > 99.0);
    CHECK(!fix.result.curve.empty());  // training curve is logged
}

TEST_CASE("trained net maps a noiseless offset -2 matrix to class 3") {
    const TrainedFixture& fix = trained_noiseless();
    GenConfig cfg = noiseless_cfg(15);
    cfg.seed = 31;
    ClipGenerator gen(cfg);
    EncoderPair enc = gen.reference_encoders();
    SyntheticClip clip = gen.generate(31415, OffsetLabel(-2));
    Prediction p = fix.result.net.predict(clip_similarity(enc, clip));
    CHECK(p.offset.class_index() == 3);
}

TEST_CASE("single-class dataset collapses to that class") {
    GenConfig cfg = noiseless_cfg(11);  // N=7 keeps the global conv small
    ClipGenerator gen(cfg);
    EncoderPair enc = gen.reference_encoders();

    std::vector<SimilarityMatrix> ms;
    std::vector<OffsetLabel> labels;
    for (std::uint64_t k = 0; k < 300; ++k) {
        SyntheticClip clip = gen.generate(9000 + k, OffsetLabel(2));
        ms.push_back(clip_similarity(enc, clip));
        labels.push_back(clip.truth);
    }
    TrainHyper hyper;
    hyper.lr = 5e-3;
    hyper.batch = 16;
    hyper.epochs = 12;
    hyper.patience = 12;
    hyper.seed = 3;
    ClsTrainResult res = train_synccls(ms, labels, 7, hyper);
    CHECK(res.curve.back().train_loss < 0.05);
    SyntheticClip probe = gen.generate(99999, OffsetLabel(2));
    CHECK(res.net.predict(clip_similarity(enc, probe)).offset.offset == 2);
}

TEST_CASE("saliency map has the matrix shape and a valid class range") {
    SyncClsNet net = SyncClsNet::random_init(7, 11);
    SimilarityMatrix m(7, std::vector<double>(49, 0.1));
    const auto g = net.saliency(m, 4);
    CHECK(g.size() == 49);
    CHECK_THROWS_AS(net.saliency(m, 11), ArgumentError);
    CHECK_THROWS_AS(net.saliency(m, -1), ArgumentError);
}

TEST_CASE("saliency concentrates on the true band for trained nets") {
    const TrainedFixture& fix = trained_noiseless();
    GenConfig cfg = noiseless_cfg(15);
    ClipGenerator gen(cfg);
    EncoderPair enc = gen.reference_encoders();

    std::size_t checked = 0, adjacent_negative = 0;
    for (std::uint64_t k = 0; checked < 30 && k < 120; ++k) {
        SyntheticClip clip = gen.generate(40000 + k);
        SimilarityMatrix m = clip_similarity(enc, clip);
        if (!(fix.result.net.predict(m).offset == clip.truth)) continue;
        ++checked;
        const auto g = fix.result.net.saliency(m, clip.truth.class_index());

        double on_band = 0, off_band = 0;
        std::size_t on_count = 0, off_count = 0;
        const auto band = band_indices(m.n, clip.truth);
        std::vector<bool> on(m.n * m.n, false);
        for (const auto& [i, j] : band) on[i * m.n + j] = true;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (on[i]) {
                on_band += std::fabs(g[i]);
                ++on_count;
            } else {
                off_band += std::fabs(g[i]);
                ++off_count;
            }
        }
        CHECK(on_band / static_cast<double>(on_count) >=
              5.0 * off_band / static_cast<double>(off_count));

        double adj = 0;
        std::size_t adj_count = 0;
        for (int d : {-1, 1}) {
            const int o = clip.truth.offset + d;
            if (o < kMinOffset || o > kMaxOffset) continue;
            for (const auto& [i, j] : band_indices(m.n, OffsetLabel(o))) {
                adj += g[i * m.n + j];
                ++adj_count;
            }
        }
        if (adj_count > 0 && adj / static_cast<double>(adj_count) < 0.0) ++adjacent_negative;
    }
    REQUIRE(checked == 30);
    CHECK(adjacent_negative >= 24);  // negative pull on neighbouring bands in >= 80%
}

TEST_CASE("e2e training connects the loss to the encoders") {
    GenConfig cfg;
    cfg.frames = 11;
    cfg.noise_sigma = 0.3;
    cfg.seed = 81;
    ClipGenerator gen(cfg);
    EncoderConfig ecfg;
    ecfg.embed_dim = 16;
    ecfg.hidden = {24};
    EncoderPair enc = EncoderPair::random_init(ecfg, 82);
    SyncClsNet net = SyncClsNet::random_init(7, 83);

    // gradient reaches an encoder parameter on a generic batch
    Tape tape;
    std::vector<Tensor> sims;
    std::vector<int> classes;
    for (std::uint64_t k = 0; k < 3; ++k) {
        SyntheticClip clip = gen.generate(k);
        Tensor a = enc.audio.forward(tape, clip.audio_raw);
        Tensor v = enc.video.forward(tape, clip.video_raw);
        sims.push_back(similarity_matrix_op(tape, a, v));
        classes.push_back(clip.truth.class_index());
    }
    Tensor logits = net.forward(tape, ops::stack_as_batch(tape, sims), true);
    Tensor loss = ops::cross_entropy_mean(tape, logits, classes);
    tape.backward(loss);
    const double* g = enc.audio.weight(0).grad();
    REQUIRE(g != nullptr);
    double norm = 0;
    for (std::size_t i = 0; i < enc.audio.weight(0).size(); ++i) norm += g[i] * g[i];
    CHECK(norm > 0.0);

    // a short joint run executes and logs its curve
    std::vector<SyntheticClip> clips;
    for (std::uint64_t k = 100; k < 180; ++k) clips.push_back(gen.generate(k));
    TrainHyper hyper;
    hyper.epochs = 2;
    hyper.batch = 16;
    hyper.seed = 84;
    const auto curve = train_synce2e(clips, enc, net, hyper);
    CHECK(curve.size() >= 1);
}
