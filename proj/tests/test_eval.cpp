#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "syncmatrix/errors.hpp"
#include "syncmatrix/eval.hpp"
#include "syncmatrix/rng.hpp"

using namespace syncmatrix;

namespace {
std::vector<OffsetLabel> labels(std::initializer_list<int> xs) {
    std::vector<OffsetLabel> out;
    for (int x : xs) out.push_back(OffsetLabel(x));
    return out;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}
}  // namespace

TEST_CASE("accuracy hand counts") {
    CHECK(accuracy(labels({1, -3, 0}), labels({1, -3, 0}), 0) == doctest::Approx(100.0));
    CHECK(accuracy(labels({1, -3, 0}), labels({1, -3, 0}), 1) == doctest::Approx(100.0));

    CHECK(accuracy(labels({1, -2, 4}), labels({0, -3, 5}), 0) == doctest::Approx(0.0));
    CHECK(accuracy(labels({1, -2, 4}), labels({0, -3, 5}), 1) == doctest::Approx(100.0));

    CHECK(accuracy(labels({-5, 0, 2, 4}), labels({-4, 0, 0, 4}), 0) == doctest::Approx(50.0));
    CHECK(accuracy(labels({-5, 0, 2, 4}), labels({-4, 0, 0, 4}), 1) == doctest::Approx(75.0));

    CHECK_THROWS_AS(accuracy({}, {}, 0), ArgumentError);
    CHECK_THROWS_AS(accuracy(labels({1}), labels({1, 2}), 0), DimensionError);
}

TEST_CASE("rer reproduces the published arithmetic") {
    CHECK(rer(45.17, 64.12) == doctest::Approx(34.56).epsilon(0.0002));
    CHECK(rer(45.17, 66.88) == doctest::Approx(39.59).epsilon(0.0004));
    CHECK(rer(76.73, 88.42) == doctest::Approx(50.23).epsilon(0.0005));
    CHECK(rer(50.0, 50.0) == doctest::Approx(0.0));
    CHECK_THROWS_AS(rer(100.0, 99.0), ArgumentError);
}

TEST_CASE("rer grows strictly with method accuracy") {
    double prev = rer(45.17, 46.0);
    for (double acc = 47.0; acc <= 99.0; acc += 1.0) {
        const double r = rer(45.17, acc);
        CHECK(r > prev);
        prev = r;
    }
}

TEST_CASE("tolerance monotonicity over random prediction lists") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> off(-5, 5);
    std::uniform_int_distribution<int> len(1, 40);
    for (int rep = 0; rep < 200; ++rep) {
        const int n = len(rng);
        std::vector<OffsetLabel> preds, truths;
        for (int i = 0; i < n; ++i) {
            preds.push_back(OffsetLabel(off(rng)));
            truths.push_back(OffsetLabel(off(rng)));
        }
        CHECK(accuracy(preds, truths, 1) >= accuracy(preds, truths, 0));
    }
}

TEST_CASE("noiseless benchmark puts the heuristics at 100% and is reproducible") {
    BenchmarkPlan plan;
    plan.methods = {Method::baseline, Method::diag_avg};
    plan.frame_lengths = {11, 15};
    plan.trials = 3;
    plan.clips_per_trial = 110;
    plan.gen.noise_sigma = 0.0;
    plan.gen.occlusion_prob = 0.0;
    plan.gen.smoothness = 0.0;
    plan.seed = 4242;

    std::map<std::size_t, ModelSet> models;
    for (std::size_t frames : plan.frame_lengths) {
        GenConfig g = plan.gen;
        g.frames = frames;
        g.seed = derive_seed(plan.seed, "gen");
        ModelSet ms;
        ms.encoders = ClipGenerator(g).reference_encoders();
        models.emplace(frames, std::move(ms));
    }
    // the plan's generator must match the models' generator seed
    plan.gen.seed = derive_seed(plan.seed, "gen");

    const EvalReport r1 = run_benchmark(plan, models);
    CHECK(r1.cells.size() == plan.methods.size() * plan.frame_lengths.size());
    for (const auto& c : r1.cells) {
        CHECK(c.mean_no_tol == doctest::Approx(100.0));
        CHECK(c.mean_tol == doctest::Approx(100.0));
        CHECK(c.std_no_tol == doctest::Approx(0.0));
        CHECK(c.trials == 3);
        CHECK(c.mean_tol >= c.mean_no_tol);
        CHECK_FALSE(c.rer_no_tol.has_value());  // baseline error is zero here
    }

    const EvalReport r2 = run_benchmark(plan, models);
    const auto dir = std::filesystem::temp_directory_path() / "syncmatrix_eval_test";
    std::filesystem::create_directories(dir);
    write_report_csv(r1, (dir / "r1.csv").string());
    write_report_csv(r2, (dir / "r2.csv").string());
    CHECK(slurp((dir / "r1.csv").string()) == slurp((dir / "r2.csv").string()));
}

TEST_CASE("report csv has methods x lengths x 2 rows") {
    BenchmarkPlan plan;
    plan.methods = {Method::baseline, Method::diag_avg};
    plan.frame_lengths = {11};
    plan.trials = 2;
    plan.clips_per_trial = 44;
    plan.gen.noise_sigma = 0.4;
    plan.gen.seed = derive_seed(7, "gen");
    plan.seed = 7;

    std::map<std::size_t, ModelSet> models;
    GenConfig g = plan.gen;
    g.frames = 11;
    ModelSet ms;
    ms.encoders = ClipGenerator(g).reference_encoders();
    models.emplace(11, std::move(ms));

    const EvalReport report = run_benchmark(plan, models);
    const auto dir = std::filesystem::temp_directory_path() / "syncmatrix_eval_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "cardinality.csv").string();
    write_report_csv(report, path);

    std::ifstream is(path);
    std::string line;
    std::size_t rows = 0;
    std::getline(is, line);  // header
    CHECK(line == "method,frames,tolerance,mean,std,rer");
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2 * 1 * 2);

    // with noise the baseline leaves room, so the RER column is populated
    CHECK(report.cell(Method::baseline, 11).mean_no_tol < 100.0);
    CHECK(report.cell(Method::diag_avg, 11).rer_no_tol.has_value());

    const std::string table = format_report_table(report);
    CHECK(table.find("without tolerance") != std::string::npos);
    CHECK(table.find("baseline") != std::string::npos);
}

TEST_CASE("benchmark requires models for every length") {
    BenchmarkPlan plan;
    plan.methods = {Method::diag_avg};
    plan.frame_lengths = {11};
    plan.trials = 1;
    std::map<std::size_t, ModelSet> models;  // empty
    CHECK_THROWS_AS(run_benchmark(plan, models), ConfigError);

    ModelSet no_encoder;
    models.emplace(11, std::move(no_encoder));
    CHECK_THROWS_AS(run_benchmark(plan, models), ConfigError);
}

TEST_CASE("method name round trip") {
    for (Method m : {Method::baseline, Method::diag_avg, Method::sync_cls, Method::sync_e2e})
        CHECK(method_from_string(method_name(m)) == m);
    CHECK_THROWS_AS(method_from_string("nope"), ConfigError);
}
