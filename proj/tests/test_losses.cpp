#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "syncmatrix/errors.hpp"
#include "syncmatrix/gradcheck.hpp"
#include "syncmatrix/losses.hpp"
#include "test_util.hpp"

using namespace syncmatrix;
using testutil::rand_tensor;

namespace {

// Independent oracle evaluations on plain doubles, kept free of the ops layer.

double euclid(const Tensor& a, const Tensor& b, std::size_t i, std::size_t j) {
    const std::size_t d = a.dim(1);
    double s = 0;
    for (std::size_t k = 0; k < d; ++k) {
        const double diff = a.at(i * d + k) - b.at(j * d + k);
        s += diff * diff;
    }
    return std::sqrt(s);
}

double brute_multiway(const Tensor& a, const Tensor& v) {
    const std::size_t n = a.dim(0);
    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double denom = 0;
        for (std::size_t j = 0; j < n; ++j)
            denom += std::exp(1.0 / (euclid(a, v, i, j) + 1e-8));
        loss += -std::log(std::exp(1.0 / (euclid(a, v, i, i) + 1e-8)) / denom);
    }
    return loss / static_cast<double>(n);
}

double cosine(const Tensor& a, const Tensor& v, std::size_t i, std::size_t j) {
    const std::size_t d = a.dim(1);
    double dot = 0, na = 0, nv = 0;
    for (std::size_t k = 0; k < d; ++k) {
        dot += a.at(i * d + k) * v.at(j * d + k);
        na += a.at(i * d + k) * a.at(i * d + k);
        nv += v.at(j * d + k) * v.at(j * d + k);
    }
    return dot / (std::sqrt(na) * std::sqrt(nv));
}

double brute_angular(const Tensor& a, const Tensor& v, double w, double b) {
    const std::size_t n = a.dim(0);
    double loss = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double denom = 0;
        for (std::size_t j = 0; j < n; ++j) denom += std::exp(w * cosine(a, v, i, j) + b);
        loss += -std::log(std::exp(w * cosine(a, v, i, i) + b) / denom);
    }
    return loss / static_cast<double>(n);
}

}  // namespace

TEST_CASE("contrastive loss on hand-evaluated batches") {
    Tape tape(false);

    // matched identical pair contributes nothing
    PairBatch same{Tensor(Shape{1, 2}, {0.3, -0.7}), Tensor(Shape{1, 2}, {0.3, -0.7}), {1}};
    CHECK(contrastive_loss(tape, same, 1.0).item() == doctest::Approx(0.0));

    // non-matched pair beyond the margin saturates the hinge
    PairBatch far{Tensor(Shape{1, 2}, {0.0, 0.0}), Tensor(Shape{1, 2}, {2.0, 0.0}), {0}};
    CHECK(contrastive_loss(tape, far, 1.0).item() == doctest::Approx(0.0));

    // N=2, y=[1,0], d=[0.5,0.3], margin 1 -> (1/4)(0.25 + 0.49) = 0.185
    PairBatch batch{Tensor(Shape{2, 2}, {0, 0, 0, 0}),
                    Tensor(Shape{2, 2}, {0.5, 0, 0.3, 0}),
                    {1, 0}};
    CHECK(contrastive_loss(tape, batch, 1.0).item() == doctest::Approx(0.185).epsilon(1e-12));
}

TEST_CASE("contrastive loss argument checks") {
    Tape tape(false);
    PairBatch empty{Tensor(), Tensor(), {}};
    CHECK_THROWS_AS(contrastive_loss(tape, empty, 1.0), ArgumentError);
    PairBatch batch{Tensor(Shape{1, 2}, {1, 0}), Tensor(Shape{1, 2}, {0, 1}), {1}};
    CHECK_THROWS_AS(contrastive_loss(tape, batch, 0.0), ArgumentError);
    PairBatch badlabel{Tensor(Shape{1, 2}, {1, 0}), Tensor(Shape{1, 2}, {0, 1}), {2}};
    CHECK_THROWS_AS(contrastive_loss(tape, badlabel, 1.0), ArgumentError);
}

TEST_CASE("multiway loss limit cases") {
    Tape tape(false);

    // all pairwise distances equal -> ln(N)
    Tensor a(Shape{3, 2}, {1, 0, 1, 0, 1, 0});
    Tensor v(Shape{3, 2}, {0, 1, 0, 1, 0, 1});
    CHECK(multiway_euclidean_loss(tape, {a, v, {}}).item() ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));

    // identical matched features dominate through the 1/eps inverse distance
    Tensor id(Shape{2, 2}, {1, 0, 0, 1});
    CHECK(multiway_euclidean_loss(tape, {id, id, {}}).item() == doctest::Approx(0.0).epsilon(1e-9));

    PairBatch tiny{Tensor(Shape{1, 2}, {1, 0}), Tensor(Shape{1, 2}, {0, 1}), {}};
    CHECK_THROWS_AS(multiway_euclidean_loss(tape, tiny), ArgumentError);
}

TEST_CASE("multiway loss matches the brute-force oracle") {
    std::mt19937_64 rng(101);
    Tape tape(false);
    for (int rep = 0; rep < 25; ++rep) {
        Tensor a = rand_tensor(Shape{3, 4}, rng);
        Tensor v = rand_tensor(Shape{3, 4}, rng);
        const double got = multiway_euclidean_loss(tape, {a, v, {}}).item();
        CHECK(std::fabs(got - brute_multiway(a, v)) < 1e-10);
    }
}

TEST_CASE("angular loss limit cases") {
    Tape tape(false);

    // collinear features: every similarity is 1, loss = ln(N) regardless of w, b
    Tensor a(Shape{3, 2}, {1, 0, 2, 0, 0.5, 0});
    Tensor v(Shape{3, 2}, {3, 0, 0.1, 0, 7, 0});
    for (double w : {1.0, 10.0, 25.0}) {
        AngularScale scale{Tensor::scalar(w), Tensor::scalar(-w / 2)};
        CHECK(angular_multiway_loss(tape, {a, v, {}}, scale).item() ==
              doctest::Approx(std::log(3.0)).epsilon(1e-12));
    }

    // perfectly separated similarities with a large scale drive the loss to 0
    Tensor u(Shape{2, 2}, {1, 0, -1, 0});
    AngularScale sharp{Tensor::scalar(50.0), Tensor::scalar(0.0)};
    CHECK(angular_multiway_loss(tape, {u, u, {}}, sharp).item() == doctest::Approx(0.0).epsilon(1e-9));

    // zero vector is degenerate
    Tensor zero(Shape{2, 2}, {0, 0, 1, 0});
    AngularScale scale = AngularScale::init();
    CHECK_THROWS_AS(angular_multiway_loss(tape, {zero, u, {}}, scale), DegenerateInputError);
}

TEST_CASE("angular loss matches the brute-force oracle at w=10, b=-5") {
    std::mt19937_64 rng(103);
    Tape tape(false);
    AngularScale scale = AngularScale::init(10.0, -5.0);
    for (int rep = 0; rep < 25; ++rep) {
        Tensor a = rand_tensor(Shape{4, 5}, rng);
        Tensor v = rand_tensor(Shape{4, 5}, rng);
        const double got = angular_multiway_loss(tape, {a, v, {}}, scale).item();
        CHECK(std::fabs(got - brute_angular(a, v, 10.0, -5.0)) < 1e-10);
    }
}

TEST_CASE("angular loss ignores positive rescaling of any feature") {
    std::mt19937_64 rng(107);
    Tape tape(false);
    AngularScale scale = AngularScale::init();
    Tensor a = rand_tensor(Shape{4, 5}, rng);
    Tensor v = rand_tensor(Shape{4, 5}, rng);
    const double before = angular_multiway_loss(tape, {a, v, {}}, scale).item();
    Tensor a2 = a.clone();
    for (std::size_t k = 0; k < 5; ++k) a2.data()[2 * 5 + k] *= 37.5;
    const double after = angular_multiway_loss(tape, {a2, v, {}}, scale).item();
    CHECK(std::fabs(before - after) < 1e-9);
}

TEST_CASE("all three losses are non-negative") {
    std::mt19937_64 rng(109);
    Tape tape(false);
    AngularScale scale = AngularScale::init();
    for (int rep = 0; rep < 10; ++rep) {
        Tensor a = rand_tensor(Shape{4, 3}, rng);
        Tensor v = rand_tensor(Shape{4, 3}, rng);
        CHECK(contrastive_loss(tape, {a, v, {1, 0, 1, 0}}, 1.0).item() >= 0.0);
        CHECK(multiway_euclidean_loss(tape, {a, v, {}}).item() >= 0.0);
        CHECK(angular_multiway_loss(tape, {a, v, {}}, scale).item() >= 0.0);
    }
}

TEST_CASE("gradient checks for all three losses") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        std::mt19937_64 rng(seed);
        Tensor a = rand_tensor(Shape{3, 4}, rng);
        Tensor v = rand_tensor(Shape{3, 4}, rng);

        auto contrastive = [](Tape& t, const std::vector<Tensor>& in) {
            return contrastive_loss(t, {in[0], in[1], {1, 0, 1}}, 1.0);
        };
        CHECK(grad_check(contrastive, {a, v}) < 1e-5);

        auto multiway = [](Tape& t, const std::vector<Tensor>& in) {
            return multiway_euclidean_loss(t, {in[0], in[1], {}});
        };
        CHECK(grad_check(multiway, {a, v}) < 1e-5);

        auto angular = [](Tape& t, const std::vector<Tensor>& in) {
            AngularScale s{in[2], in[3]};
            return angular_multiway_loss(t, {in[0], in[1], {}}, s);
        };
        CHECK(grad_check(angular, {a, v, Tensor::scalar(10.0), Tensor::scalar(-5.0)}) < 1e-5);
    }
}
