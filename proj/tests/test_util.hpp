#pragma once

#include <random>

#include "syncmatrix/tensor.hpp"

namespace testutil {

using syncmatrix::Shape;
using syncmatrix::Tensor;

inline Tensor rand_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
    return t;
}

// values with |x| in [0.1, 1.1]: keeps relu/sqrt/recip away from their kinks
inline Tensor rand_tensor_off_zero(Shape shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mag(0.1, 1.1);
    std::bernoulli_distribution sign(0.5);
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i)
        t.data()[i] = (sign(rng) ? 1.0 : -1.0) * mag(rng);
    return t;
}

inline Tensor rand_positive(Shape shape, std::mt19937_64& rng, double lo = 0.5, double hi = 2.0) {
    return rand_tensor(std::move(shape), rng, lo, hi);
}

}  // namespace testutil
