#pragma once

#include <vector>

#include "syncmatrix/tensor.hpp"

namespace syncmatrix {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled, applied to the raw weights
};

/// Adaptive moment estimation with bias correction. Parameters are updated in
/// registration order; a parameter whose gradient buffer is empty is skipped
/// for that step.
class Adam {
public:
    explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {});

    void step();
    void zero_grad();
    void set_lr(double lr) { cfg_.lr = lr; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig cfg_;
    std::size_t t_ = 0;
};

}  // namespace syncmatrix
