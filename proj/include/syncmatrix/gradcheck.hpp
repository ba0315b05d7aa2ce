#pragma once

#include <functional>
#include <vector>

#include "syncmatrix/tensor.hpp"

namespace syncmatrix {

/// A scalar-valued differentiable function of a list of tensors. The tape is
/// supplied by the checker; implementations must not keep state across calls.
using ScalarFn = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

struct GradCheckOptions {
    double step = 1e-5;
    /// Upper bound on coordinates probed per input tensor (0 = all). Large
    /// compositions are spot-checked on an evenly spaced subset.
    std::size_t max_coords_per_tensor = 0;
};

/// Compares tape gradients of f at `point` against central finite differences
/// and returns the worst relative error, where the per-coordinate error is
/// |analytic - numeric| / max(1, |analytic|, |numeric|).
double grad_check(const ScalarFn& f, const std::vector<Tensor>& point,
                  const GradCheckOptions& opts = {});

}  // namespace syncmatrix
