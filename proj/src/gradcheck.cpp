#include "syncmatrix/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "syncmatrix/errors.hpp"

namespace syncmatrix {

namespace {
double eval_plain(const ScalarFn& f, const std::vector<Tensor>& point) {
    Tape tape(false);
    const double v = f(tape, point).item();
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite function value");
    return v;
}
}  // namespace

double grad_check(const ScalarFn& f, const std::vector<Tensor>& point,
                  const GradCheckOptions& opts) {
    // analytic pass on deep copies so the caller's tensors stay untouched
    std::vector<Tensor> inputs;
    inputs.reserve(point.size());
    for (const Tensor& t : point) {
        Tensor c = t.clone();
        c.set_requires_grad(true);
        inputs.push_back(c);
    }
    Tape tape;
    Tensor loss = f(tape, inputs);
    if (!std::isfinite(loss.item())) throw NumericError("grad_check: non-finite loss");
    tape.backward(loss);

    double worst = 0.0;
    const double h = opts.step;
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        const std::size_t n = inputs[ti].size();
        std::size_t probes = n;
        if (opts.max_coords_per_tensor > 0) probes = std::min(n, opts.max_coords_per_tensor);
        const double* g = inputs[ti].grad();
        for (std::size_t pi = 0; pi < probes; ++pi) {
            // evenly spaced coordinates when subsampling
            const std::size_t idx = probes == n ? pi : (pi * n) / probes;
            const double analytic = g ? g[idx] : 0.0;

            std::vector<Tensor> shifted;
            shifted.reserve(point.size());
            for (const Tensor& t : point) shifted.push_back(t.clone());
            const double orig = shifted[ti].at(idx);
            shifted[ti].data()[idx] = orig + h;
            const double fp = eval_plain(f, shifted);
            shifted[ti].data()[idx] = orig - h;
            const double fm = eval_plain(f, shifted);
            const double numeric = (fp - fm) / (2.0 * h);

            const double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
            worst = std::max(worst, std::fabs(analytic - numeric) / denom);
        }
    }
    return worst;
}

}  // namespace syncmatrix
