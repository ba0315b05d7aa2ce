#include "syncmatrix/tensor.hpp"

#include <cmath>

#include "syncmatrix/errors.hpp"

namespace syncmatrix {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
    impl_ = std::make_shared<Impl>();
    impl_->values.assign(shape_numel(shape), fill);
    impl_->shape = std::move(shape);
    impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw DimensionError("tensor: value count does not match shape");
    impl_ = std::make_shared<Impl>();
    impl_->shape = std::move(shape);
    impl_->values = std::move(values);
    impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

double Tensor::item() const {
    if (size() != 1) throw DimensionError("item() on tensor with more than one element");
    return impl_->values[0];
}

std::vector<double>& Tensor::grad_storage() {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
    return impl_->grad;
}

Tensor Tensor::clone() const {
    Tensor out;
    out.impl_ = std::make_shared<Impl>();
    out.impl_->shape = impl_->shape;
    out.impl_->values = impl_->values;
    out.impl_->requires_grad = impl_->requires_grad;
    return out;
}

bool Tensor::all_finite() const {
    for (double v : impl_->values)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tape::backward(Tensor& loss) {
    if (!recording_) throw ArgumentError("backward on a non-recording tape");
    if (loss.size() != 1) throw ArgumentError("backward requires a scalar loss");
    if (!loss.requires_grad()) throw ArgumentError("loss does not require gradients");
    loss.grad_storage()[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

}  // namespace syncmatrix
