#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace syncmatrix {

using Shape = std::vector<std::size_t>;

/// Dense row-major tensor of doubles with optional gradient storage.
///
/// Copies are shallow: two Tensor handles may share one buffer, which is how
/// gradient accumulation finds its target. Use clone() for a deep copy.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t ndim() const { return impl_->shape.size(); }
    std::size_t dim(std::size_t i) const { return impl_->shape[i]; }
    std::size_t size() const { return impl_->values.size(); }

    double* data() { return impl_->values.data(); }
    const double* data() const { return impl_->values.data(); }
    std::vector<double>& values() { return impl_->values; }
    const std::vector<double>& values() const { return impl_->values; }

    double at(std::size_t i) const { return impl_->values[i]; }
    /// Value of a single-element tensor.
    double item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool b) { impl_->requires_grad = b; }

    /// Gradient buffer, or nullptr if no gradient has been accumulated yet.
    double* grad() { return impl_->grad.empty() ? nullptr : impl_->grad.data(); }
    const double* grad() const { return impl_->grad.empty() ? nullptr : impl_->grad.data(); }
    /// Gradient buffer, allocated (zero-filled) on first use.
    std::vector<double>& grad_storage();
    void zero_grad() { impl_->grad.clear(); }

    /// Deep copy of values and metadata; gradient is not copied.
    Tensor clone() const;

    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

    bool all_finite() const;

private:
    struct Impl {
        Shape shape;
        std::vector<double> values;
        std::vector<double> grad;  // empty until needed
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
};

std::size_t shape_numel(const Shape& s);

/// Reverse-mode differentiation record.
///
/// Operations append a backward rule as they execute, so the node list is in
/// topological order by construction. backward() replays the rules once, in
/// reverse; a tensor that does not lie on a path to the loss simply never
/// receives a gradient. A Tape and the tensors recorded on it belong to one
/// thread; independent tapes may run concurrently.
class Tape {
public:
    explicit Tape(bool recording = true) : recording_(recording) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }

    void record(std::function<void()> backward_fn) {
        nodes_.push_back(std::move(backward_fn));
    }

    std::size_t node_count() const { return nodes_.size(); }

    /// Seeds d(loss)/d(loss) = 1 and runs every recorded rule exactly once.
    /// loss must be a single-element tensor recorded on this tape.
    void backward(Tensor& loss);

    void clear() { nodes_.clear(); }

private:
    std::vector<std::function<void()>> nodes_;
    bool recording_;
};

}  // namespace syncmatrix
