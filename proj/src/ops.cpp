#include "syncmatrix/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "syncmatrix/detail/matmul.hpp"
#include "syncmatrix/parallel.hpp"
#include "syncmatrix/errors.hpp"

namespace syncmatrix::ops {

namespace {

bool track(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape.recording()) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": operand shapes differ");
}

void accumulate(Tensor& t, const double* g, std::size_t n) {
    auto& dst = t.grad_storage();
    for (std::size_t i = 0; i < n; ++i) dst[i] += g[i];
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out(a.shape());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.at(i) + b.at(i);
    if (track(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record([a = a, b = b, out]() mutable {
            const double* g = out.grad();
            if (!g) return;
            if (a.requires_grad()) accumulate(a, g, a.size());
            if (b.requires_grad()) accumulate(b, g, b.size());
        });
    }
    return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out(a.shape());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.at(i) - b.at(i);
    if (track(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record([a = a, b = b, out]() mutable {
            const double* g = out.grad();
            if (!g) return;
            if (a.requires_grad()) accumulate(a, g, a.size());
            if (b.requires_grad()) {
                auto& gb = b.grad_storage();
                for (std::size_t i = 0; i < b.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out(a.shape());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.at(i) * b.at(i);
    if (track(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record([a = a, b = b, out]() mutable {
            const double* g = out.grad();
            if (!g) return;
            if (a.requires_grad()) {
                auto& ga = a.grad_storage();
                for (std::size_t i = 0; i < a.size(); ++i) ga[i] += g[i] * b.at(i);
            }
            if (b.requires_grad()) {
                auto& gb = b.grad_storage();
                for (std::size_t i = 0; i < b.size(); ++i) gb[i] += g[i] * a.at(i);
            }
        });
    }
    return out;
}

Tensor scale(Tape& tape, const Tensor& x, double s) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.at(i) * s;
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out, s]() mutable {
            const double* g = out.grad();
            if (!g) return;
            auto& gx = x.grad_storage();
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * s;
        });
    }
    return out;
}

Tensor add_const(Tape& tape, const Tensor& x, double c) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = x.at(i) + c;
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out]() mutable {
            const double* g = out.grad();
            if (!g) return;
            accumulate(x, g, x.size());
        });
    }
    return out;
}

Tensor recip(Tape& tape, const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = 1.0 / x.at(i);
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out]() mutable {
            const double* g = out.grad();
            if (!g) return;
            auto& gx = x.grad_storage();
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double y = out.at(i);
                gx[i] -= g[i] * y * y;
            }
        });
    }
    return out;
}

Tensor sqrt(Tape& tape, const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x.at(i) < 0.0) throw NumericError("sqrt of negative value");
        out.data()[i] = std::sqrt(x.at(i));
    }
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out]() mutable {
            const double* g = out.grad();
            if (!g) return;
            auto& gx = x.grad_storage();
            for (std::size_t i = 0; i < x.size(); ++i)
                gx[i] += g[i] / (2.0 * std::max(out.at(i), 1e-150));
        });
    }
    return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = std::max(x.at(i), 0.0);
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out]() mutable {
            const double* g = out.grad();
            if (!g) return;
            auto& gx = x.grad_storage();
            for (std::size_t i = 0; i < x.size(); ++i)
                if (x.at(i) > 0.0) gx[i] += g[i];
        });
    }
    return out;
}

Tensor scalar_affine(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b) {
    if (w.size() != 1 || b.size() != 1)
        throw DimensionError("scalar_affine: w and b must be scalars");
    const double wv = w.at(0), bv = b.at(0);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data()[i] = wv * x.at(i) + bv;
    if (track(tape, {&x, &w, &b})) {
        out.set_requires_grad(true);
        tape.record([x = x, w = w, b = b, out, wv]() mutable {
            const double* g = out.grad();
            if (!g) return;
            if (x.requires_grad()) {
                auto& gx = x.grad_storage();
                for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[i] * wv;
            }
            if (w.requires_grad()) {
                double s = 0;
                for (std::size_t i = 0; i < x.size(); ++i) s += g[i] * x.at(i);
                w.grad_storage()[0] += s;
            }
            if (b.requires_grad()) {
                double s = 0;
                for (std::size_t i = 0; i < x.size(); ++i) s += g[i];
                b.grad_storage()[0] += s;
            }
        });
    }
    return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x.at(i);
    Tensor out = Tensor::scalar(s);
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out]() mutable {
            const double* g = out.grad();
            if (!g) return;
            auto& gx = x.grad_storage();
            for (std::size_t i = 0; i < x.size(); ++i) gx[i] += g[0];
        });
    }
    return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
    if (x.size() == 0) throw ArgumentError("mean of empty tensor");
    return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.size()));
}

Tensor select(Tape& tape, const Tensor& x, std::size_t flat_index) {
    if (flat_index >= x.size()) throw ArgumentError("select: index out of range");
    Tensor out = Tensor::scalar(x.at(flat_index));
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out, flat_index]() mutable {
            const double* g = out.grad();
            if (!g) return;
            x.grad_storage()[flat_index] += g[0];
        });
    }
    return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.size())
        throw DimensionError("reshape: element count mismatch");
    Tensor out(std::move(new_shape), x.values());
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out]() mutable {
            const double* g = out.grad();
            if (!g) return;
            accumulate(x, g, x.size());
        });
    }
    return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2) throw DimensionError("matmul: expects 2-D tensors");
    const std::size_t m = a.dim(0), k = a.dim(1), p = b.dim(1);
    if (b.dim(0) != k) throw DimensionError("matmul: inner dimensions disagree");
    Tensor out(Shape{m, p});
    detail::mm_nn(a.data(), b.data(), out.data(), m, k, p);
    if (track(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record([a = a, b = b, out, m, k, p]() mutable {
            const double* g = out.grad();
            if (!g) return;
            if (a.requires_grad()) {
                std::vector<double> ga(m * k);
                detail::mm_nt(g, b.data(), ga.data(), m, p, k);
                accumulate(a, ga.data(), ga.size());
            }
            if (b.requires_grad()) {
                std::vector<double> gb(k * p);
                detail::mm_tn(a.data(), g, gb.data(), k, m, p);
                accumulate(b, gb.data(), gb.size());
            }
        });
    }
    return out;
}

Tensor transpose(Tape& tape, const Tensor& x) {
    if (x.ndim() != 2) throw DimensionError("transpose: expects a 2-D tensor");
    const std::size_t r = x.dim(0), c = x.dim(1);
    Tensor out(Shape{c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.data()[j * r + i] = x.at(i * c + j);
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out, r, c]() mutable {
            const double* g = out.grad();
            if (!g) return;
            auto& gx = x.grad_storage();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
        });
    }
    return out;
}

Tensor l2_normalize(Tape& tape, const Tensor& x) {
    std::size_t rows = 1, d = 0;
    if (x.ndim() == 1) {
        d = x.dim(0);
    } else if (x.ndim() == 2) {
        rows = x.dim(0);
        d = x.dim(1);
    } else {
        throw DimensionError("l2_normalize: expects a vector or matrix");
    }
    Tensor out(x.shape());
    std::vector<double> norms(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) s += x.at(i * d + j) * x.at(i * d + j);
        const double nrm = std::sqrt(s);
        if (nrm == 0.0) throw DegenerateInputError("l2_normalize: zero vector");
        norms[i] = nrm;
        for (std::size_t j = 0; j < d; ++j) out.data()[i * d + j] = x.at(i * d + j) / nrm;
    }
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out, norms = std::move(norms), rows, d]() mutable {
            const double* g = out.grad();
            if (!g) return;
            auto& gx = x.grad_storage();
            for (std::size_t i = 0; i < rows; ++i) {
                double dot = 0;
                for (std::size_t j = 0; j < d; ++j) dot += g[i * d + j] * out.at(i * d + j);
                for (std::size_t j = 0; j < d; ++j)
                    gx[i * d + j] += (g[i * d + j] - out.at(i * d + j) * dot) / norms[i];
            }
        });
    }
    return out;
}

Tensor row_bias_add(Tape& tape, const Tensor& x, const Tensor& bias) {
    if (x.ndim() != 2 || bias.ndim() != 1 || bias.dim(0) != x.dim(1))
        throw DimensionError("row_bias_add: bias length must match row width");
    const std::size_t rows = x.dim(0), d = x.dim(1);
    Tensor out(x.shape());
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < d; ++j) out.data()[i * d + j] = x.at(i * d + j) + bias.at(j);
    if (track(tape, {&x, &bias})) {
        out.set_requires_grad(true);
        tape.record([x = x, bias = bias, out, rows, d]() mutable {
            const double* g = out.grad();
            if (!g) return;
            if (x.requires_grad()) accumulate(x, g, x.size());
            if (bias.requires_grad()) {
                auto& gb = bias.grad_storage();
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
            }
        });
    }
    return out;
}

Tensor rowwise_sqdist(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "rowwise_sqdist");
    if (a.ndim() != 2) throw DimensionError("rowwise_sqdist: expects N x D matrices");
    const std::size_t n = a.dim(0), d = a.dim(1);
    Tensor out(Shape{n});
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = a.at(i * d + j) - b.at(i * d + j);
            s += diff * diff;
        }
        out.data()[i] = s;
    }
    if (track(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record([a = a, b = b, out, n, d]() mutable {
            const double* g = out.grad();
            if (!g) return;
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = 2.0 * (a.at(i * d + j) - b.at(i * d + j)) * g[i];
                    if (a.requires_grad()) a.grad_storage()[i * d + j] += diff;
                    if (b.requires_grad()) b.grad_storage()[i * d + j] -= diff;
                }
            }
        });
    }
    return out;
}

Tensor pairwise_sqdist(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
        throw DimensionError("pairwise_sqdist: expects N x D matrices with equal D");
    const std::size_t na = a.dim(0), nb = b.dim(0), d = a.dim(1);
    Tensor out(Shape{na, nb});
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nb; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = a.at(i * d + k) - b.at(j * d + k);
                s += diff * diff;
            }
            out.data()[i * nb + j] = s;
        }
    }
    if (track(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record([a = a, b = b, out, na, nb, d]() mutable {
            const double* g = out.grad();
            if (!g) return;
            for (std::size_t i = 0; i < na; ++i) {
                for (std::size_t j = 0; j < nb; ++j) {
                    const double gij = g[i * nb + j];
                    if (gij == 0.0) continue;
                    for (std::size_t k = 0; k < d; ++k) {
                        const double diff = 2.0 * (a.at(i * d + k) - b.at(j * d + k)) * gij;
                        if (a.requires_grad()) a.grad_storage()[i * d + k] += diff;
                        if (b.requires_grad()) b.grad_storage()[j * d + k] -= diff;
                    }
                }
            }
        });
    }
    return out;
}

namespace {

struct ConvDims {
    std::size_t batch, cin, h, w, cout, kh, kw, oh, ow;
    std::size_t patch() const { return cin * kh * kw; }
    std::size_t positions() const { return batch * oh * ow; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& kernel, int padding, bool& batched) {
    if (kernel.ndim() != 4) throw DimensionError("conv2d: kernel must be C_out x C_in x kh x kw");
    batched = x.ndim() == 4;
    if (!batched && x.ndim() != 3)
        throw DimensionError("conv2d: input must be C x H x W or B x C x H x W");
    if (padding < 0) throw ArgumentError("conv2d: negative padding");
    ConvDims dm{};
    dm.batch = batched ? x.dim(0) : 1;
    dm.cin = x.dim(batched ? 1 : 0);
    dm.h = x.dim(batched ? 2 : 1);
    dm.w = x.dim(batched ? 3 : 2);
    dm.cout = kernel.dim(0);
    dm.kh = kernel.dim(2);
    dm.kw = kernel.dim(3);
    if (kernel.dim(1) != dm.cin) throw DimensionError("conv2d: channel count mismatch");
    const std::size_t p = static_cast<std::size_t>(padding);
    if (dm.kh > dm.h + 2 * p || dm.kw > dm.w + 2 * p)
        throw DimensionError("conv2d: kernel larger than padded input");
    dm.oh = dm.h + 2 * p - dm.kh + 1;
    dm.ow = dm.w + 2 * p - dm.kw + 1;
    return dm;
}

// cols[(b*oh+oy)*ow+ox][ (ci*kh+ky)*kw+kx ] = padded x value
void im2col(const double* x, const ConvDims& dm, int padding, double* cols) {
    const std::size_t patch = dm.patch();
    for (std::size_t b = 0; b < dm.batch; ++b) {
        const double* xb = x + b * dm.cin * dm.h * dm.w;
        for (std::size_t oy = 0; oy < dm.oh; ++oy) {
            for (std::size_t ox = 0; ox < dm.ow; ++ox) {
                double* row = cols + ((b * dm.oh + oy) * dm.ow + ox) * patch;
                for (std::size_t ci = 0; ci < dm.cin; ++ci) {
                    for (std::size_t ky = 0; ky < dm.kh; ++ky) {
                        const long iy = static_cast<long>(oy + ky) - padding;
                        for (std::size_t kx = 0; kx < dm.kw; ++kx) {
                            const long ix = static_cast<long>(ox + kx) - padding;
                            double v = 0.0;
                            if (iy >= 0 && iy < static_cast<long>(dm.h) && ix >= 0 &&
                                ix < static_cast<long>(dm.w))
                                v = xb[(ci * dm.h + static_cast<std::size_t>(iy)) * dm.w +
                                       static_cast<std::size_t>(ix)];
                            row[(ci * dm.kh + ky) * dm.kw + kx] = v;
                        }
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, const ConvDims& dm, int padding, double* gx) {
    const std::size_t patch = dm.patch();
    for (std::size_t b = 0; b < dm.batch; ++b) {
        double* gb = gx + b * dm.cin * dm.h * dm.w;
        for (std::size_t oy = 0; oy < dm.oh; ++oy) {
            for (std::size_t ox = 0; ox < dm.ow; ++ox) {
                const double* row = cols + ((b * dm.oh + oy) * dm.ow + ox) * patch;
                for (std::size_t ci = 0; ci < dm.cin; ++ci) {
                    for (std::size_t ky = 0; ky < dm.kh; ++ky) {
                        const long iy = static_cast<long>(oy + ky) - padding;
                        if (iy < 0 || iy >= static_cast<long>(dm.h)) continue;
                        for (std::size_t kx = 0; kx < dm.kw; ++kx) {
                            const long ix = static_cast<long>(ox + kx) - padding;
                            if (ix < 0 || ix >= static_cast<long>(dm.w)) continue;
                            gb[(ci * dm.h + static_cast<std::size_t>(iy)) * dm.w +
                               static_cast<std::size_t>(ix)] +=
                                row[(ci * dm.kh + ky) * dm.kw + kx];
                        }
                    }
                }
            }
        }
    }
}

// Whole-input kernel at zero padding degenerates to a flattened matmul, which
// is the hot case for the pattern classifier; skip the im2col copy there.
bool is_flat_case(const ConvDims& dm, int padding) {
    return padding == 0 && dm.kh == dm.h && dm.kw == dm.w;
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& kernel, int padding) {
    bool batched = false;
    const ConvDims dm = conv_dims(x, kernel, padding, batched);
    const std::size_t patch = dm.patch();
    const std::size_t positions = dm.positions();

    std::vector<double> cols_buf;
    const double* cols = nullptr;
    if (is_flat_case(dm, padding)) {
        cols = x.data();
    } else {
        cols_buf.resize(positions * patch);
        im2col(x.data(), dm, padding, cols_buf.data());
        cols = cols_buf.data();
    }

    // rows are output positions, columns are output channels
    std::vector<double> outmat(positions * dm.cout);
    detail::mm_nt(cols, kernel.data(), outmat.data(), positions, patch, dm.cout);

    Shape out_shape = batched ? Shape{dm.batch, dm.cout, dm.oh, dm.ow}
                              : Shape{dm.cout, dm.oh, dm.ow};
    Tensor out(std::move(out_shape));
    const std::size_t spatial = dm.oh * dm.ow;
    for (std::size_t b = 0; b < dm.batch; ++b)
        for (std::size_t co = 0; co < dm.cout; ++co)
            for (std::size_t ppos = 0; ppos < spatial; ++ppos)
                out.data()[(b * dm.cout + co) * spatial + ppos] =
                    outmat[(b * spatial + ppos) * dm.cout + co];

    if (track(tape, {&x, &kernel})) {
        out.set_requires_grad(true);
        tape.record([x = x, kernel = kernel, out, dm, padding]() mutable {
            const double* g = out.grad();
            if (!g) return;
            const std::size_t patch = dm.patch();
            const std::size_t positions = dm.positions();
            const std::size_t spatial = dm.oh * dm.ow;

            // gather grad into position-major layout
            std::vector<double> gmat(positions * dm.cout);
            for (std::size_t b = 0; b < dm.batch; ++b)
                for (std::size_t co = 0; co < dm.cout; ++co)
                    for (std::size_t ppos = 0; ppos < spatial; ++ppos)
                        gmat[(b * spatial + ppos) * dm.cout + co] =
                            g[(b * dm.cout + co) * spatial + ppos];

            if (kernel.requires_grad()) {
                std::vector<double> cols_buf;
                const double* cols = nullptr;
                if (is_flat_case(dm, padding)) {
                    cols = x.data();
                } else {
                    cols_buf.resize(positions * patch);
                    im2col(x.data(), dm, padding, cols_buf.data());
                    cols = cols_buf.data();
                }
                std::vector<double> gk(dm.cout * patch);
                detail::mm_tn(gmat.data(), cols, gk.data(), dm.cout, positions, patch);
                accumulate(kernel, gk.data(), gk.size());
            }
            if (x.requires_grad()) {
                std::vector<double> gcols(positions * patch);
                detail::mm_nn(gmat.data(), kernel.data(), gcols.data(), positions, dm.cout,
                              patch);
                if (is_flat_case(dm, padding)) {
                    accumulate(x, gcols.data(), gcols.size());
                } else {
                    auto& gx = x.grad_storage();
                    col2im_add(gcols.data(), dm, padding, gx.data());
                }
            }
        });
    }
    return out;
}

Tensor channel_bias_add(Tape& tape, const Tensor& x, const Tensor& bias) {
    if (x.ndim() != 4 || bias.ndim() != 1 || bias.dim(0) != x.dim(1))
        throw DimensionError("channel_bias_add: bias length must match channel count");
    const std::size_t batch = x.dim(0), c = x.dim(1), spatial = x.dim(2) * x.dim(3);
    Tensor out(x.shape());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t ci = 0; ci < c; ++ci) {
            const double bv = bias.at(ci);
            const std::size_t base = (b * c + ci) * spatial;
            for (std::size_t s = 0; s < spatial; ++s) out.data()[base + s] = x.at(base + s) + bv;
        }
    if (track(tape, {&x, &bias})) {
        out.set_requires_grad(true);
        tape.record([x = x, bias = bias, out, batch, c, spatial]() mutable {
            const double* g = out.grad();
            if (!g) return;
            if (x.requires_grad()) accumulate(x, g, x.size());
            if (bias.requires_grad()) {
                auto& gb = bias.grad_storage();
                for (std::size_t b = 0; b < batch; ++b)
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        const std::size_t base = (b * c + ci) * spatial;
                        double s = 0;
                        for (std::size_t k = 0; k < spatial; ++k) s += g[base + k];
                        gb[ci] += s;
                    }
            }
        });
    }
    return out;
}

Tensor batchnorm(Tape& tape, const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BatchNormState& state, bool training) {
    if (x.ndim() != 4) throw DimensionError("batchnorm: expects B x C x H x W");
    const std::size_t batch = x.dim(0), c = x.dim(1), spatial = x.dim(2) * x.dim(3);
    if (gamma.size() != c || beta.size() != c || state.running_mean.size() != c)
        throw DimensionError("batchnorm: parameter size must match channel count");
    if (training && batch < 2) throw ArgumentError("batchnorm: training mode needs batch >= 2");

    const std::size_t m = batch * spatial;
    const std::size_t bn_grain = std::max<std::size_t>(1, (1u << 18) / (m + 1));
    std::vector<double> mean_c(c), invstd_c(c);
    if (training) {
        runtime::parallel_for(c, bn_grain, [&](std::size_t c0, std::size_t c1) {
        for (std::size_t ci = c0; ci < c1; ++ci) {
            double s = 0;
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t base = (b * c + ci) * spatial;
                for (std::size_t k = 0; k < spatial; ++k) s += x.at(base + k);
            }
            const double mu = s / static_cast<double>(m);
            double v = 0;
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t base = (b * c + ci) * spatial;
                for (std::size_t k = 0; k < spatial; ++k) {
                    const double d = x.at(base + k) - mu;
                    v += d * d;
                }
            }
            const double var = v / static_cast<double>(m);
            mean_c[ci] = mu;
            invstd_c[ci] = 1.0 / std::sqrt(var + state.eps);
            state.running_mean[ci] = (1.0 - state.momentum) * state.running_mean[ci] +
                                     state.momentum * mu;
            state.running_var[ci] = (1.0 - state.momentum) * state.running_var[ci] +
                                    state.momentum * var;
        }
        });
    } else {
        for (std::size_t ci = 0; ci < c; ++ci) {
            mean_c[ci] = state.running_mean[ci];
            invstd_c[ci] = 1.0 / std::sqrt(state.running_var[ci] + state.eps);
        }
    }

    Tensor out(x.shape());
    std::vector<double> xhat(x.size());
    runtime::parallel_for(c, bn_grain, [&](std::size_t c0, std::size_t c1) {
        for (std::size_t ci = c0; ci < c1; ++ci) {
            const double mu = mean_c[ci], is = invstd_c[ci];
            const double gm = gamma.at(ci), bt = beta.at(ci);
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t base = (b * c + ci) * spatial;
                for (std::size_t k = 0; k < spatial; ++k) {
                    const double xh = (x.at(base + k) - mu) * is;
                    xhat[base + k] = xh;
                    out.data()[base + k] = gm * xh + bt;
                }
            }
        }
    });

    if (track(tape, {&x, &gamma, &beta})) {
        out.set_requires_grad(true);
        tape.record([x = x, gamma = gamma, beta = beta, out, xhat = std::move(xhat), invstd = std::move(invstd_c), batch, c, spatial, m, training]() mutable {
            const double* g = out.grad();
            if (!g) return;
            if (gamma.requires_grad()) gamma.grad_storage();
            if (beta.requires_grad()) beta.grad_storage();
            if (x.requires_grad()) x.grad_storage();
            const std::size_t grain = std::max<std::size_t>(1, (1u << 18) / (m + 1));
            runtime::parallel_for(c, grain, [&](std::size_t c0, std::size_t c1) {
            for (std::size_t ci = c0; ci < c1; ++ci) {
                double sum_g = 0, sum_gx = 0;
                for (std::size_t b = 0; b < batch; ++b) {
                    const std::size_t base = (b * c + ci) * spatial;
                    for (std::size_t k = 0; k < spatial; ++k) {
                        sum_g += g[base + k];
                        sum_gx += g[base + k] * xhat[base + k];
                    }
                }
                if (gamma.requires_grad()) gamma.grad_storage()[ci] += sum_gx;
                if (beta.requires_grad()) beta.grad_storage()[ci] += sum_g;
                if (x.requires_grad()) {
                    auto& gx = x.grad_storage();  // preallocated above
                    const double gm = gamma.at(ci), is = invstd[ci];
                    const double mg = sum_g / static_cast<double>(m);
                    const double mgx = sum_gx / static_cast<double>(m);
                    for (std::size_t b = 0; b < batch; ++b) {
                        const std::size_t base = (b * c + ci) * spatial;
                        for (std::size_t k = 0; k < spatial; ++k) {
                            if (training)
                                gx[base + k] += gm * is *
                                                (g[base + k] - mg - xhat[base + k] * mgx);
                            else
                                gx[base + k] += gm * is * g[base + k];
                        }
                    }
                }
            }
            });
        });
    }
    return out;
}

Tensor softmax(Tape& tape, const Tensor& logits) {
    if (logits.ndim() != 1) throw DimensionError("softmax: expects a 1-D logit vector");
    const std::size_t k = logits.size();
    if (k == 0) throw ArgumentError("softmax: empty input");
    Tensor out(logits.shape());
    double mx = logits.at(0);
    for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, logits.at(i));
    double z = 0;
    for (std::size_t i = 0; i < k; ++i) {
        out.data()[i] = std::exp(logits.at(i) - mx);
        z += out.at(i);
    }
    for (std::size_t i = 0; i < k; ++i) out.data()[i] /= z;
    if (track(tape, {&logits})) {
        out.set_requires_grad(true);
        tape.record([logits = logits, out, k]() mutable {
            const double* g = out.grad();
            if (!g) return;
            double dot = 0;
            for (std::size_t i = 0; i < k; ++i) dot += g[i] * out.at(i);
            auto& gx = logits.grad_storage();
            for (std::size_t i = 0; i < k; ++i) gx[i] += out.at(i) * (g[i] - dot);
        });
    }
    return out;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, int klass) {
    if (logits.ndim() != 1) throw DimensionError("cross_entropy: expects a 1-D logit vector");
    return cross_entropy_mean(tape, reshape(tape, logits, Shape{1, logits.size()}), {klass});
}

Tensor cross_entropy_mean(Tape& tape, const Tensor& logits, const std::vector<int>& classes) {
    if (logits.ndim() != 2) throw DimensionError("cross_entropy_mean: expects B x K logits");
    const std::size_t bsz = logits.dim(0), k = logits.dim(1);
    if (classes.size() != bsz)
        throw DimensionError("cross_entropy_mean: one class index per row required");
    for (int cls : classes)
        if (cls < 0 || static_cast<std::size_t>(cls) >= k)
            throw ArgumentError("cross_entropy: class index out of range");
    if (bsz == 0) throw ArgumentError("cross_entropy_mean: empty batch");

    std::vector<double> probs(bsz * k);
    double loss = 0;
    for (std::size_t b = 0; b < bsz; ++b) {
        const double* row = logits.data() + b * k;
        double mx = row[0];
        for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, row[i]);
        double z = 0;
        for (std::size_t i = 0; i < k; ++i) {
            probs[b * k + i] = std::exp(row[i] - mx);
            z += probs[b * k + i];
        }
        for (std::size_t i = 0; i < k; ++i) probs[b * k + i] /= z;
        loss += std::log(z) + mx - row[classes[b]];
    }
    loss /= static_cast<double>(bsz);
    if (!std::isfinite(loss)) throw NumericError("cross_entropy: non-finite loss");

    Tensor out = Tensor::scalar(loss);
    if (track(tape, {&logits})) {
        out.set_requires_grad(true);
        tape.record([logits = logits, out, probs = std::move(probs), classes, bsz, k]() mutable {
            const double* g = out.grad();
            if (!g) return;
            const double g0 = g[0] / static_cast<double>(bsz);
            auto& gx = logits.grad_storage();
            for (std::size_t b = 0; b < bsz; ++b) {
                for (std::size_t i = 0; i < k; ++i) {
                    double p = probs[b * k + i];
                    if (i == static_cast<std::size_t>(classes[b])) p -= 1.0;
                    gx[b * k + i] += g0 * p;
                }
            }
        });
    }
    return out;
}

Tensor slice_rows(Tape& tape, const Tensor& x, std::size_t start, std::size_t count) {
    if (x.ndim() != 2) throw DimensionError("slice_rows: expects a 2-D matrix");
    if (start + count > x.dim(0)) throw ArgumentError("slice_rows: range out of bounds");
    const std::size_t d = x.dim(1);
    Tensor out(Shape{count, d});
    std::memcpy(out.data(), x.data() + start * d, count * d * sizeof(double));
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out, start, count, d]() mutable {
            const double* g = out.grad();
            if (!g) return;
            auto& gx = x.grad_storage();
            for (std::size_t i = 0; i < count * d; ++i) gx[start * d + i] += g[i];
        });
    }
    return out;
}

Tensor concat_rows(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(1))
        throw DimensionError("concat_rows: column counts differ");
    const std::size_t d = a.dim(1), na = a.dim(0), nb = b.dim(0);
    Tensor out(Shape{na + nb, d});
    std::memcpy(out.data(), a.data(), na * d * sizeof(double));
    std::memcpy(out.data() + na * d, b.data(), nb * d * sizeof(double));
    if (track(tape, {&a, &b})) {
        out.set_requires_grad(true);
        tape.record([a = a, b = b, out, na, nb, d]() mutable {
            const double* g = out.grad();
            if (!g) return;
            if (a.requires_grad()) accumulate(a, g, na * d);
            if (b.requires_grad()) {
                auto& gb = b.grad_storage();
                for (std::size_t i = 0; i < nb * d; ++i) gb[i] += g[na * d + i];
            }
        });
    }
    return out;
}

Tensor unfold_windows(Tape& tape, const Tensor& x, std::size_t context) {
    if (x.ndim() != 2) throw DimensionError("unfold_windows: expects a T x D matrix");
    if (context == 0) throw ArgumentError("unfold_windows: context must be positive");
    const std::size_t t = x.dim(0), d = x.dim(1);
    if (t < context) throw ArgumentError("unfold_windows: fewer frames than context");
    const std::size_t n = t - context + 1;
    Tensor out(Shape{n, context * d});
    for (std::size_t i = 0; i < n; ++i)
        std::memcpy(out.data() + i * context * d, x.data() + i * d,
                    context * d * sizeof(double));
    if (track(tape, {&x})) {
        out.set_requires_grad(true);
        tape.record([x = x, out, n, d, context]() mutable {
            const double* g = out.grad();
            if (!g) return;
            auto& gx = x.grad_storage();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < context * d; ++j) gx[i * d + j] += g[i * context * d + j];
        });
    }
    return out;
}

Tensor stack_as_batch(Tape& tape, const std::vector<Tensor>& mats) {
    if (mats.empty()) throw ArgumentError("stack_as_batch: empty input");
    const std::size_t h = mats[0].dim(0), w = mats[0].dim(1);
    for (const Tensor& m : mats)
        if (m.ndim() != 2 || m.dim(0) != h || m.dim(1) != w)
            throw DimensionError("stack_as_batch: matrices must share one shape");
    const std::size_t bsz = mats.size();
    Tensor out(Shape{bsz, 1, h, w});
    for (std::size_t b = 0; b < bsz; ++b)
        std::memcpy(out.data() + b * h * w, mats[b].data(), h * w * sizeof(double));
    bool any = false;
    for (const Tensor& m : mats) any = any || (tape.recording() && m.requires_grad());
    if (any) {
        out.set_requires_grad(true);
        tape.record([mats = mats, out, h, w = w]() mutable {
            const double* g = out.grad();
            if (!g) return;
            for (std::size_t b = 0; b < mats.size(); ++b) {
                if (!mats[b].requires_grad()) continue;
                auto& gm = mats[b].grad_storage();
                for (std::size_t i = 0; i < h * w; ++i) gm[i] += g[b * h * w + i];
            }
        });
    }
    return out;
}

}  // namespace syncmatrix::ops
