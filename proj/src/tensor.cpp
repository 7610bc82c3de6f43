#include "naln/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "naln/errors.hpp"
#include "naln/parallel.hpp"

namespace naln {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

std::string dims_to_string(const std::vector<std::size_t>& dims) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < dims.size(); ++i) os << (i ? "x" : "") << dims[i];
    os << "]";
    return os.str();
}

static std::size_t dims_product(const std::vector<std::size_t>& dims) {
    std::size_t p = 1;
    for (std::size_t d : dims) p *= d;
    return p;
}

Tensor Tensor::zeros(std::vector<std::size_t> dims) {
    Tensor t;
    t.node_->data.assign(dims_product(dims), 0.0);
    t.node_->dims = std::move(dims);
    return t;
}

Tensor Tensor::full(std::vector<std::size_t> dims, double value) {
    Tensor t = zeros(std::move(dims));
    std::fill(t.node_->data.begin(), t.node_->data.end(), value);
    return t;
}

Tensor Tensor::from(std::vector<std::size_t> dims, std::vector<double> data) {
    if (dims_product(dims) != data.size())
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match dims " + dims_to_string(dims));
    Tensor t;
    t.node_->dims = std::move(dims);
    t.node_->data = std::move(data);
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t;
    t.node_->data = {value};
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t = zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.node_->data[i * n + i] = 1.0;
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= node_->dims.size())
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + dims_to_string(node_->dims));
    return node_->dims[axis];
}

double Tensor::value() const {
    if (size() != 1) throw ContractError("value() requires a scalar tensor, got " + dims_to_string(dims()));
    return node_->data[0];
}

double Tensor::at(std::size_t i) const { return node_->data.at(i); }

double Tensor::at(std::size_t i, std::size_t j) const {
    if (rank() != 2) throw ShapeError("at(i,j) requires rank 2, got " + dims_to_string(dims()));
    return node_->data.at(i * node_->dims[1] + j);
}

const std::vector<double>& Tensor::grad() const {
    if (node_->grad.empty()) throw ContractError("gradient not populated; run backward first");
    return node_->grad;
}

bool Tensor::all_finite() const {
    for (double v : node_->data)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tape::run_backward() {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

void backward(const Tensor& loss, Tape& tape) {
    if (loss.size() != 1)
        throw ContractError("backward requires a scalar loss, got " + dims_to_string(loss.dims()));
    loss.node()->grad.assign(1, 1.0);
    tape.run_backward();
}

// --- recording helpers ------------------------------------------------------

static bool want_grad(Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

static void mark_output(Tensor& out, bool recorded) { out.set_requires_grad(recorded); }

// Upstream gradient of `out`, or nullptr when no downstream path touched it.
static const std::vector<double>* upstream(const NodePtr& out) {
    if (out->grad.empty()) return nullptr;
    return &out->grad;
}

// --- matmul ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul requires rank-2 operands, got " + dims_to_string(a.dims()) + " and " +
                         dims_to_string(b.dims()));
    const std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul inner dims differ: " + dims_to_string(a.dims()) + " vs " + dims_to_string(b.dims()));

    Tensor out = Tensor::zeros({m, n});
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* pc = out.mutable_data().data();
    parallel_for(m, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t t = 0; t < k; ++t) {
                const double av = pa[i * k + t];
                if (av == 0.0) continue;
                const double* brow = pb + t * n;
                double* crow = pc + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    });

    const bool rec = want_grad(tape, {&a, &b});
    mark_output(out, rec);
    if (rec) {
        NodePtr na = a.node(), nb = b.node(), nc = out.node();
        tape->record([na, nb, nc, m, k, n] {
            const std::vector<double>* g = upstream(nc);
            if (!g) return;
            if (na->requires_grad) {
                na->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double gv = (*g)[i * n + j];
                        if (gv == 0.0) continue;
                        for (std::size_t t = 0; t < k; ++t) na->grad[i * k + t] += gv * nb->data[t * n + j];
                    }
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t t = 0; t < k; ++t) {
                        const double av = na->data[i * k + t];
                        if (av == 0.0) continue;
                        for (std::size_t j = 0; j < n; ++j) nb->grad[t * n + j] += av * (*g)[i * n + j];
                    }
            }
        });
    }
    return out;
}

// --- convolutions ------------------------------------------------------------

Tensor conv_temporal(const Tensor& x, const Tensor& kernel, std::size_t stride, Tape* tape) {
    if (x.rank() != 2) throw ShapeError("conv_temporal input must be C×T, got " + dims_to_string(x.dims()));
    if (kernel.rank() != 3 || kernel.dim(1) != 1)
        throw ShapeError("conv_temporal kernel must be F×1×K, got " + dims_to_string(kernel.dims()));
    if (stride == 0) throw ParameterError("conv_temporal stride must be positive");
    const std::size_t c = x.dim(0), t = x.dim(1);
    const std::size_t f = kernel.dim(0), k = kernel.dim(2);
    if (k > t)
        throw ShapeError("conv_temporal kernel width " + std::to_string(k) + " exceeds input length " +
                         std::to_string(t));
    const std::size_t tout = (t - k) / stride + 1;

    Tensor out = Tensor::zeros({f * c, tout});
    const double* px = x.data().data();
    const double* pk = kernel.data().data();
    double* po = out.mutable_data().data();
    parallel_for(f * c, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t oc = lo; oc < hi; ++oc) {
            const std::size_t fi = oc / c, ci = oc % c;
            const double* xrow = px + ci * t;
            const double* krow = pk + fi * k;
            double* orow = po + oc * tout;
            for (std::size_t to = 0; to < tout; ++to) {
                double acc = 0.0;
                const double* xs = xrow + to * stride;
                for (std::size_t kk = 0; kk < k; ++kk) acc += xs[kk] * krow[kk];
                orow[to] = acc;
            }
        }
    });

    const bool rec = want_grad(tape, {&x, &kernel});
    mark_output(out, rec);
    if (rec) {
        NodePtr nx = x.node(), nk = kernel.node(), no = out.node();
        tape->record([nx, nk, no, c, t, f, k, tout, stride] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            if (nx->requires_grad) nx->ensure_grad();
            if (nk->requires_grad) nk->ensure_grad();
            for (std::size_t fi = 0; fi < f; ++fi)
                for (std::size_t ci = 0; ci < c; ++ci) {
                    const std::size_t oc = fi * c + ci;
                    for (std::size_t to = 0; to < tout; ++to) {
                        const double gv = (*g)[oc * tout + to];
                        if (gv == 0.0) continue;
                        const std::size_t base = to * stride;
                        for (std::size_t kk = 0; kk < k; ++kk) {
                            if (nx->requires_grad) nx->grad[ci * t + base + kk] += gv * nk->data[fi * k + kk];
                            if (nk->requires_grad) nk->grad[fi * k + kk] += gv * nx->data[ci * t + base + kk];
                        }
                    }
                }
        });
    }
    return out;
}

Tensor conv_spatial(const Tensor& x, const Tensor& kernel, Tape* tape) {
    if (x.rank() != 2) throw ShapeError("conv_spatial input must be C×T, got " + dims_to_string(x.dims()));
    if (kernel.rank() != 3 || kernel.dim(2) != 1)
        throw ShapeError("conv_spatial kernel must be F×C×1, got " + dims_to_string(kernel.dims()));
    const std::size_t c = x.dim(0), t = x.dim(1), f = kernel.dim(0);
    if (kernel.dim(1) != c)
        throw ShapeError("conv_spatial kernel channel axis " + std::to_string(kernel.dim(1)) +
                         " does not span input channels " + std::to_string(c));

    Tensor out = Tensor::zeros({f, t});
    const double* px = x.data().data();
    const double* pk = kernel.data().data();
    double* po = out.mutable_data().data();
    parallel_for(f, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t fi = lo; fi < hi; ++fi) {
            double* orow = po + fi * t;
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double w = pk[fi * c + ci];
                if (w == 0.0) continue;
                const double* xrow = px + ci * t;
                for (std::size_t ti = 0; ti < t; ++ti) orow[ti] += w * xrow[ti];
            }
        }
    });

    const bool rec = want_grad(tape, {&x, &kernel});
    mark_output(out, rec);
    if (rec) {
        NodePtr nx = x.node(), nk = kernel.node(), no = out.node();
        tape->record([nx, nk, no, c, t, f] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            if (nx->requires_grad) {
                nx->ensure_grad();
                for (std::size_t ci = 0; ci < c; ++ci)
                    for (std::size_t fi = 0; fi < f; ++fi) {
                        const double w = nk->data[fi * c + ci];
                        if (w == 0.0) continue;
                        for (std::size_t ti = 0; ti < t; ++ti) nx->grad[ci * t + ti] += w * (*g)[fi * t + ti];
                    }
            }
            if (nk->requires_grad) {
                nk->ensure_grad();
                for (std::size_t fi = 0; fi < f; ++fi)
                    for (std::size_t ci = 0; ci < c; ++ci) {
                        double acc = 0.0;
                        for (std::size_t ti = 0; ti < t; ++ti) acc += (*g)[fi * t + ti] * nx->data[ci * t + ti];
                        nk->grad[fi * c + ci] += acc;
                    }
            }
        });
    }
    return out;
}

// --- elementwise -------------------------------------------------------------

namespace {

// y = f(x); dfdx evaluated from (x, y) so clamped regions get zero slope.
Tensor unary_op(const Tensor& x, Tape* tape, double (*f)(double), double (*dfdx)(double, double)) {
    Tensor out = Tensor::zeros(x.dims());
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out.mutable_data()[i] = f(x.data()[i]);

    const bool rec = want_grad(tape, {&x});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr nx = x.node(), no = out.node();
        tape->record([nx, no, dfdx, n] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            nx->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) nx->grad[i] += (*g)[i] * dfdx(nx->data[i], no->data[i]);
        });
    }
    return out;
}

constexpr double kExpClamp = 80.0;
constexpr double kLogFloor = 1e-12;

}  // namespace

Tensor relu(const Tensor& x, Tape* tape) {
    return unary_op(
        x, tape, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& x, Tape* tape) {
    return unary_op(
        x, tape, [](double v) { return v > 0.0 ? v : std::expm1(v); },
        [](double v, double y) { return v > 0.0 ? 1.0 : y + 1.0; });
}

Tensor tanh_op(const Tensor& x, Tape* tape) {
    return unary_op(
        x, tape, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor negate(const Tensor& x, Tape* tape) {
    return unary_op(
        x, tape, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor exp_op(const Tensor& x, Tape* tape) {
    return unary_op(
        x, tape, [](double v) { return std::exp(v > kExpClamp ? kExpClamp : v); },
        [](double v, double y) { return v > kExpClamp ? 0.0 : y; });
}

Tensor log_op(const Tensor& x, Tape* tape) {
    return unary_op(
        x, tape, [](double v) { return std::log(v < kLogFloor ? kLogFloor : v); },
        [](double v, double) { return v < kLogFloor ? 0.0 : 1.0 / v; });
}

Tensor scale(const Tensor& x, double c, Tape* tape) {
    Tensor out = Tensor::zeros(x.dims());
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) out.mutable_data()[i] = c * x.data()[i];
    const bool rec = want_grad(tape, {&x});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr nx = x.node(), no = out.node();
        tape->record([nx, no, c, n] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            nx->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) nx->grad[i] += c * (*g)[i];
        });
    }
    return out;
}

namespace {

void check_same_dims(const Tensor& a, const Tensor& b, const char* op) {
    if (a.dims() != b.dims())
        throw ShapeError(std::string(op) + " dims differ: " + dims_to_string(a.dims()) + " vs " +
                         dims_to_string(b.dims()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
    check_same_dims(a, b, "add");
    Tensor out = Tensor::zeros(a.dims());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.mutable_data()[i] = a.data()[i] + b.data()[i];
    const bool rec = want_grad(tape, {&a, &b});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr na = a.node(), nb = b.node(), no = out.node();
        tape->record([na, nb, no, n] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            if (na->requires_grad) {
                na->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) na->grad[i] += (*g)[i];
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) nb->grad[i] += (*g)[i];
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b, Tape* tape) {
    check_same_dims(a, b, "sub");
    Tensor out = Tensor::zeros(a.dims());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.mutable_data()[i] = a.data()[i] - b.data()[i];
    const bool rec = want_grad(tape, {&a, &b});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr na = a.node(), nb = b.node(), no = out.node();
        tape->record([na, nb, no, n] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            if (na->requires_grad) {
                na->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) na->grad[i] += (*g)[i];
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) nb->grad[i] -= (*g)[i];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
    check_same_dims(a, b, "mul");
    Tensor out = Tensor::zeros(a.dims());
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) out.mutable_data()[i] = a.data()[i] * b.data()[i];
    const bool rec = want_grad(tape, {&a, &b});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr na = a.node(), nb = b.node(), no = out.node();
        tape->record([na, nb, no, n] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            if (na->requires_grad) {
                na->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) na->grad[i] += (*g)[i] * nb->data[i];
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) nb->grad[i] += (*g)[i] * na->data[i];
            }
        });
    }
    return out;
}

Tensor scale_channels(const Tensor& x, const Tensor& gain, Tape* tape) {
    if (x.rank() != 2 || gain.rank() != 1 || gain.dim(0) != x.dim(0))
        throw ShapeError("scale_channels needs C×T and C, got " + dims_to_string(x.dims()) + " and " +
                         dims_to_string(gain.dims()));
    const std::size_t c = x.dim(0), t = x.dim(1);
    Tensor out = Tensor::zeros(x.dims());
    for (std::size_t ci = 0; ci < c; ++ci) {
        const double gv = gain.data()[ci];
        for (std::size_t ti = 0; ti < t; ++ti) out.mutable_data()[ci * t + ti] = gv * x.data()[ci * t + ti];
    }
    const bool rec = want_grad(tape, {&x, &gain});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr nx = x.node(), ng = gain.node(), no = out.node();
        tape->record([nx, ng, no, c, t] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            if (nx->requires_grad) {
                nx->ensure_grad();
                for (std::size_t ci = 0; ci < c; ++ci)
                    for (std::size_t ti = 0; ti < t; ++ti)
                        nx->grad[ci * t + ti] += (*g)[ci * t + ti] * ng->data[ci];
            }
            if (ng->requires_grad) {
                ng->ensure_grad();
                for (std::size_t ci = 0; ci < c; ++ci) {
                    double acc = 0.0;
                    for (std::size_t ti = 0; ti < t; ++ti) acc += (*g)[ci * t + ti] * nx->data[ci * t + ti];
                    ng->grad[ci] += acc;
                }
            }
        });
    }
    return out;
}

Tensor add_channels(const Tensor& x, const Tensor& bias, Tape* tape) {
    if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(0))
        throw ShapeError("add_channels needs C×T and C, got " + dims_to_string(x.dims()) + " and " +
                         dims_to_string(bias.dims()));
    const std::size_t c = x.dim(0), t = x.dim(1);
    Tensor out = Tensor::zeros(x.dims());
    for (std::size_t ci = 0; ci < c; ++ci) {
        const double bv = bias.data()[ci];
        for (std::size_t ti = 0; ti < t; ++ti) out.mutable_data()[ci * t + ti] = x.data()[ci * t + ti] + bv;
    }
    const bool rec = want_grad(tape, {&x, &bias});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr nx = x.node(), nb = bias.node(), no = out.node();
        tape->record([nx, nb, no, c, t] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            if (nx->requires_grad) {
                nx->ensure_grad();
                for (std::size_t i = 0; i < c * t; ++i) nx->grad[i] += (*g)[i];
            }
            if (nb->requires_grad) {
                nb->ensure_grad();
                for (std::size_t ci = 0; ci < c; ++ci) {
                    double acc = 0.0;
                    for (std::size_t ti = 0; ti < t; ++ti) acc += (*g)[ci * t + ti];
                    nb->grad[ci] += acc;
                }
            }
        });
    }
    return out;
}

Tensor avg_pool1d(const Tensor& x, std::size_t width, std::size_t stride, Tape* tape) {
    if (x.rank() != 2) throw ShapeError("avg_pool1d input must be C×T, got " + dims_to_string(x.dims()));
    if (width == 0 || stride == 0) throw ParameterError("avg_pool1d width and stride must be positive");
    const std::size_t c = x.dim(0), t = x.dim(1);
    if (width > t)
        throw ShapeError("avg_pool1d width " + std::to_string(width) + " exceeds input length " + std::to_string(t));
    const std::size_t tout = (t - width) / stride + 1;
    const double inv = 1.0 / static_cast<double>(width);

    Tensor out = Tensor::zeros({c, tout});
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t to = 0; to < tout; ++to) {
            double acc = 0.0;
            for (std::size_t k = 0; k < width; ++k) acc += x.data()[ci * t + to * stride + k];
            out.mutable_data()[ci * tout + to] = acc * inv;
        }

    const bool rec = want_grad(tape, {&x});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr nx = x.node(), no = out.node();
        tape->record([nx, no, c, t, tout, width, stride, inv] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            nx->ensure_grad();
            for (std::size_t ci = 0; ci < c; ++ci)
                for (std::size_t to = 0; to < tout; ++to) {
                    const double gv = (*g)[ci * tout + to] * inv;
                    if (gv == 0.0) continue;
                    for (std::size_t k = 0; k < width; ++k) nx->grad[ci * t + to * stride + k] += gv;
                }
        });
    }
    return out;
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> dims, Tape* tape) {
    if (dims_product(dims) != x.size())
        throw ShapeError("reshape to " + dims_to_string(dims) + " incompatible with " + dims_to_string(x.dims()));
    Tensor out = Tensor::from(std::move(dims), x.data());
    const bool rec = want_grad(tape, {&x});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr nx = x.node(), no = out.node();
        const std::size_t n = x.size();
        tape->record([nx, no, n] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            nx->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) nx->grad[i] += (*g)[i];
        });
    }
    return out;
}

Tensor transpose2d(const Tensor& x, Tape* tape) {
    if (x.rank() != 2) throw ShapeError("transpose2d requires rank 2, got " + dims_to_string(x.dims()));
    const std::size_t r = x.dim(0), c = x.dim(1);
    Tensor out = Tensor::zeros({c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.mutable_data()[j * r + i] = x.data()[i * c + j];
    const bool rec = want_grad(tape, {&x});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr nx = x.node(), no = out.node();
        tape->record([nx, no, r, c] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            nx->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) nx->grad[i * c + j] += (*g)[j * r + i];
        });
    }
    return out;
}

Tensor row_stack(const std::vector<Tensor>& rows, Tape* tape) {
    if (rows.empty()) throw ParameterError("row_stack needs at least one row");
    const std::size_t d = rows[0].size();
    for (const Tensor& r : rows) {
        if (r.rank() != 1 || r.size() != d)
            throw ShapeError("row_stack rows must be equal-length vectors, got " + dims_to_string(r.dims()));
    }
    const std::size_t n = rows.size();
    Tensor out = Tensor::zeros({n, d});
    for (std::size_t i = 0; i < n; ++i)
        std::copy(rows[i].data().begin(), rows[i].data().end(), out.mutable_data().begin() + i * d);

    bool rec = false;
    if (tape)
        for (const Tensor& r : rows) rec = rec || r.requires_grad();
    out.set_requires_grad(rec);
    if (rec) {
        std::vector<NodePtr> srcs;
        srcs.reserve(n);
        for (const Tensor& r : rows) srcs.push_back(r.node());
        NodePtr no = out.node();
        tape->record([srcs, no, d] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            for (std::size_t i = 0; i < srcs.size(); ++i) {
                if (!srcs[i]->requires_grad) continue;
                srcs[i]->ensure_grad();
                for (std::size_t j = 0; j < d; ++j) srcs[i]->grad[j] += (*g)[i * d + j];
            }
        });
    }
    return out;
}

Tensor diagonal(const Tensor& x, Tape* tape) {
    if (x.rank() != 2 || x.dim(0) != x.dim(1))
        throw ShapeError("diagonal requires a square matrix, got " + dims_to_string(x.dims()));
    const std::size_t n = x.dim(0);
    Tensor out = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) out.mutable_data()[i] = x.data()[i * n + i];
    const bool rec = want_grad(tape, {&x});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr nx = x.node(), no = out.node();
        tape->record([nx, no, n] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            nx->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) nx->grad[i * n + i] += (*g)[i];
        });
    }
    return out;
}

Tensor logsumexp_rows(const Tensor& x, Tape* tape) {
    if (x.rank() != 2) throw ShapeError("logsumexp_rows requires rank 2, got " + dims_to_string(x.dims()));
    const std::size_t n = x.dim(0), m = x.dim(1);
    if (m == 0) throw ShapeError("logsumexp_rows requires at least one column");
    Tensor out = Tensor::zeros({n});
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = x.data().data() + i * m;
        double mx = row[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += std::exp(row[j] - mx);
        out.mutable_data()[i] = mx + std::log(acc);
    }
    const bool rec = want_grad(tape, {&x});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr nx = x.node(), no = out.node();
        tape->record([nx, no, n, m] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            nx->ensure_grad();
            for (std::size_t i = 0; i < n; ++i) {
                const double gv = (*g)[i];
                if (gv == 0.0) continue;
                const double lse = no->data[i];
                for (std::size_t j = 0; j < m; ++j)
                    nx->grad[i * m + j] += gv * std::exp(nx->data[i * m + j] - lse);
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& x, Tape* tape) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    Tensor out = Tensor::scalar(acc);
    const bool rec = want_grad(tape, {&x});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr nx = x.node(), no = out.node();
        tape->record([nx, no] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            nx->ensure_grad();
            for (double& gv : nx->grad) gv += (*g)[0];
        });
    }
    return out;
}

Tensor mean(const Tensor& x, Tape* tape) {
    if (x.size() == 0) throw ShapeError("mean of empty tensor");
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    const double inv = 1.0 / static_cast<double>(x.size());
    Tensor out = Tensor::scalar(acc * inv);
    const bool rec = want_grad(tape, {&x});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr nx = x.node(), no = out.node();
        tape->record([nx, no, inv] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            nx->ensure_grad();
            for (double& gv : nx->grad) gv += (*g)[0] * inv;
        });
    }
    return out;
}

Tensor cosine_similarity_matrix(const Tensor& w, const Tensor& v, Tape* tape) {
    if (w.rank() != 2 || v.rank() != 2)
        throw ShapeError("cosine_similarity_matrix requires rank-2 operands, got " + dims_to_string(w.dims()) +
                         " and " + dims_to_string(v.dims()));
    if (w.dim(1) != v.dim(1))
        throw ShapeError("cosine_similarity_matrix embedding dims differ: " + dims_to_string(w.dims()) + " vs " +
                         dims_to_string(v.dims()));
    const std::size_t n = w.dim(0), m = v.dim(0), d = w.dim(1);
    if (d == 0) throw ShapeError("cosine_similarity_matrix requires d >= 1");

    auto row_norms = [d](const Tensor& t, const char* which) {
        std::vector<double> norms(t.dim(0));
        for (std::size_t i = 0; i < t.dim(0); ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double x = t.data()[i * d + j];
                acc += x * x;
            }
            const double nrm = std::sqrt(acc);
            if (!(nrm >= 1e-150))
                throw DegenerateInputError(std::string("cosine_similarity_matrix: zero-norm row ") +
                                           std::to_string(i) + " in " + which);
            norms[i] = nrm;
        }
        return norms;
    };
    auto nw = std::make_shared<std::vector<double>>(row_norms(w, "W"));
    auto nv = std::make_shared<std::vector<double>>(row_norms(v, "V"));

    Tensor out = Tensor::zeros({n, m});
    const double* pw = w.data().data();
    const double* pv = v.data().data();
    double* po = out.mutable_data().data();
    parallel_for(n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < d; ++k) acc += pw[i * d + k] * pv[j * d + k];
                // single symmetric division keeps S(W,V) bitwise equal to S(V,W)^T
                po[i * m + j] = acc / ((*nw)[i] * (*nv)[j]);
            }
        }
    });

    const bool rec = want_grad(tape, {&w, &v});
    out.set_requires_grad(rec);
    if (rec) {
        NodePtr wn = w.node(), vn = v.node(), no = out.node();
        tape->record([wn, vn, no, nw, nv, n, m, d] {
            const std::vector<double>* g = upstream(no);
            if (!g) return;
            if (wn->requires_grad) {
                wn->ensure_grad();
                for (std::size_t i = 0; i < n; ++i) {
                    double sdot = 0.0;  // sum_j G_ij * S_ij
                    for (std::size_t j = 0; j < m; ++j) {
                        const double gv = (*g)[i * m + j];
                        if (gv == 0.0) continue;
                        sdot += gv * no->data[i * m + j];
                        const double c = gv / ((*nw)[i] * (*nv)[j]);
                        for (std::size_t k = 0; k < d; ++k) wn->grad[i * d + k] += c * vn->data[j * d + k];
                    }
                    const double c2 = sdot / ((*nw)[i] * (*nw)[i]);
                    if (c2 != 0.0)
                        for (std::size_t k = 0; k < d; ++k) wn->grad[i * d + k] -= c2 * wn->data[i * d + k];
                }
            }
            if (vn->requires_grad) {
                vn->ensure_grad();
                for (std::size_t j = 0; j < m; ++j) {
                    double sdot = 0.0;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double gv = (*g)[i * m + j];
                        if (gv == 0.0) continue;
                        sdot += gv * no->data[i * m + j];
                        const double c = gv / ((*nw)[i] * (*nv)[j]);
                        for (std::size_t k = 0; k < d; ++k) vn->grad[j * d + k] += c * wn->data[i * d + k];
                    }
                    const double c2 = sdot / ((*nv)[j] * (*nv)[j]);
                    if (c2 != 0.0)
                        for (std::size_t k = 0; k < d; ++k) vn->grad[j * d + k] -= c2 * vn->data[j * d + k];
                }
            }
        });
    }
    return out;
}

}  // namespace naln
