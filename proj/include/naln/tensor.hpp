#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace naln {

class Tape;

namespace detail {

struct TensorNode {
    std::vector<std::size_t> dims;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until backward touches this node

    std::size_t size() const { return data.size(); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

}  // namespace detail

// Dense row-major binary64 tensor. Copies are shallow handles onto a shared
// node; ops produce fresh nodes. A tensor not referenced by any live Tape is
// safe to share read-only across threads.
class Tensor {
  public:
    Tensor() : node_(std::make_shared<detail::TensorNode>()) {}

    static Tensor zeros(std::vector<std::size_t> dims);
    static Tensor full(std::vector<std::size_t> dims, double value);
    static Tensor from(std::vector<std::size_t> dims, std::vector<double> data);
    static Tensor scalar(double value);
    static Tensor identity(std::size_t n);

    const std::vector<std::size_t>& dims() const { return node_->dims; }
    std::size_t rank() const { return node_->dims.size(); }
    std::size_t size() const { return node_->data.size(); }
    std::size_t dim(std::size_t axis) const;

    const std::vector<double>& data() const { return node_->data; }
    std::vector<double>& mutable_data() { return node_->data; }

    double value() const;  // scalar tensors only
    double at(std::size_t i) const;
    double at(std::size_t i, std::size_t j) const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }

    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<double>& grad() const;
    void zero_grad() { node_->grad.assign(node_->data.size(), 0.0); }

    bool all_finite() const;

    std::shared_ptr<detail::TensorNode> node() const { return node_; }

  private:
    std::shared_ptr<detail::TensorNode> node_;
};

// Reverse-mode tape, rebuilt per forward pass (define-by-run). Nodes are
// appended in forward order; backward() replays them once, in reverse.
class Tape {
  public:
    void record(std::function<void()> backward_step) { nodes_.push_back(std::move(backward_step)); }
    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

    void run_backward();

  private:
    std::vector<std::function<void()>> nodes_;
};

// --- ops -------------------------------------------------------------------
// Every op validates shapes, computes forward, and records a backward rule on
// `tape` when a differentiable input requires grad. Passing tape == nullptr
// runs forward only.

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

// Valid cross-correlation of each input channel with each filter.
// x: C×T, kernel: F×1×K -> (F·C)×T' with out[f*C+c] = xcorr(x[c], kernel[f]).
Tensor conv_temporal(const Tensor& x, const Tensor& kernel, std::size_t stride, Tape* tape = nullptr);

// Per-timepoint projection across the full channel axis.
// x: C×T, kernel: F×C×1 -> F×T.
Tensor conv_spatial(const Tensor& x, const Tensor& kernel, Tape* tape = nullptr);

// Elementwise family.
Tensor relu(const Tensor& x, Tape* tape = nullptr);
Tensor elu(const Tensor& x, Tape* tape = nullptr);
Tensor tanh_op(const Tensor& x, Tape* tape = nullptr);
Tensor negate(const Tensor& x, Tape* tape = nullptr);
Tensor scale(const Tensor& x, double c, Tape* tape = nullptr);
Tensor exp_op(const Tensor& x, Tape* tape = nullptr);  // input clamped to <= 80
Tensor log_op(const Tensor& x, Tape* tape = nullptr);  // input clamped to >= 1e-12
Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

// Broadcast helpers over a C×T map with a length-C vector.
Tensor scale_channels(const Tensor& x, const Tensor& gain, Tape* tape = nullptr);
Tensor add_channels(const Tensor& x, const Tensor& bias, Tape* tape = nullptr);

// Valid average pooling along time. x: C×T -> C×T', T' = floor((T-width)/stride)+1.
Tensor avg_pool1d(const Tensor& x, std::size_t width, std::size_t stride, Tape* tape = nullptr);

Tensor reshape(const Tensor& x, std::vector<std::size_t> dims, Tape* tape = nullptr);
Tensor transpose2d(const Tensor& x, Tape* tape = nullptr);

// Stacks n same-length vectors into an n×d matrix.
Tensor row_stack(const std::vector<Tensor>& rows, Tape* tape = nullptr);

Tensor diagonal(const Tensor& x, Tape* tape = nullptr);       // N×N -> N
Tensor logsumexp_rows(const Tensor& x, Tape* tape = nullptr); // N×M -> N, max-shifted
Tensor sum(const Tensor& x, Tape* tape = nullptr);            // -> scalar
Tensor mean(const Tensor& x, Tape* tape = nullptr);           // -> scalar

// S[i,j] = <w_i, v_j> / (|w_i|·|v_j|). W: N×d, V: M×d -> N×M.
// Rows with zero norm are rejected.
Tensor cosine_similarity_matrix(const Tensor& w, const Tensor& v, Tape* tape = nullptr);

// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. After the call,
// grad(p) holds d(loss)/d(p) for every recorded tensor p.
void backward(const Tensor& loss, Tape& tape);

std::string dims_to_string(const std::vector<std::size_t>& dims);

}  // namespace naln
