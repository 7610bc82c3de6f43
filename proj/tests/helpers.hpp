#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "naln/rng.hpp"
#include "naln/tensor.hpp"

namespace testutil {

// Central finite difference of a scalar-valued forward pass with respect to
// one coordinate of `storage`. The forward pass must re-read storage on every
// call (define-by-run), so perturbing in place is enough.
inline double central_difference(const std::function<double()>& forward, std::vector<double>& storage,
                                 std::size_t i, double h = 1e-5) {
    const double orig = storage[i];
    storage[i] = orig + h;
    const double fp = forward();
    storage[i] = orig - h;
    const double fm = forward();
    storage[i] = orig;
    return (fp - fm) / (2.0 * h);
}

// |a-b| relative to the larger magnitude, floored so finite-difference noise
// on true-zero gradients does not register.
inline double grad_rel_err(double analytic, double numeric) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-3});
    return std::fabs(analytic - numeric) / denom;
}

// Runs `forward` once with a tape to get analytic gradients of every tensor in
// `params`, then checks each coordinate against central differences of the
// same forward pass. Returns the worst relative error seen.
inline double check_gradients(const std::vector<naln::Tensor>& params,
                              const std::function<naln::Tensor(naln::Tape*)>& forward, double h = 1e-5) {
    for (const naln::Tensor& p : params) {
        const_cast<naln::Tensor&>(p).set_requires_grad(true);
        const_cast<naln::Tensor&>(p).zero_grad();
    }
    naln::Tape tape;
    naln::Tensor loss = forward(&tape);
    naln::backward(loss, tape);

    auto eval = [&forward]() { return forward(nullptr).value(); };
    double worst = 0.0;
    for (const naln::Tensor& p : params) {
        std::vector<double>& storage = const_cast<naln::Tensor&>(p).mutable_data();
        for (std::size_t i = 0; i < storage.size(); ++i) {
            const double numeric = central_difference(eval, storage, i, h);
            const double analytic = p.has_grad() ? p.grad()[i] : 0.0;
            worst = std::max(worst, grad_rel_err(analytic, numeric));
        }
    }
    return worst;
}

inline naln::Tensor random_tensor(std::vector<std::size_t> dims, naln::Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
    naln::Tensor t = naln::Tensor::zeros(std::move(dims));
    for (double& v : t.mutable_data()) v = rng.uniform(lo, hi);
    return t;
}

}  // namespace testutil
