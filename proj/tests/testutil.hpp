#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "tecswin/tensor.hpp"

namespace tecswin::testutil {

// Central-difference gradient check. `loss_fn` must recompute the loss from
// the current leaf values on every call. Checks at most `max_per_leaf`
// elements per leaf (deterministic stride) and returns the max relative
// error, with the denominator floored so near-zero gradients compare
// absolutely at f32-appropriate scale.
inline double max_grad_error(const std::function<Tensor()>& loss_fn,
                             std::vector<Tensor> leaves, double h = 1e-3,
                             int64_t max_per_leaf = 64) {
    for (auto& l : leaves) l.zero_grad();
    Tensor loss = loss_fn();
    backward(loss);

    double worst = 0.0;
    for (auto& leaf : leaves) {
        std::vector<float> analytic = leaf.grad();
        auto& w = leaf.mutable_data();
        int64_t n = static_cast<int64_t>(w.size());
        int64_t stride = n <= max_per_leaf ? 1 : n / max_per_leaf;
        for (int64_t i = 0; i < n; i += stride) {
            float keep = w[i];
            w[i] = keep + static_cast<float>(h);
            double up = loss_fn().item();
            w[i] = keep - static_cast<float>(h);
            double dn = loss_fn().item();
            w[i] = keep;
            double fd = (up - dn) / (2.0 * h);
            double g = analytic[i];
            double denom = std::max({std::abs(fd), std::abs(g), 0.05});
            worst = std::max(worst, std::abs(fd - g) / denom);
        }
    }
    return worst;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, static_cast<double>(std::abs(a.data()[i] - b.data()[i])));
    return m;
}

}  // namespace tecswin::testutil
