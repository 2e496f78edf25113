#pragma once

// Shared test-side oracles. These stay independent of the library's compute
// path: the cross entropy here is evaluated fully in doubles, and the
// finite-difference harness divides by the perturbation actually realized in
// f32 storage.

#include <algorithm>
#include <cmath>
#include <vector>

#include "hyperquant/tensor.hpp"

namespace testutil {

// Mean cross entropy over the batch, computed entirely in doubles.
inline double double_cross_entropy(const hq::Tensor& logits, const std::vector<int>& labels) {
    const int n = logits.dim(0), k = logits.dim(1);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const float* row = logits.data.data() + static_cast<size_t>(i) * k;
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
        total += -(static_cast<double>(row[labels[static_cast<size_t>(i)]]) - mx - std::log(denom));
    }
    return total / n;
}

struct GradCheckResult {
    int checked = 0;
    int good = 0;
    double pass_rate() const { return checked ? static_cast<double>(good) / checked : 1.0; }
};

// Central finite differences with h = 1e-3 over every entry of `params`,
// compared against `analytic` (same layout). loss_fn must return a double
// evaluated from the current f32 parameter values. Coordinates where both
// sides are below `threshold` are skipped.
template <typename LossFn>
GradCheckResult gradient_check(LossFn&& loss_fn, const std::vector<hq::TensorPtr>& params,
                               const std::vector<const float*>& analytic, double tol = 1e-3,
                               double threshold = 1e-6) {
    const float h = 1e-3f;
    GradCheckResult result;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        hq::Tensor& p = *params[pi];
        for (size_t i = 0; i < p.data.size(); ++i) {
            const float keep = p.data[i];
            p.data[i] = keep + h;
            const double x_up = p.data[i];
            const double up = loss_fn();
            p.data[i] = keep - h;
            const double x_down = p.data[i];
            const double down = loss_fn();
            p.data[i] = keep;
            const double fd = (up - down) / (x_up - x_down);
            const double an = analytic[pi][i];
            if (std::abs(fd) <= threshold && std::abs(an) <= threshold) continue;
            ++result.checked;
            const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), threshold});
            if (rel <= tol) ++result.good;
        }
    }
    return result;
}

}  // namespace testutil
