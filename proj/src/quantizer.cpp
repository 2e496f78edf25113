#include "hyperquant/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hyperquant/errors.hpp"

namespace hq {

void validate_bits(int q) {
    if (q < kMinBits || q > kMaxBits) {
        throw config_error("bitwidth " + std::to_string(q) + " outside [" + std::to_string(kMinBits) + "," +
                           std::to_string(kMaxBits) + "]");
    }
}

Tensor quantize_unit(const Tensor& x, int q) {
    validate_bits(q);
    const double levels = static_cast<double>((1 << q) - 1);
    Tensor out(x.shape);
    for (size_t i = 0; i < x.data.size(); ++i) {
        const double v = std::clamp(static_cast<double>(x.data[i]), 0.0, 1.0);
        out.data[i] = static_cast<float>(std::round(v * levels) / levels);
    }
    return out;
}

std::pair<Tensor, ScaleParams> scale_minmax(const Tensor& w) {
    if (w.data.empty()) throw input_error("scale_minmax: empty tensor");
    const auto [mn, mx] = std::minmax_element(w.data.begin(), w.data.end());
    ScaleParams params{*mx - *mn, *mn};
    Tensor scaled(w.shape);
    if (params.range > 0.0f) {
        const double inv = 1.0 / static_cast<double>(params.range);
        const double offset = static_cast<double>(params.offset);
        for (size_t i = 0; i < w.data.size(); ++i)
            scaled.data[i] = static_cast<float>((static_cast<double>(w.data[i]) - offset) * inv);
    }
    return {std::move(scaled), params};
}

Tensor quantize_weights(const Tensor& w, int q) {
    validate_bits(q);
    if (w.data.empty()) throw input_error("quantize_weights: empty tensor");
    const auto [mn, mx] = std::minmax_element(w.data.begin(), w.data.end());
    const double offset = static_cast<double>(*mn);
    const double range = static_cast<double>(*mx) - offset;
    Tensor out(w.shape);
    if (range == 0.0) {
        out.data = w.data;  // constant tensor is representable at any bitwidth
        return out;
    }
    const double levels = static_cast<double>((1 << q) - 1);
    for (size_t i = 0; i < w.data.size(); ++i) {
        const double u = std::clamp((static_cast<double>(w.data[i]) - offset) / range, 0.0, 1.0);
        const double k = std::round(u * levels);
        out.data[i] = static_cast<float>(range * (k / levels) + offset);
    }
    return out;
}

Tensor ste_backward(const Tensor& upstream, const Tensor& w, float delta) {
    if (!upstream.same_shape(w)) {
        throw shape_error("ste_backward: upstream shape " + shape_str(upstream.shape) + " != input shape " +
                          shape_str(w.shape));
    }
    Tensor out(w.shape);
    for (size_t i = 0; i < w.data.size(); ++i) out.data[i] = std::fabs(w.data[i]) < delta ? upstream.data[i] : 0.0f;
    return out;
}

}  // namespace hq
