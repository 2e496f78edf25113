#pragma once

#include <utility>

#include "hyperquant/tensor.hpp"

namespace hq {

inline constexpr int kMinBits = 1;
inline constexpr int kMaxBits = 8;

struct QuantizerConfig {
    int bits = 8;
    float ste_clip = 1.0f;  // gradient pass-through band
};

// Min-max scaling parameters: scaled = (w - offset) / range.
struct ScaleParams {
    float range = 0.0f;   // w_max - w_min
    float offset = 0.0f;  // w_min
};

// Throws config_error unless kMinBits <= q <= kMaxBits.
void validate_bits(int q);

// Uniform level quantizer on [0,1]: x -> round((2^q-1)*x) / (2^q-1), with
// round-half-away-from-zero ties and inputs clamped to the unit interval.
Tensor quantize_unit(const Tensor& x, int q);

// Min-max normalization to [0,1]. A constant tensor (range 0) maps to all
// zeros and dequantizes back to itself.
std::pair<Tensor, ScaleParams> scale_minmax(const Tensor& w);

// Scale, quantize, dequantize: range * quantize_unit((w-offset)/range) + offset.
// Min and max of w are exact fixed points; the result takes at most 2^q
// distinct values.
Tensor quantize_weights(const Tensor& w, int q);

// Straight-through surrogate gradient: passes upstream where |w| < delta,
// zero elsewhere. `w` is the forward input of the quantizer.
Tensor ste_backward(const Tensor& upstream, const Tensor& w, float delta);

}  // namespace hq
