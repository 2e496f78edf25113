#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperquant/policy.hpp"
#include "hyperquant/tape.hpp"
#include "hyperquant/target_net.hpp"
#include "hyperquant/tensor.hpp"

namespace hq {

// Replaces the in-graph quantizer with a plain identity; used for the float
// baseline and for finite-difference gradient checks.
enum class QuantMode { active, identity };

// Per-layer weight generator: a three-stage fully connected net driven by the
// layer's bitwidth code, with a weight head feeding the quantizer and a
// scalar scale head multiplying the quantized output.
struct HyperBlock {
    TensorPtr fc1_w, fc1_b;          // [h,1], [h]
    TensorPtr fc2_w, fc2_b;          // [h,h], [h]
    TensorPtr head_w_w, head_w_b;    // [n,h], [n]
    TensorPtr head_g_w, head_g_b;    // [1,h], [1]
    std::vector<int> weight_shape;   // target layer shape for the final reshape

    int64_t weight_count() const { return shape_size(weight_shape); }
};

// The full weight generator: one block per quantizable target layer, plus the
// target layers' full-precision bias vectors (trained directly, never
// generated, excluded from size accounting).
struct HyperNet {
    std::vector<HyperBlock> blocks;
    std::vector<TensorPtr> layer_biases;  // one per target layer (all layers)
    int hidden = 64;
    float delta = 1.0f;  // STE pass-through band
    int bit_min = 1;
    int bit_max = 8;
    QuantMode mode = QuantMode::active;

    // All trainable tensors in a stable order, paired with stable names
    // (used by the optimizer state and the checkpoint format).
    std::vector<TensorPtr> parameters() const;
    std::vector<std::string> parameter_names() const;

    void set_requires_grad(bool on);

    // Deep copy: fresh parameter tensors, gradients dropped. Plain copies
    // share tensors and would alias training state.
    HyperNet clone() const;
};

// Builds a generator for `spec` with fan-in uniform init for the trunk and
// weight head; the scale head starts as the exact identity (weights 0,
// bias 1).
HyperNet make_hypernet(const TargetNetSpec& spec, int hidden, float delta, int bit_min, int bit_max, uint64_t seed);

// One block forward: bits -> quantized, scaled, reshaped weight tensor.
// Throws config_error if bits is outside the net's active range.
TensorPtr block_forward(Tape& tape, const HyperBlock& block, int bits, float delta, QuantMode mode);

// One weight tensor per quantizable layer; block i sees only policy.bits[i].
std::vector<TensorPtr> generate_weights(Tape& tape, const HyperNet& net, const BitwidthPolicy& policy);

// Weight list expanded to all target layers (non-quantizable layers are not
// supported by the builtin specs, so this is currently the same list), plus
// the net's bias tensors, run through the target network.
TensorPtr hypernet_forward(Tape& tape, const HyperNet& net, const TargetNetSpec& spec, const BitwidthPolicy& policy,
                           const TensorPtr& batch);

}  // namespace hq
