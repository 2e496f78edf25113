#include "hyperquant/hypernet.hpp"

#include <cmath>

#include "hyperquant/errors.hpp"
#include "hyperquant/quantizer.hpp"
#include "hyperquant/rng.hpp"

namespace hq {

namespace {

TensorPtr fanin_uniform(std::vector<int> shape, int fan_in, Rng& rng) {
    auto t = make_tensor(std::move(shape));
    const float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
    for (auto& v : t->data) v = rng.uniform_real(-bound, bound);
    return t;
}

double tensor_std(const std::vector<float>& v) {
    double sum = 0.0, sum2 = 0.0;
    for (float x : v) {
        sum += x;
        sum2 += static_cast<double>(x) * x;
    }
    const double mean = sum / static_cast<double>(v.size());
    return std::sqrt(std::max(0.0, sum2 / static_cast<double>(v.size()) - mean * mean));
}

// Trunk of the block without tape bookkeeping; returns h2.
std::vector<float> block_h2(const HyperBlock& block, int bits, int hidden) {
    const float code = static_cast<float>(bits) / static_cast<float>(kMaxBits);
    std::vector<float> h1(static_cast<size_t>(hidden));
    for (int i = 0; i < hidden; ++i) {
        const float v = block.fc1_w->data[static_cast<size_t>(i)] * code + block.fc1_b->data[static_cast<size_t>(i)];
        h1[static_cast<size_t>(i)] = v > 0.0f ? v : 0.0f;
    }
    std::vector<float> h2(static_cast<size_t>(hidden));
    for (int i = 0; i < hidden; ++i) {
        double acc = block.fc2_b->data[static_cast<size_t>(i)];
        for (int j = 0; j < hidden; ++j)
            acc += static_cast<double>(block.fc2_w->data[static_cast<size_t>(i) * hidden + j]) * h1[static_cast<size_t>(j)];
        h2[static_cast<size_t>(i)] = acc > 0.0 ? static_cast<float>(acc) : 0.0f;
    }
    return h2;
}

std::vector<float> block_w_float(const HyperBlock& block, const std::vector<float>& h2, int hidden) {
    const size_t n = block.head_w_b->data.size();
    std::vector<float> w(n);
    for (size_t i = 0; i < n; ++i) {
        double acc = block.head_w_b->data[i];
        for (int j = 0; j < hidden; ++j)
            acc += static_cast<double>(block.head_w_w->data[i * static_cast<size_t>(hidden) + static_cast<size_t>(j)]) *
                   h2[static_cast<size_t>(j)];
        w[i] = static_cast<float>(acc);
    }
    return w;
}

}  // namespace

std::vector<TensorPtr> HyperNet::parameters() const {
    std::vector<TensorPtr> params;
    for (const auto& b : blocks) {
        params.insert(params.end(), {b.fc1_w, b.fc1_b, b.fc2_w, b.fc2_b, b.head_w_w, b.head_w_b, b.head_g_w, b.head_g_b});
    }
    for (const auto& bias : layer_biases) params.push_back(bias);
    return params;
}

std::vector<std::string> HyperNet::parameter_names() const {
    std::vector<std::string> names;
    for (size_t i = 0; i < blocks.size(); ++i) {
        const std::string p = "block" + std::to_string(i) + ".";
        for (const char* field : {"fc1.w", "fc1.b", "fc2.w", "fc2.b", "head_w.w", "head_w.b", "head_g.w", "head_g.b"})
            names.push_back(p + field);
    }
    for (size_t i = 0; i < layer_biases.size(); ++i) names.push_back("layer" + std::to_string(i) + ".bias");
    return names;
}

void HyperNet::set_requires_grad(bool on) {
    for (auto& p : parameters()) p->requires_grad = on;
}

HyperNet HyperNet::clone() const {
    const auto deep = [](const TensorPtr& t) {
        auto copy = make_tensor(t->shape);
        copy->data = t->data;
        copy->requires_grad = t->requires_grad;
        return copy;
    };
    HyperNet out;
    out.hidden = hidden;
    out.delta = delta;
    out.bit_min = bit_min;
    out.bit_max = bit_max;
    out.mode = mode;
    for (const auto& b : blocks) {
        HyperBlock nb;
        nb.fc1_w = deep(b.fc1_w);
        nb.fc1_b = deep(b.fc1_b);
        nb.fc2_w = deep(b.fc2_w);
        nb.fc2_b = deep(b.fc2_b);
        nb.head_w_w = deep(b.head_w_w);
        nb.head_w_b = deep(b.head_w_b);
        nb.head_g_w = deep(b.head_g_w);
        nb.head_g_b = deep(b.head_g_b);
        nb.weight_shape = b.weight_shape;
        out.blocks.push_back(std::move(nb));
    }
    for (const auto& bias : layer_biases) out.layer_biases.push_back(deep(bias));
    return out;
}

HyperNet make_hypernet(const TargetNetSpec& spec, int hidden, float delta, int bit_min, int bit_max, uint64_t seed) {
    if (hidden < 1) throw config_error("make_hypernet: hidden width must be positive");
    if (delta <= 0.0f) throw config_error("make_hypernet: delta must be positive");
    if (bit_min < kMinBits || bit_max > kMaxBits || bit_min > bit_max) {
        throw config_error("make_hypernet: bit range [" + std::to_string(bit_min) + "," + std::to_string(bit_max) +
                           "] invalid");
    }
    for (const auto& layer : spec.layers) {
        if (!layer.quantizable) {
            throw config_error("make_hypernet: layer " + std::to_string(layer.index) +
                               " is not quantizable; generator requires all-quantizable targets");
        }
    }

    HyperNet net;
    net.hidden = hidden;
    net.delta = delta;
    net.bit_min = bit_min;
    net.bit_max = bit_max;
    Rng rng(seed);
    const int q_mid = (bit_min + bit_max + 1) / 2;
    for (const auto& layer : spec.layers) {
        const int n = static_cast<int>(layer.weight_count);
        HyperBlock block;
        block.fc1_w = fanin_uniform({hidden, 1}, 1, rng);
        block.fc1_b = fanin_uniform({hidden}, 1, rng);
        block.fc2_w = fanin_uniform({hidden, hidden}, hidden, rng);
        block.fc2_b = fanin_uniform({hidden}, hidden, rng);
        block.head_w_w = fanin_uniform({n, hidden}, hidden, rng);
        block.head_w_b = fanin_uniform({n}, hidden, rng);
        block.head_g_w = make_tensor({1, hidden}, 0.0f);  // scale head starts as exact identity
        block.head_g_b = make_tensor({1}, 1.0f);
        block.weight_shape = layer.weight_shape;

        // Calibrate the weight head so freshly generated weights carry the
        // variance the target layer needs; without this the stacked target
        // either saturates or goes silent and gradient never reaches the
        // generator.
        const int target_fanin = layer.kind == LayerSpec::Kind::dense
                                     ? layer.weight_shape[1]
                                     : layer.weight_shape[1] * layer.weight_shape[2] * layer.weight_shape[3];
        const double want_std = layer.activation == LayerSpec::Activation::relu
                                    ? std::sqrt(2.0 / target_fanin)
                                    : std::sqrt(1.0 / target_fanin);
        {
            auto h2 = block_h2(block, q_mid, hidden);
            const double s = tensor_std(block_w_float(block, h2, hidden));
            if (s > 1e-12) {
                const float gain = static_cast<float>(want_std / s);
                for (auto& v : block.head_w_w->data) v *= gain;
                for (auto& v : block.head_w_b->data) v *= gain;
            }
        }

        net.blocks.push_back(std::move(block));
        net.layer_biases.push_back(make_tensor({layer.weight_shape[0]}, 0.0f));
    }
    net.set_requires_grad(true);
    return net;
}

TensorPtr block_forward(Tape& tape, const HyperBlock& block, int bits, float delta, QuantMode mode) {
    validate_bits(bits);
    // scalar code, normalized so first-layer activations stay scale-stable
    auto code = make_tensor({1, 1}, {static_cast<float>(bits) / static_cast<float>(kMaxBits)});
    auto h1 = tape.relu(tape.add_row_bias(tape.matmul_nt(code, block.fc1_w), block.fc1_b));
    auto h2 = tape.relu(tape.add_row_bias(tape.matmul_nt(h1, block.fc2_w), block.fc2_b));
    auto w_float = tape.add_row_bias(tape.matmul_nt(h2, block.head_w_w), block.head_w_b);
    auto gamma = tape.add_row_bias(tape.matmul_nt(h2, block.head_g_w), block.head_g_b);
    auto w_hat = mode == QuantMode::active ? tape.quantize_ste(w_float, bits, delta) : w_float;
    return tape.reshape(tape.mul_scalar(w_hat, gamma), block.weight_shape);
}

std::vector<TensorPtr> generate_weights(Tape& tape, const HyperNet& net, const BitwidthPolicy& policy) {
    policy.validate(static_cast<int>(net.blocks.size()), net.bit_min, net.bit_max);
    std::vector<TensorPtr> weights;
    weights.reserve(net.blocks.size());
    for (size_t i = 0; i < net.blocks.size(); ++i) {
        weights.push_back(block_forward(tape, net.blocks[i], policy.bits[i], net.delta, net.mode));
    }
    return weights;
}

TensorPtr hypernet_forward(Tape& tape, const HyperNet& net, const TargetNetSpec& spec, const BitwidthPolicy& policy,
                           const TensorPtr& batch) {
    auto weights = generate_weights(tape, net, policy);
    return forward_with_weights(tape, spec, weights, net.layer_biases, batch);
}

}  // namespace hq
