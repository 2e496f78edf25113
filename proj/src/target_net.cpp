#include "hyperquant/target_net.hpp"

#include <numeric>

#include "hyperquant/errors.hpp"

namespace hq {

namespace {

// Output channel count of a layer: rows for dense, filters for conv.
int layer_out_units(const LayerSpec& layer) { return layer.weight_shape[0]; }

std::vector<int> layer_output_shape(const LayerSpec& layer, const std::vector<int>& in_shape) {
    if (layer.kind == LayerSpec::Kind::dense) {
        const int64_t flat = shape_size(in_shape);
        const int in = layer.weight_shape[1];
        if (flat != in) {
            throw shape_error("layer " + std::to_string(layer.index) + ": dense expects " + std::to_string(in) +
                              " inputs but previous layer produces " + std::to_string(flat));
        }
        return {layer.weight_shape[0]};
    }
    if (in_shape.size() != 3) {
        throw shape_error("layer " + std::to_string(layer.index) + ": conv2d expects CxHxW input, got " +
                          shape_str(in_shape));
    }
    const int c = in_shape[0], h = in_shape[1], w = in_shape[2];
    const int kh = layer.weight_shape[2], kw = layer.weight_shape[3];
    if (layer.weight_shape[1] != c) {
        throw shape_error("layer " + std::to_string(layer.index) + ": conv2d kernel wants " +
                          std::to_string(layer.weight_shape[1]) + " channels, input has " + std::to_string(c));
    }
    const int oh = (h + 2 * layer.padding - kh) / layer.stride + 1;
    const int ow = (w + 2 * layer.padding - kw) / layer.stride + 1;
    if (oh < 1 || ow < 1) {
        throw shape_error("layer " + std::to_string(layer.index) + ": conv2d output would be empty for input " +
                          shape_str(in_shape));
    }
    return {layer.weight_shape[0], oh, ow};
}

}  // namespace

int TargetNetSpec::quantizable_count() const {
    int n = 0;
    for (const auto& l : layers) n += l.quantizable ? 1 : 0;
    return n;
}

int64_t TargetNetSpec::quantizable_weight_count() const {
    int64_t n = 0;
    for (const auto& l : layers)
        if (l.quantizable) n += l.weight_count;
    return n;
}

std::vector<const LayerSpec*> TargetNetSpec::quantizable_layers() const {
    std::vector<const LayerSpec*> out;
    for (const auto& l : layers)
        if (l.quantizable) out.push_back(&l);
    return out;
}

void TargetNetSpec::validate() const {
    if (layers.empty()) throw shape_error("target spec '" + name + "' has no layers");
    std::vector<int> shape = input_shape;
    for (const auto& layer : layers) {
        if (layer.weight_count != shape_size(layer.weight_shape)) {
            throw shape_error("layer " + std::to_string(layer.index) + ": weight_count " +
                              std::to_string(layer.weight_count) + " != product of " + shape_str(layer.weight_shape));
        }
        shape = layer_output_shape(layer, shape);
    }
    if (shape.size() != 1 || shape[0] != class_count) {
        throw shape_error("target spec '" + name + "' produces " + shape_str(shape) + " instead of " +
                          std::to_string(class_count) + " logits");
    }
}

TensorPtr forward_with_weights(Tape& tape, const TargetNetSpec& spec, const std::vector<TensorPtr>& weights,
                               const std::vector<TensorPtr>& biases, const TensorPtr& batch) {
    if (weights.size() != spec.layers.size()) {
        throw shape_error("forward_with_weights: got " + std::to_string(weights.size()) + " weight tensors for " +
                          std::to_string(spec.layers.size()) + " layers");
    }
    if (!biases.empty() && biases.size() != spec.layers.size()) {
        throw shape_error("forward_with_weights: got " + std::to_string(biases.size()) + " bias tensors for " +
                          std::to_string(spec.layers.size()) + " layers");
    }
    std::vector<int> expected = spec.input_shape;
    expected.insert(expected.begin(), batch->dim(0));
    if (batch->shape != expected) {
        throw shape_error("forward_with_weights: batch " + shape_str(batch->shape) + " does not match input shape " +
                          shape_str(spec.input_shape));
    }

    TensorPtr x = batch;
    for (size_t li = 0; li < spec.layers.size(); ++li) {
        const LayerSpec& layer = spec.layers[li];
        const TensorPtr& w = weights[li];
        if (w->shape != layer.weight_shape) {
            throw shape_error("layer " + std::to_string(layer.index) + ": weight " + shape_str(w->shape) +
                              " does not match spec " + shape_str(layer.weight_shape));
        }
        if (layer.kind == LayerSpec::Kind::dense) {
            if (x->rank() != 2) x = tape.reshape(x, {x->dim(0), static_cast<int>(x->size() / x->dim(0))});
            x = tape.matmul_nt(x, w);
            if (!biases.empty()) x = tape.add_row_bias(x, biases[li]);
        } else {
            x = tape.conv2d(x, w, layer.stride, layer.padding);
            if (!biases.empty()) x = tape.add_channel_bias(x, biases[li]);
        }
        if (layer.activation == LayerSpec::Activation::relu) x = tape.relu(x);
    }
    if (x->rank() != 2) x = tape.reshape(x, {x->dim(0), static_cast<int>(x->size() / x->dim(0))});
    return x;
}

namespace {

LayerSpec dense_layer(int index, int out, int in, LayerSpec::Activation act) {
    LayerSpec l;
    l.index = index;
    l.kind = LayerSpec::Kind::dense;
    l.weight_shape = {out, in};
    l.weight_count = static_cast<int64_t>(out) * in;
    l.activation = act;
    return l;
}

LayerSpec conv_layer(int index, int f, int c, int k, int stride, int pad, LayerSpec::Activation act) {
    LayerSpec l;
    l.index = index;
    l.kind = LayerSpec::Kind::conv2d;
    l.weight_shape = {f, c, k, k};
    l.weight_count = static_cast<int64_t>(f) * c * k * k;
    l.stride = stride;
    l.padding = pad;
    l.activation = act;
    return l;
}

}  // namespace

TargetNetSpec builtin_spec(const std::string& name, int class_count) {
    if (class_count < 2) throw config_error("builtin_spec: class_count must be >= 2");
    TargetNetSpec spec;
    spec.name = name;
    spec.class_count = class_count;
    spec.input_shape = {1, 8, 8};
    if (name == "mlp-3") {
        // 64 -> 64 -> 32 -> K, all dense
        spec.layers = {
            dense_layer(0, 64, 64, LayerSpec::Activation::relu),
            dense_layer(1, 32, 64, LayerSpec::Activation::relu),
            dense_layer(2, class_count, 32, LayerSpec::Activation::none),
        };
    } else if (name == "cnn-5") {
        // three 3x3 conv stages (6, 12, 12 filters; the last two at stride 2)
        // followed by two dense layers on the flattened 12x2x2 features; kept
        // deliberately narrow so low uniform bitwidths genuinely cost accuracy
        spec.layers = {
            conv_layer(0, 6, 1, 3, 1, 1, LayerSpec::Activation::relu),
            conv_layer(1, 12, 6, 3, 2, 1, LayerSpec::Activation::relu),
            conv_layer(2, 12, 12, 3, 2, 1, LayerSpec::Activation::relu),
            dense_layer(3, 24, 48, LayerSpec::Activation::relu),
            dense_layer(4, class_count, 24, LayerSpec::Activation::none),
        };
    } else {
        throw lookup_error("unknown target spec '" + name + "'; available: mlp-3, cnn-5");
    }
    spec.validate();
    return spec;
}

std::vector<std::string> builtin_spec_names() { return {"mlp-3", "cnn-5"}; }

}  // namespace hq
