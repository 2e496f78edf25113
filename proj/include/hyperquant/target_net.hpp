#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperquant/tape.hpp"
#include "hyperquant/tensor.hpp"

namespace hq {

// Architecture description for one target layer. The target network owns no
// trainable weights; everything it runs with is supplied from outside.
struct LayerSpec {
    enum class Kind { dense, conv2d };
    enum class Activation { relu, none };

    int index = 0;
    Kind kind = Kind::dense;
    std::vector<int> weight_shape;  // dense: [out,in]; conv2d: [f,c,kh,kw]
    int64_t weight_count = 0;
    bool quantizable = true;
    Activation activation = Activation::relu;
    int stride = 1;  // conv2d only
    int padding = 0;
};

struct TargetNetSpec {
    std::string name;
    std::vector<LayerSpec> layers;
    std::vector<int> input_shape;  // per sample, e.g. {1,8,8}
    int class_count = 0;

    int quantizable_count() const;
    int64_t quantizable_weight_count() const;
    std::vector<const LayerSpec*> quantizable_layers() const;

    // Checks weight counts and that adjacent layer shapes compose from
    // input_shape down to class_count logits.
    void validate() const;
};

// Runs the target forward pass with externally supplied weights (and optional
// full-precision biases, one per layer; pass {} for all-zero biases).
// Gradients flow through the supplied tensors back to whatever produced them.
TensorPtr forward_with_weights(Tape& tape, const TargetNetSpec& spec, const std::vector<TensorPtr>& weights,
                               const std::vector<TensorPtr>& biases, const TensorPtr& batch);

// Named desk-scale architectures: "mlp-3" (3 dense layers) and "cnn-5"
// (3 conv + 2 dense), both on 1x8x8 inputs. Throws lookup_error for
// unknown names.
TargetNetSpec builtin_spec(const std::string& name, int class_count);
std::vector<std::string> builtin_spec_names();

}  // namespace hq
