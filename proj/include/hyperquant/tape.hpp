#pragma once

#include <functional>
#include <vector>

#include "hyperquant/tensor.hpp"

namespace hq {

// Define-by-run computation tape. Every op records its output tensor and a
// backward rule; backward() replays the rules in reverse recording order and
// accumulates gradients into every tensor marked requires_grad. A tape and
// its tensors belong to one worker; independent tapes may run in parallel.
class Tape {
  public:
    // C[m,n] = a[m,k] * b[k,n]
    TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
    // C[m,n] = x[m,k] * w[n,k]^T  (dense layer core: rows of w are output units)
    TensorPtr matmul_nt(const TensorPtr& x, const TensorPtr& w);
    TensorPtr add_row_bias(const TensorPtr& x, const TensorPtr& bias);
    TensorPtr add_channel_bias(const TensorPtr& x, const TensorPtr& bias);
    TensorPtr conv2d(const TensorPtr& input, const TensorPtr& kernel, int stride, int pad);
    TensorPtr relu(const TensorPtr& x);
    TensorPtr reshape(const TensorPtr& x, std::vector<int> shape);
    TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
    // out = s[0] * x, with the ordinary product rule on both factors.
    TensorPtr mul_scalar(const TensorPtr& x, const TensorPtr& s);
    TensorPtr sum(const TensorPtr& x);
    // Scale + uniform quantize + dequantize with the straight-through backward
    // rule: gradient passes where |x| < delta, zero elsewhere.
    TensorPtr quantize_ste(const TensorPtr& x, int bits, float delta);
    // Mean cross-entropy over the batch, stabilized by max-subtraction.
    TensorPtr softmax_cross_entropy(const TensorPtr& logits, const std::vector<int>& labels);

    // Replays backward rules in reverse order, seeding d(loss)/d(loss) = 1.
    // `loss` must be the tape's final scalar output.
    void backward(const TensorPtr& loss);

    size_t node_count() const { return nodes_.size(); }

  private:
    struct Node {
        TensorPtr out;
        std::function<void()> backward_fn;
    };

    TensorPtr record(Tensor out, bool requires_grad, std::function<void()> backward_fn);

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

// Fraction of rows whose argmax equals the label.
double top1_accuracy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace hq
