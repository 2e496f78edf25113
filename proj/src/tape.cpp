#include "hyperquant/tape.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "hyperquant/errors.hpp"
#include "hyperquant/kernels.hpp"
#include "hyperquant/quantizer.hpp"

namespace hq {

namespace {

void require_rank(const TensorPtr& t, int rank, const char* op) {
    if (t->rank() != rank) {
        throw shape_error(std::string(op) + ": expected rank " + std::to_string(rank) + " tensor, got " +
                          shape_str(t->shape));
    }
}

}  // namespace

TensorPtr Tape::record(Tensor out, bool requires_grad, std::function<void()> backward_fn) {
    auto t = std::make_shared<Tensor>(std::move(out));
    t->requires_grad = requires_grad;
    nodes_.push_back({t, std::move(backward_fn)});
    return t;
}

TensorPtr Tape::matmul(const TensorPtr& a, const TensorPtr& b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const int m = a->dim(0), k = a->dim(1), n = b->dim(1);
    if (b->dim(0) != k) {
        throw shape_error("matmul: inner dimensions disagree, " + shape_str(a->shape) + " * " + shape_str(b->shape));
    }
    Tensor out({m, n});
    kernels::gemm_nn(a->data.data(), b->data.data(), out.data.data(), m, n, k);
    auto result = record(std::move(out), a->requires_grad || b->requires_grad, nullptr);
    nodes_.back().backward_fn = [a, b, result, m, n, k] {
        if (a->requires_grad) {
            a->ensure_grad();
            kernels::gemm_nt(result->grad.data(), b->data.data(), a->grad.data(), m, k, n, true);
        }
        if (b->requires_grad) {
            b->ensure_grad();
            kernels::gemm_tn(a->data.data(), result->grad.data(), b->grad.data(), k, n, m, true);
        }
    };
    return result;
}

TensorPtr Tape::matmul_nt(const TensorPtr& x, const TensorPtr& w) {
    require_rank(x, 2, "matmul_nt");
    require_rank(w, 2, "matmul_nt");
    const int m = x->dim(0), k = x->dim(1), n = w->dim(0);
    if (w->dim(1) != k) {
        throw shape_error("matmul_nt: inner dimensions disagree, " + shape_str(x->shape) + " * " +
                          shape_str(w->shape) + "^T");
    }
    Tensor out({m, n});
    kernels::gemm_nt(x->data.data(), w->data.data(), out.data.data(), m, n, k);
    auto result = record(std::move(out), x->requires_grad || w->requires_grad, nullptr);
    nodes_.back().backward_fn = [x, w, result, m, n, k] {
        if (x->requires_grad) {
            x->ensure_grad();
            kernels::gemm_nn(result->grad.data(), w->data.data(), x->grad.data(), m, k, n, true);
        }
        if (w->requires_grad) {
            w->ensure_grad();
            kernels::gemm_tn(result->grad.data(), x->data.data(), w->grad.data(), n, k, m, true);
        }
    };
    return result;
}

TensorPtr Tape::add_row_bias(const TensorPtr& x, const TensorPtr& bias) {
    require_rank(x, 2, "add_row_bias");
    require_rank(bias, 1, "add_row_bias");
    const int m = x->dim(0), n = x->dim(1);
    if (bias->dim(0) != n) {
        throw shape_error("add_row_bias: bias " + shape_str(bias->shape) + " does not match columns of " +
                          shape_str(x->shape));
    }
    Tensor out(x->shape);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.data[static_cast<size_t>(i) * n + j] = x->data[static_cast<size_t>(i) * n + j] + bias->data[j];
    auto result = record(std::move(out), x->requires_grad || bias->requires_grad, nullptr);
    nodes_.back().backward_fn = [x, bias, result, m, n] {
        if (x->requires_grad) {
            x->ensure_grad();
            for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += result->grad[i];
        }
        if (bias->requires_grad) {
            bias->ensure_grad();
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int i = 0; i < m; ++i) acc += result->grad[static_cast<size_t>(i) * n + j];
                bias->grad[j] += static_cast<float>(acc);
            }
        }
    };
    return result;
}

TensorPtr Tape::add_channel_bias(const TensorPtr& x, const TensorPtr& bias) {
    require_rank(x, 4, "add_channel_bias");
    require_rank(bias, 1, "add_channel_bias");
    const int n = x->dim(0), c = x->dim(1), hw = x->dim(2) * x->dim(3);
    if (bias->dim(0) != c) {
        throw shape_error("add_channel_bias: bias " + shape_str(bias->shape) + " does not match channels of " +
                          shape_str(x->shape));
    }
    Tensor out(x->shape);
    for (int b = 0; b < n; ++b)
        for (int ci = 0; ci < c; ++ci) {
            const size_t base = (static_cast<size_t>(b) * c + ci) * hw;
            for (int i = 0; i < hw; ++i) out.data[base + i] = x->data[base + i] + bias->data[ci];
        }
    auto result = record(std::move(out), x->requires_grad || bias->requires_grad, nullptr);
    nodes_.back().backward_fn = [x, bias, result, n, c, hw] {
        if (x->requires_grad) {
            x->ensure_grad();
            for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += result->grad[i];
        }
        if (bias->requires_grad) {
            bias->ensure_grad();
            for (int ci = 0; ci < c; ++ci) {
                double acc = 0.0;
                for (int b = 0; b < n; ++b) {
                    const size_t base = (static_cast<size_t>(b) * c + ci) * hw;
                    for (int i = 0; i < hw; ++i) acc += result->grad[base + i];
                }
                bias->grad[ci] += static_cast<float>(acc);
            }
        }
    };
    return result;
}

TensorPtr Tape::conv2d(const TensorPtr& input, const TensorPtr& kernel, int stride, int pad) {
    require_rank(input, 4, "conv2d");
    require_rank(kernel, 4, "conv2d");
    if (stride < 1 || pad < 0) throw config_error("conv2d: stride must be >= 1 and padding >= 0");
    const int n = input->dim(0), c = input->dim(1), h = input->dim(2), w = input->dim(3);
    const int f = kernel->dim(0), kh = kernel->dim(2), kw = kernel->dim(3);
    if (kernel->dim(1) != c) {
        throw shape_error("conv2d: kernel channels " + shape_str(kernel->shape) + " do not match input " +
                          shape_str(input->shape));
    }
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (w + 2 * pad - kw) / stride + 1;
    if (kh > h + 2 * pad || kw > w + 2 * pad || oh < 1 || ow < 1) {
        throw shape_error("conv2d: kernel " + shape_str(kernel->shape) + " too large for input " +
                          shape_str(input->shape) + " with stride " + std::to_string(stride) + ", pad " +
                          std::to_string(pad));
    }
    Tensor out({n, f, oh, ow});
    kernels::conv2d_forward(input->data.data(), kernel->data.data(), out.data.data(), n, c, h, w, f, kh, kw, stride,
                            pad, oh, ow);
    auto result = record(std::move(out), input->requires_grad || kernel->requires_grad, nullptr);
    nodes_.back().backward_fn = [input, kernel, result, n, c, h, w, f, kh, kw, stride, pad, oh, ow] {
        if (input->requires_grad) {
            input->ensure_grad();
            kernels::conv2d_grad_input(result->grad.data(), kernel->data.data(), input->grad.data(), n, c, h, w, f, kh,
                                       kw, stride, pad, oh, ow);
        }
        if (kernel->requires_grad) {
            kernel->ensure_grad();
            kernels::conv2d_grad_kernel(result->grad.data(), input->data.data(), kernel->grad.data(), n, c, h, w, f,
                                        kh, kw, stride, pad, oh, ow);
        }
    };
    return result;
}

TensorPtr Tape::relu(const TensorPtr& x) {
    Tensor out(x->shape);
    for (size_t i = 0; i < x->data.size(); ++i) out.data[i] = x->data[i] > 0.0f ? x->data[i] : 0.0f;
    auto result = record(std::move(out), x->requires_grad, nullptr);
    nodes_.back().backward_fn = [x, result] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < x->grad.size(); ++i)
            if (x->data[i] > 0.0f) x->grad[i] += result->grad[i];
    };
    return result;
}

TensorPtr Tape::reshape(const TensorPtr& x, std::vector<int> shape) {
    if (shape_size(shape) != x->size()) {
        throw shape_error("reshape: cannot view " + shape_str(x->shape) + " as " + shape_str(shape));
    }
    Tensor out(std::move(shape));
    out.data = x->data;
    auto result = record(std::move(out), x->requires_grad, nullptr);
    nodes_.back().backward_fn = [x, result] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += result->grad[i];
    };
    return result;
}

TensorPtr Tape::mul(const TensorPtr& a, const TensorPtr& b) {
    if (!a->same_shape(*b)) {
        throw shape_error("mul: shapes disagree, " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    }
    Tensor out(a->shape);
    for (size_t i = 0; i < a->data.size(); ++i) out.data[i] = a->data[i] * b->data[i];
    auto result = record(std::move(out), a->requires_grad || b->requires_grad, nullptr);
    nodes_.back().backward_fn = [a, b, result] {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += result->grad[i] * b->data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < b->grad.size(); ++i) b->grad[i] += result->grad[i] * a->data[i];
        }
    };
    return result;
}

TensorPtr Tape::mul_scalar(const TensorPtr& x, const TensorPtr& s) {
    if (s->size() != 1) throw shape_error("mul_scalar: scale must hold exactly one value, got " + shape_str(s->shape));
    const float scale = s->data[0];
    Tensor out(x->shape);
    for (size_t i = 0; i < x->data.size(); ++i) out.data[i] = scale * x->data[i];
    auto result = record(std::move(out), x->requires_grad || s->requires_grad, nullptr);
    nodes_.back().backward_fn = [x, s, result, scale] {
        if (x->requires_grad) {
            x->ensure_grad();
            for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += result->grad[i] * scale;
        }
        if (s->requires_grad) {
            s->ensure_grad();
            double acc = 0.0;
            for (size_t i = 0; i < x->data.size(); ++i)
                acc += static_cast<double>(result->grad[i]) * x->data[i];
            s->grad[0] += static_cast<float>(acc);
        }
    };
    return result;
}

TensorPtr Tape::sum(const TensorPtr& x) {
    double acc = 0.0;
    for (float v : x->data) acc += v;
    Tensor out({1});
    out.data[0] = static_cast<float>(acc);
    auto result = record(std::move(out), x->requires_grad, nullptr);
    nodes_.back().backward_fn = [x, result] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < x->grad.size(); ++i) x->grad[i] += result->grad[0];
    };
    return result;
}

TensorPtr Tape::quantize_ste(const TensorPtr& x, int bits, float delta) {
    if (delta <= 0.0f) throw config_error("quantize_ste: delta must be positive");
    auto result = record(quantize_weights(*x, bits), x->requires_grad, nullptr);
    nodes_.back().backward_fn = [x, result, delta] {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (size_t i = 0; i < x->grad.size(); ++i)
            if (std::fabs(x->data[i]) < delta) x->grad[i] += result->grad[i];
    };
    return result;
}

TensorPtr Tape::softmax_cross_entropy(const TensorPtr& logits, const std::vector<int>& labels) {
    require_rank(logits, 2, "softmax_cross_entropy");
    const int n = logits->dim(0), k = logits->dim(1);
    if (static_cast<int>(labels.size()) != n) {
        throw input_error("softmax_cross_entropy: got " + std::to_string(labels.size()) + " labels for batch of " +
                          std::to_string(n));
    }
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= k) {
            throw input_error("softmax_cross_entropy: label " + std::to_string(labels[i]) + " at row " +
                              std::to_string(i) + " outside [0," + std::to_string(k) + ")");
        }
    }
    auto probs = std::make_shared<std::vector<float>>(static_cast<size_t>(n) * k);
    std::vector<double> row_loss(static_cast<size_t>(n));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const float* row = logits->data.data() + static_cast<size_t>(i) * k;
        float* prow = probs->data() + static_cast<size_t>(i) * k;
        float mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
        for (int j = 0; j < k; ++j)
            prow[j] = static_cast<float>(std::exp(static_cast<double>(row[j]) - mx) / denom);
        row_loss[i] = -(static_cast<double>(row[labels[i]]) - mx - std::log(denom));
    }
    // serial sum keeps the result independent of the thread count
    double total = 0.0;
    for (double v : row_loss) total += v;
    Tensor out({1});
    out.data[0] = static_cast<float>(total / n);
    auto result = record(std::move(out), logits->requires_grad, nullptr);
    nodes_.back().backward_fn = [logits, result, probs, labels, n, k] {
        if (!logits->requires_grad) return;
        logits->ensure_grad();
        const float g = result->grad[0] / static_cast<float>(n);
        for (int i = 0; i < n; ++i) {
            const float* prow = probs->data() + static_cast<size_t>(i) * k;
            float* grow = logits->grad.data() + static_cast<size_t>(i) * k;
            for (int j = 0; j < k; ++j) grow[j] += g * (prow[j] - (j == labels[i] ? 1.0f : 0.0f));
        }
    };
    return result;
}

void Tape::backward(const TensorPtr& loss) {
    if (nodes_.empty()) throw state_error("backward: no forward pass recorded");
    if (backward_done_) throw state_error("backward: tape already replayed");
    if (loss->size() != 1) throw state_error("backward: loss must be scalar, got " + shape_str(loss->shape));
    if (nodes_.back().out != loss) throw state_error("backward: loss is not the tape's final output");
    loss->ensure_grad();
    loss->grad[0] = 1.0f;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (!it->out->grad.empty() && it->backward_fn) it->backward_fn();
    }
    backward_done_ = true;
}

double top1_accuracy(const Tensor& logits, const std::vector<int>& labels) {
    const int n = logits.dim(0), k = logits.dim(1);
    int correct = 0;
    for (int i = 0; i < n; ++i) {
        const float* row = logits.data.data() + static_cast<size_t>(i) * k;
        int best = 0;
        for (int j = 1; j < k; ++j)
            if (row[j] > row[best]) best = j;
        if (best == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / n;
}

}  // namespace hq
