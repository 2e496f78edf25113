#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace hq {

// Dense row-major f32 tensor with an optional gradient buffer of the same
// length. Values are stored in 32 bits; reductions accumulate in 64 bits.
struct Tensor {
    std::vector<int> shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until a backward pass needs it
    bool requires_grad = false;

    Tensor() = default;
    explicit Tensor(std::vector<int> shape_, float fill = 0.0f);
    Tensor(std::vector<int> shape_, std::vector<float> values);

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<size_t>(i)]; }

    void ensure_grad();
    void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    bool all_finite() const;
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<int> shape, float fill = 0.0f);
TensorPtr make_tensor(std::vector<int> shape, std::vector<float> values);

int64_t shape_size(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Throws input_error naming `where` if any value is NaN or Inf.
void check_finite(const Tensor& t, const char* where);

}  // namespace hq
