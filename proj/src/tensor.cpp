#include "hyperquant/tensor.hpp"

#include <cmath>
#include <sstream>

#include "hyperquant/errors.hpp"

namespace hq {

int64_t shape_size(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw shape_error("tensor dimensions must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream out;
    out << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) out << "x";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

Tensor::Tensor(std::vector<int> shape_, float fill)
    : shape(std::move(shape_)), data(static_cast<size_t>(shape_size(shape)), fill) {}

Tensor::Tensor(std::vector<int> shape_, std::vector<float> values) : shape(std::move(shape_)), data(std::move(values)) {
    if (shape_size(shape) != static_cast<int64_t>(data.size())) {
        throw shape_error("value count " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
    }
}

void Tensor::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0f);
}

bool Tensor::all_finite() const {
    for (float v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

TensorPtr make_tensor(std::vector<int> shape, float fill) {
    return std::make_shared<Tensor>(std::move(shape), fill);
}

TensorPtr make_tensor(std::vector<int> shape, std::vector<float> values) {
    return std::make_shared<Tensor>(std::move(shape), std::move(values));
}

void check_finite(const Tensor& t, const char* where) {
    if (!t.all_finite()) throw input_error(std::string("non-finite values in ") + where);
}

}  // namespace hq
