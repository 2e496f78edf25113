#pragma once

#include <string>
#include <vector>

namespace hq {

// One integer bitwidth per quantizable target layer.
struct BitwidthPolicy {
    std::vector<int> bits;

    BitwidthPolicy() = default;
    explicit BitwidthPolicy(std::vector<int> b) : bits(std::move(b)) {}
    static BitwidthPolicy uniform(int layer_count, int q);

    int size() const { return static_cast<int>(bits.size()); }
    bool operator==(const BitwidthPolicy& other) const { return bits == other.bits; }

    // Throws config_error unless length matches and every value is inside
    // [bit_min, bit_max].
    void validate(int layer_count, int bit_min, int bit_max) const;

    std::string str() const;  // e.g. "(2,4,8)"
};

}  // namespace hq
