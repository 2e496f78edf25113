#include "hyperquant/policy.hpp"

#include <sstream>

#include "hyperquant/errors.hpp"

namespace hq {

BitwidthPolicy BitwidthPolicy::uniform(int layer_count, int q) {
    return BitwidthPolicy(std::vector<int>(static_cast<size_t>(layer_count), q));
}

void BitwidthPolicy::validate(int layer_count, int bit_min, int bit_max) const {
    if (size() != layer_count) {
        throw config_error("policy length " + std::to_string(size()) + " does not match " +
                           std::to_string(layer_count) + " quantizable layers");
    }
    for (int q : bits) {
        if (q < bit_min || q > bit_max) {
            throw config_error("policy bitwidth " + std::to_string(q) + " outside [" + std::to_string(bit_min) + "," +
                               std::to_string(bit_max) + "]");
        }
    }
}

std::string BitwidthPolicy::str() const {
    std::ostringstream out;
    out << "(";
    for (size_t i = 0; i < bits.size(); ++i) {
        if (i) out << ",";
        out << bits[i];
    }
    out << ")";
    return out.str();
}

}  // namespace hq
