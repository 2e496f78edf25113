#pragma once

#include <cmath>
#include <cstdint>

namespace hq {

// Deterministic splitmix64 generator. The standard <random> distributions are
// implementation-defined, so all sampling goes through this class to keep
// seeded runs reproducible.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return lo + static_cast<int>(v % range);
    }

    float uniform_real(float lo, float hi) {
        return lo + static_cast<float>(uniform() * (static_cast<double>(hi) - lo));
    }

    // Box-Muller with a cached spare.
    float normal(float mean, float stddev) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * static_cast<float>(spare_);
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        has_spare_ = true;
        return mean + stddev * static_cast<float>(mag * std::cos(2.0 * M_PI * u2));
    }

    // Derives an independent stream, e.g. one shuffle rng per epoch.
    Rng fork(uint64_t stream) const {
        Rng r(state_ ^ (0x632be59bd9b4e019ull * (stream + 1)));
        r.next_u64();
        return r;
    }

  private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace hq
