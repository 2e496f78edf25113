#pragma once

#include <stdexcept>
#include <string>

namespace hq {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor dimension / shape incompatibilities.
struct shape_error : error {
    using error::error;
};

// Bad configuration values (bitwidth out of range, invalid rates, ...).
struct config_error : error {
    using error::error;
};

// Bad runtime inputs (labels out of range, empty tensors, invalid dataset params).
struct input_error : error {
    using error::error;
};

// Operation called in the wrong order (e.g. backward before forward).
struct state_error : error {
    using error::error;
};

// Malformed files: IDX containers, checkpoints, report JSON.
struct format_error : error {
    using error::error;
};

// Unknown name in a catalog lookup.
struct lookup_error : error {
    using error::error;
};

// No policy can satisfy the compression constraint.
struct infeasible_error : error {
    using error::error;
};

// Exhaustive enumeration would exceed the configured cap.
struct cap_error : error {
    using error::error;
};

// Training produced a non-finite loss.
struct divergence_error : error {
    divergence_error(const std::string& msg, int epoch, int step)
        : error(msg), epoch(epoch), step(step) {}
    int epoch;
    int step;
};

}  // namespace hq
