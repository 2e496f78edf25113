#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperquant/datasets.hpp"
#include "hyperquant/hypernet.hpp"
#include "hyperquant/policy.hpp"
#include "hyperquant/target_net.hpp"

namespace hq {

// Hard model-size constraint: a policy is feasible iff its compression ratio
// (float size over quantized size) reaches target_ratio. When
// include_side_params is set, each quantizable layer also pays for its three
// f32 side values (scale pair + per-layer multiplier).
struct CompressionConstraint {
    double target_ratio = 10.0;
    bool include_side_params = false;
};

struct SearchConfig {
    int population = 50;
    int generations = 20;
    int parents = 10;
    double mutation_prob = 0.1;
    int bit_min = 1;
    int bit_max = 8;
    int eval_subset = 1024;       // validation samples used per fitness call
    int rejection_retries = 100;  // per offspring before drawing fresh
    uint64_t seed = 0;

    void validate() const;
};

struct GenerationStats {
    int generation = 0;
    double best = 0.0;
    double mean = 0.0;
};

struct SearchReport {
    BitwidthPolicy best;
    double best_ratio = 0.0;
    double best_accuracy = 0.0;
    double target_ratio = 0.0;
    int bit_min = 1;
    int bit_max = 8;
    int64_t evaluations = 0;
    std::vector<GenerationStats> generations;  // row 0 is the initial population

    nlohmann::json to_json() const;
    static SearchReport from_json(const nlohmann::json& j);

    // layer,bits,normalized rows with normalized = bits/q_max.
    std::string normalized_csv(int q_max) const;
};

// Fixed validation subset used for all fitness evaluations of one search.
struct EvalSet {
    TensorPtr features;
    std::vector<int> labels;
};
EvalSet make_eval_set(const Dataset& ds, const std::vector<int>& idx, int cap);

// Quantized model size in bits: sum over quantizable layers of n_l * q_l
// (biases and other non-quantizable parameters excluded).
int64_t model_size_bits(const BitwidthPolicy& policy, const TargetNetSpec& spec,
                        const CompressionConstraint& constraint);
double compression_ratio(const BitwidthPolicy& policy, const TargetNetSpec& spec,
                         const CompressionConstraint& constraint);
bool is_feasible(const BitwidthPolicy& policy, const TargetNetSpec& spec, const CompressionConstraint& constraint);

// Preset search ranges per target ratio: [1,8] up to 10x, [1,5] up to 20x,
// [1,3] beyond.
std::pair<int, int> bit_range_for_ratio(double target_ratio);

// Top-1 accuracy of the frozen generator + target under `policy` on the
// fixed subset. Pure and deterministic.
double evaluate_policy(const HyperNet& net, const TargetNetSpec& spec, const BitwidthPolicy& policy,
                       const EvalSet& eval);

// Called once per fitness evaluation, in a deterministic order.
using EvalObserver = std::function<void(const BitwidthPolicy&, double accuracy)>;

// Elitist genetic search over feasible policies only: rejection-sampled
// initial population, top-N parents, uniform crossover, per-gene mutation,
// infeasible offspring redrawn. Throws infeasible_error up front when even
// the all-minimum-bits policy misses the target.
SearchReport genetic_search(const HyperNet& net, const TargetNetSpec& spec, const CompressionConstraint& constraint,
                            const SearchConfig& config, const EvalSet& eval, const EvalObserver& observer = {});

struct ExhaustiveResult {
    BitwidthPolicy best;
    double accuracy = 0.0;
    double ratio = 0.0;
};

// True argmax of evaluate_policy over every feasible policy in the range.
// Ties break toward higher ratio, then lexicographically smaller policy.
// Throws cap_error when the space exceeds `cap` and infeasible_error when no
// feasible policy exists.
ExhaustiveResult exhaustive_search(const HyperNet& net, const TargetNetSpec& spec,
                                   const CompressionConstraint& constraint, int bit_min, int bit_max,
                                   const EvalSet& eval, int64_t cap = 10000);

}  // namespace hq
