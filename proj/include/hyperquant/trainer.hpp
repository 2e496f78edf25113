#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hyperquant/datasets.hpp"
#include "hyperquant/hypernet.hpp"
#include "hyperquant/policy.hpp"
#include "hyperquant/policy_search.hpp"
#include "hyperquant/rng.hpp"
#include "hyperquant/target_net.hpp"

namespace hq {

enum class TrainMode { train, retrain, finetune };
TrainMode train_mode_from(const std::string& name);
std::string to_string(TrainMode mode);

struct TrainConfig {
    int epochs = 40;
    int batch_size = 32;
    float lr = 0.1f;
    float momentum = 0.9f;
    float weight_decay = 1e-4f;
    int warm_epochs = 12;   // epochs at the initial rate
    int halve_every = 6;    // halving period after the warm phase
    int bit_min = 1;
    int bit_max = 8;
    // In train mode a fresh random policy applies for this many consecutive
    // minibatches (each update still sees exactly one policy).
    int policy_hold_steps = 1;
    uint64_t seed = 0;
    TrainMode mode = TrainMode::train;
    BitwidthPolicy fixed_policy;  // retrain / finetune only

    void validate() const;
};

struct EpochRow {
    int epoch = 0;
    double loss = 0.0;
    std::vector<double> probe_acc;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<BitwidthPolicy> probes;
    std::vector<EpochRow> rows;
    // Mean loss over the train split in canonical order before any update;
    // only measured for fixed-policy modes. Matches the value a checkpoint
    // records at save time, which is what makes finetune resumption checkable.
    double initial_eval_loss = 0.0;
    bool has_initial_eval_loss = false;
    bool diverged = false;
    int diverged_epoch = -1;
    int diverged_step = -1;

    // include_timing=false drops the wall-clock column, leaving only the
    // seed-determined fields.
    std::string to_csv(bool include_timing = true) const;
};

// Each bitwidth drawn i.i.d. uniform over [bit_min, bit_max].
BitwidthPolicy sample_policy(int layer_count, int bit_min, int bit_max, Rng& rng);

// Piecewise learning-rate schedule: lr for e < warm_epochs, then halved once
// per halve_every epochs.
float lr_at_epoch(const TrainConfig& config, int epoch);

// Momentum SGD with decoupled-from-nothing classic weight decay:
// v <- momentum*v + g + weight_decay*w ; w <- w - lr*v.
struct SgdState {
    std::vector<std::vector<float>> velocity;
    void init(const std::vector<TensorPtr>& params);
};
void sgd_update(const std::vector<TensorPtr>& params, SgdState& state, float lr, float momentum, float weight_decay);

// One minibatch step: generate weights under `policy`, run the target,
// backprop through the straight-through quantizer, update the generator's
// parameters. Returns the pre-update loss; throws divergence_error (with
// epoch/step) when the loss goes non-finite.
double train_step(HyperNet& net, const TargetNetSpec& spec, const TensorPtr& batch, const std::vector<int>& labels,
                  const BitwidthPolicy& policy, SgdState& state, float lr, const TrainConfig& config, int epoch,
                  int step);

// Forward-only mean loss over the given samples in canonical order.
double evaluate_mean_loss(const HyperNet& net, const TargetNetSpec& spec, const Dataset& ds,
                          const std::vector<int>& idx, const BitwidthPolicy& policy, int batch_size);

// Stage-1 meta-training (fresh policy per minibatch) or stage-3
// retraining/finetuning (fixed policy). Divergence aborts with the partial
// report flagged.
TrainReport run_training(HyperNet& net, const TargetNetSpec& spec, const Dataset& ds, const TrainConfig& config);

}  // namespace hq
