#include "hyperquant/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hyperquant/errors.hpp"
#include "hyperquant/quantizer.hpp"
#include "hyperquant/tape.hpp"

namespace hq {

namespace {
constexpr int kProbeCap = 1024;

std::string probe_header(const BitwidthPolicy& p) {
    std::string s = "probe_";
    for (size_t i = 0; i < p.bits.size(); ++i) {
        if (i) s += "-";
        s += std::to_string(p.bits[i]);
    }
    return s;
}
}  // namespace

TrainMode train_mode_from(const std::string& name) {
    if (name == "train") return TrainMode::train;
    if (name == "retrain") return TrainMode::retrain;
    if (name == "finetune") return TrainMode::finetune;
    throw config_error("unknown train mode '" + name + "'");
}

std::string to_string(TrainMode mode) {
    switch (mode) {
        case TrainMode::train: return "train";
        case TrainMode::retrain: return "retrain";
        default: return "finetune";
    }
}

void TrainConfig::validate() const {
    if (epochs < 0) throw config_error("train: epochs must be >= 0");
    if (batch_size < 1) throw config_error("train: batch_size must be >= 1");
    if (lr <= 0.0f || momentum < 0.0f || weight_decay < 0.0f) throw config_error("train: rates must be positive");
    if (warm_epochs < 0 || halve_every < 1) throw config_error("train: invalid lr schedule");
    if (bit_min < kMinBits || bit_max > kMaxBits || bit_min > bit_max) {
        throw config_error("train: bit range [" + std::to_string(bit_min) + "," + std::to_string(bit_max) +
                           "] invalid");
    }
}

BitwidthPolicy sample_policy(int layer_count, int bit_min, int bit_max, Rng& rng) {
    BitwidthPolicy p;
    p.bits.resize(static_cast<size_t>(layer_count));
    for (auto& q : p.bits) q = rng.uniform_int(bit_min, bit_max);
    return p;
}

float lr_at_epoch(const TrainConfig& config, int epoch) {
    if (epoch < config.warm_epochs) return config.lr;
    const int halvings = 1 + (epoch - config.warm_epochs) / config.halve_every;
    return config.lr * std::pow(0.5f, static_cast<float>(halvings));
}

void SgdState::init(const std::vector<TensorPtr>& params) {
    velocity.clear();
    velocity.reserve(params.size());
    for (const auto& p : params) velocity.emplace_back(p->data.size(), 0.0f);
}

void sgd_update(const std::vector<TensorPtr>& params, SgdState& state, float lr, float momentum, float weight_decay) {
    if (state.velocity.size() != params.size()) throw state_error("sgd_update: state not initialized for parameters");
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = *params[pi];
        std::vector<float>& v = state.velocity[pi];
        const bool has_grad = !p.grad.empty();
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < static_cast<int64_t>(p.data.size()); ++i) {
            const float g = has_grad ? p.grad[static_cast<size_t>(i)] : 0.0f;
            v[static_cast<size_t>(i)] =
                momentum * v[static_cast<size_t>(i)] + g + weight_decay * p.data[static_cast<size_t>(i)];
            p.data[static_cast<size_t>(i)] -= lr * v[static_cast<size_t>(i)];
        }
    }
}

double train_step(HyperNet& net, const TargetNetSpec& spec, const TensorPtr& batch, const std::vector<int>& labels,
                  const BitwidthPolicy& policy, SgdState& state, float lr, const TrainConfig& config, int epoch,
                  int step) {
    auto params = net.parameters();
    for (auto& p : params) p->grad.clear();

    Tape tape;
    auto logits = hypernet_forward(tape, net, spec, policy, batch);
    auto loss = tape.softmax_cross_entropy(logits, labels);
    const double loss_value = loss->data[0];
    if (!std::isfinite(loss_value)) {
        throw divergence_error("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step),
                               epoch, step);
    }
    tape.backward(loss);
    sgd_update(params, state, lr, config.momentum, config.weight_decay);
    return loss_value;
}

double evaluate_mean_loss(const HyperNet& net, const TargetNetSpec& spec, const Dataset& ds,
                          const std::vector<int>& idx, const BitwidthPolicy& policy, int batch_size) {
    double total = 0.0;
    int64_t seen = 0;
    for (size_t start = 0; start < idx.size(); start += static_cast<size_t>(batch_size)) {
        const size_t stop = std::min(idx.size(), start + static_cast<size_t>(batch_size));
        std::vector<int> take(idx.begin() + static_cast<std::ptrdiff_t>(start),
                              idx.begin() + static_cast<std::ptrdiff_t>(stop));
        Tape tape;
        auto logits = hypernet_forward(tape, net, spec, policy, gather_features(ds, take));
        auto loss = tape.softmax_cross_entropy(logits, gather_labels(ds, take));
        total += static_cast<double>(loss->data[0]) * static_cast<double>(take.size());
        seen += static_cast<int64_t>(take.size());
    }
    return seen ? total / static_cast<double>(seen) : 0.0;
}

TrainReport run_training(HyperNet& net, const TargetNetSpec& spec, const Dataset& ds, const TrainConfig& config) {
    config.validate();
    const int l = spec.quantizable_count();
    const bool fixed = config.mode != TrainMode::train;
    if (fixed) config.fixed_policy.validate(l, net.bit_min, net.bit_max);
    if (ds.train_idx.empty()) throw input_error("run_training: dataset has no train split");

    TrainReport report;
    if (fixed) {
        report.probes = {config.fixed_policy};
    } else {
        const int mid = (config.bit_min + config.bit_max + 1) / 2;
        report.probes = {BitwidthPolicy::uniform(l, config.bit_max), BitwidthPolicy::uniform(l, mid),
                         BitwidthPolicy::uniform(l, config.bit_min)};
    }
    const auto probe_eval = make_eval_set(ds, ds.val_idx.empty() ? ds.train_idx : ds.val_idx, kProbeCap);

    if (fixed) {
        report.initial_eval_loss =
            evaluate_mean_loss(net, spec, ds, ds.train_idx, config.fixed_policy, config.batch_size);
        report.has_initial_eval_loss = true;
    }

    auto params = net.parameters();
    SgdState state;
    state.init(params);
    Rng policy_rng(config.seed ^ 0x9e3779b9u);
    Rng shuffle_base(config.seed);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const float lr = lr_at_epoch(config, epoch);

        std::vector<int> order = ds.train_idx;
        Rng shuffle_rng = shuffle_base.fork(static_cast<uint64_t>(epoch));
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(shuffle_rng.uniform_int(0, i))]);

        double loss_sum = 0.0;
        int steps = 0;
        BitwidthPolicy policy = fixed ? config.fixed_policy : BitwidthPolicy{};
        try {
            for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
                const size_t stop = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
                std::vector<int> take(order.begin() + static_cast<std::ptrdiff_t>(start),
                                      order.begin() + static_cast<std::ptrdiff_t>(stop));
                if (!fixed && steps % std::max(1, config.policy_hold_steps) == 0) {
                    policy = sample_policy(l, config.bit_min, config.bit_max, policy_rng);
                }
                loss_sum += train_step(net, spec, gather_features(ds, take), gather_labels(ds, take), policy, state,
                                       lr, config, epoch, steps);
                ++steps;
            }
        } catch (const divergence_error& e) {
            report.diverged = true;
            report.diverged_epoch = e.epoch;
            report.diverged_step = e.step;
            return report;
        }

        EpochRow row;
        row.epoch = epoch;
        row.loss = steps ? loss_sum / steps : 0.0;
        for (const auto& probe : report.probes) row.probe_acc.push_back(evaluate_policy(net, spec, probe, probe_eval));
        row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.rows.push_back(std::move(row));
    }
    return report;
}

std::string TrainReport::to_csv(bool include_timing) const {
    std::ostringstream out;
    out << "epoch,loss";
    for (const auto& p : probes) out << "," << probe_header(p);
    if (include_timing) out << ",seconds";
    out << "\n";
    char buf[64];
    for (const auto& row : rows) {
        out << row.epoch;
        std::snprintf(buf, sizeof(buf), ",%.9g", row.loss);
        out << buf;
        for (double a : row.probe_acc) {
            std::snprintf(buf, sizeof(buf), ",%.9g", a);
            out << buf;
        }
        if (include_timing) {
            std::snprintf(buf, sizeof(buf), ",%.3f", row.seconds);
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace hq
