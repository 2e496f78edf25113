#include "hyperquant/policy_search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hyperquant/errors.hpp"
#include "hyperquant/quantizer.hpp"
#include "hyperquant/rng.hpp"

namespace hq {

void SearchConfig::validate() const {
    if (population < 1) throw config_error("search: population must be >= 1");
    if (parents < 1 || parents > population) throw config_error("search: parents must be in [1, population]");
    if (mutation_prob <= 0.0 || mutation_prob >= 1.0) throw config_error("search: mutation_prob must be in (0,1)");
    if (generations < 0) throw config_error("search: generations must be >= 0");
    if (bit_min < kMinBits || bit_max > kMaxBits || bit_min > bit_max) {
        throw config_error("search: bit range [" + std::to_string(bit_min) + "," + std::to_string(bit_max) +
                           "] invalid");
    }
}

EvalSet make_eval_set(const Dataset& ds, const std::vector<int>& idx, int cap) {
    std::vector<int> take(idx.begin(), idx.begin() + std::min<size_t>(idx.size(), static_cast<size_t>(cap)));
    return EvalSet{gather_features(ds, take), gather_labels(ds, take)};
}

int64_t model_size_bits(const BitwidthPolicy& policy, const TargetNetSpec& spec,
                        const CompressionConstraint& constraint) {
    const auto layers = spec.quantizable_layers();
    policy.validate(static_cast<int>(layers.size()), kMinBits, kMaxBits);
    int64_t bits = 0;
    for (size_t i = 0; i < layers.size(); ++i) {
        bits += layers[i]->weight_count * policy.bits[i];
        if (constraint.include_side_params) bits += 3 * 32;
    }
    return bits;
}

double compression_ratio(const BitwidthPolicy& policy, const TargetNetSpec& spec,
                         const CompressionConstraint& constraint) {
    const double float_bits = 32.0 * static_cast<double>(spec.quantizable_weight_count());
    return float_bits / static_cast<double>(model_size_bits(policy, spec, constraint));
}

bool is_feasible(const BitwidthPolicy& policy, const TargetNetSpec& spec, const CompressionConstraint& constraint) {
    return compression_ratio(policy, spec, constraint) >= constraint.target_ratio;
}

std::pair<int, int> bit_range_for_ratio(double target_ratio) {
    if (target_ratio <= 10.0) return {1, 8};
    if (target_ratio <= 20.0) return {1, 5};
    return {1, 3};
}

double evaluate_policy(const HyperNet& net, const TargetNetSpec& spec, const BitwidthPolicy& policy,
                       const EvalSet& eval) {
    Tape tape;
    auto logits = hypernet_forward(tape, net, spec, policy, eval.features);
    return top1_accuracy(*logits, eval.labels);
}

namespace {

BitwidthPolicy random_policy(int l, int bit_min, int bit_max, Rng& rng) {
    BitwidthPolicy p;
    p.bits.resize(static_cast<size_t>(l));
    for (auto& q : p.bits) q = rng.uniform_int(bit_min, bit_max);
    return p;
}

BitwidthPolicy random_feasible(int l, const SearchConfig& cfg, const TargetNetSpec& spec,
                               const CompressionConstraint& constraint, Rng& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        auto p = random_policy(l, cfg.bit_min, cfg.bit_max, rng);
        if (is_feasible(p, spec, constraint)) return p;
    }
    // the all-minimum policy is feasible whenever anything is
    return BitwidthPolicy::uniform(l, cfg.bit_min);
}

void require_feasible_space(int l, int bit_min, const TargetNetSpec& spec, const CompressionConstraint& constraint) {
    const auto floor_policy = BitwidthPolicy::uniform(l, bit_min);
    if (!is_feasible(floor_policy, spec, constraint)) {
        std::ostringstream msg;
        msg << "no feasible policy: best achievable ratio " << compression_ratio(floor_policy, spec, constraint)
            << "x (all-" << bit_min << "-bit) < target " << constraint.target_ratio << "x";
        throw infeasible_error(msg.str());
    }
}

}  // namespace

SearchReport genetic_search(const HyperNet& net, const TargetNetSpec& spec, const CompressionConstraint& constraint,
                            const SearchConfig& config, const EvalSet& eval, const EvalObserver& observer) {
    config.validate();
    const int l = spec.quantizable_count();
    require_feasible_space(l, config.bit_min, spec, constraint);
    Rng rng(config.seed);

    SearchReport report;
    report.target_ratio = constraint.target_ratio;
    report.bit_min = config.bit_min;
    report.bit_max = config.bit_max;

    std::vector<BitwidthPolicy> population;
    population.reserve(static_cast<size_t>(config.population));
    // warm-start with the feasible uniform policies so the search never does
    // worse than the best uniform baseline under its own fitness
    for (int q = config.bit_max; q >= config.bit_min && static_cast<int>(population.size()) < config.population; --q) {
        auto uniform = BitwidthPolicy::uniform(l, q);
        if (is_feasible(uniform, spec, constraint)) population.push_back(std::move(uniform));
    }
    while (static_cast<int>(population.size()) < config.population) {
        BitwidthPolicy p;
        do {
            p = random_policy(l, config.bit_min, config.bit_max, rng);
        } while (!is_feasible(p, spec, constraint));
        population.push_back(std::move(p));
    }

    std::vector<double> fitness(population.size(), 0.0);
    const auto evaluate_all = [&] {
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < static_cast<int>(population.size()); ++i) {
            fitness[static_cast<size_t>(i)] = evaluate_policy(net, spec, population[static_cast<size_t>(i)], eval);
        }
        report.evaluations += static_cast<int64_t>(population.size());
        if (observer) {
            for (size_t i = 0; i < population.size(); ++i) observer(population[i], fitness[i]);
        }
    };

    BitwidthPolicy best_policy;
    double best_fitness = -1.0;
    const auto record_generation = [&](int gen) {
        double mean = 0.0;
        for (size_t i = 0; i < population.size(); ++i) {
            mean += fitness[i];
            if (fitness[i] > best_fitness) {
                best_fitness = fitness[i];
                best_policy = population[i];
            }
        }
        report.generations.push_back({gen, best_fitness, mean / static_cast<double>(population.size())});
    };

    evaluate_all();
    record_generation(0);

    for (int gen = 1; gen <= config.generations; ++gen) {
        // parent pool: top-N of the current population by fitness
        std::vector<size_t> order(population.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return fitness[a] > fitness[b]; });
        const int n_parents = std::min<int>(config.parents, static_cast<int>(order.size()));
        std::vector<BitwidthPolicy> parents;
        parents.reserve(static_cast<size_t>(n_parents));
        for (int i = 0; i < n_parents; ++i) parents.push_back(population[order[static_cast<size_t>(i)]]);

        std::vector<BitwidthPolicy> next;
        next.reserve(population.size());
        next.push_back(best_policy);  // elitism
        while (static_cast<int>(next.size()) < config.population) {
            BitwidthPolicy child;
            bool ok = false;
            for (int attempt = 0; attempt < config.rejection_retries && !ok; ++attempt) {
                const auto& pa = parents[static_cast<size_t>(rng.uniform_int(0, n_parents - 1))];
                const auto& pb = parents[static_cast<size_t>(rng.uniform_int(0, n_parents - 1))];
                child.bits.resize(static_cast<size_t>(l));
                for (int g = 0; g < l; ++g)
                    child.bits[static_cast<size_t>(g)] =
                        rng.uniform() < 0.5 ? pa.bits[static_cast<size_t>(g)] : pb.bits[static_cast<size_t>(g)];
                for (int g = 0; g < l; ++g)
                    if (rng.uniform() < config.mutation_prob)
                        child.bits[static_cast<size_t>(g)] = rng.uniform_int(config.bit_min, config.bit_max);
                ok = is_feasible(child, spec, constraint);
            }
            if (!ok) child = random_feasible(l, config, spec, constraint, rng);
            next.push_back(std::move(child));
        }
        population = std::move(next);
        fitness.assign(population.size(), 0.0);
        evaluate_all();
        record_generation(gen);
    }

    report.best = best_policy;
    report.best_accuracy = best_fitness;
    report.best_ratio = compression_ratio(best_policy, spec, constraint);
    return report;
}

ExhaustiveResult exhaustive_search(const HyperNet& net, const TargetNetSpec& spec,
                                   const CompressionConstraint& constraint, int bit_min, int bit_max,
                                   const EvalSet& eval, int64_t cap) {
    const int l = spec.quantizable_count();
    const int width = bit_max - bit_min + 1;
    if (std::pow(static_cast<double>(width), l) > static_cast<double>(cap)) {
        throw cap_error("exhaustive_search: " + std::to_string(width) + "^" + std::to_string(l) +
                        " policies exceed cap " + std::to_string(cap));
    }

    std::vector<BitwidthPolicy> feasible;
    BitwidthPolicy current = BitwidthPolicy::uniform(l, bit_min);
    while (true) {
        if (is_feasible(current, spec, constraint)) feasible.push_back(current);
        int pos = l - 1;
        while (pos >= 0 && current.bits[static_cast<size_t>(pos)] == bit_max) {
            current.bits[static_cast<size_t>(pos)] = bit_min;
            --pos;
        }
        if (pos < 0) break;
        ++current.bits[static_cast<size_t>(pos)];
    }
    if (feasible.empty()) {
        throw infeasible_error("exhaustive_search: no feasible policy in [" + std::to_string(bit_min) + "," +
                               std::to_string(bit_max) + "] for target " + std::to_string(constraint.target_ratio) +
                               "x");
    }

    std::vector<double> acc(feasible.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(feasible.size()); ++i) {
        acc[static_cast<size_t>(i)] = evaluate_policy(net, spec, feasible[static_cast<size_t>(i)], eval);
    }

    // enumeration order is lexicographic, so on full ties the earliest wins
    ExhaustiveResult best;
    best.accuracy = -1.0;
    for (size_t i = 0; i < feasible.size(); ++i) {
        const double ratio = compression_ratio(feasible[i], spec, constraint);
        if (acc[i] > best.accuracy || (acc[i] == best.accuracy && ratio > best.ratio)) {
            best.best = feasible[i];
            best.accuracy = acc[i];
            best.ratio = ratio;
        }
    }
    return best;
}

nlohmann::json SearchReport::to_json() const {
    nlohmann::json j;
    j["policy"] = best.bits;
    j["ratio"] = best_ratio;
    j["accuracy"] = best_accuracy;
    j["target_ratio"] = target_ratio;
    j["bit_min"] = bit_min;
    j["bit_max"] = bit_max;
    j["evaluations"] = evaluations;
    j["generations"] = nlohmann::json::array();
    for (const auto& g : generations) {
        j["generations"].push_back({{"generation", g.generation}, {"best", g.best}, {"mean", g.mean}});
    }
    return j;
}

SearchReport SearchReport::from_json(const nlohmann::json& j) {
    SearchReport r;
    try {
        r.best.bits = j.at("policy").get<std::vector<int>>();
        r.best_ratio = j.at("ratio").get<double>();
        r.best_accuracy = j.at("accuracy").get<double>();
        r.target_ratio = j.at("target_ratio").get<double>();
        r.bit_min = j.at("bit_min").get<int>();
        r.bit_max = j.at("bit_max").get<int>();
        r.evaluations = j.at("evaluations").get<int64_t>();
        for (const auto& g : j.at("generations")) {
            r.generations.push_back(
                {g.at("generation").get<int>(), g.at("best").get<double>(), g.at("mean").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("search report: ") + e.what());
    }
    return r;
}

std::string SearchReport::normalized_csv(int q_max) const {
    std::ostringstream out;
    out << "layer,bits,normalized\n";
    for (size_t i = 0; i < best.bits.size(); ++i) {
        out << i << "," << best.bits[i] << "," << (static_cast<double>(best.bits[i]) / q_max) << "\n";
    }
    return out.str();
}

}  // namespace hq
