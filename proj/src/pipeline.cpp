#include "hyperquant/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hyperquant/checkpoint.hpp"
#include "hyperquant/errors.hpp"
#include "hyperquant/quantizer.hpp"

namespace hq {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': expected integer, got '" + v + "'");
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': expected unsigned integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw config_error("config key '" + key + "': expected number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw config_error("config key '" + key + "': expected boolean, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(parse_int(key, item));
    }
    if (out.empty()) throw config_error("config key '" + key + "': expected a comma-separated integer list");
    return out;
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "stage") stage = value;
    else if (key == "target") target = value;
    else if (key == "out") out = value;
    else if (key == "checkpoint_in") checkpoint_in = value;
    else if (key == "checkpoint_out") checkpoint_out = value;
    else if (key == "search_json") search_json = value;
    else if (key == "dataset.kind") dataset.kind = value;
    else if (key == "dataset.n") dataset.n = parse_int(key, value);
    else if (key == "dataset.classes") dataset.classes = parse_int(key, value);
    else if (key == "dataset.noise") dataset.noise = static_cast<float>(parse_double(key, value));
    else if (key == "dataset.seed") dataset.seed = parse_u64(key, value);
    else if (key == "dataset.images") dataset.images = value;
    else if (key == "dataset.labels") dataset.labels = value;
    else if (key == "net.hidden") net.hidden = parse_int(key, value);
    else if (key == "net.delta") net.delta = static_cast<float>(parse_double(key, value));
    else if (key == "train.epochs") train.epochs = parse_int(key, value);
    else if (key == "train.batch_size") train.batch_size = parse_int(key, value);
    else if (key == "train.lr") train.lr = static_cast<float>(parse_double(key, value));
    else if (key == "train.momentum") train.momentum = static_cast<float>(parse_double(key, value));
    else if (key == "train.weight_decay") train.weight_decay = static_cast<float>(parse_double(key, value));
    else if (key == "train.warm_epochs") train.warm_epochs = parse_int(key, value);
    else if (key == "train.halve_every") train.halve_every = parse_int(key, value);
    else if (key == "train.bit_min") train.bit_min = parse_int(key, value);
    else if (key == "train.bit_max") train.bit_max = parse_int(key, value);
    else if (key == "train.seed") train.seed = parse_u64(key, value);
    else if (key == "search.population") search.population = parse_int(key, value);
    else if (key == "search.generations") search.generations = parse_int(key, value);
    else if (key == "search.parents") search.parents = parse_int(key, value);
    else if (key == "search.mutation_prob") search.mutation_prob = parse_double(key, value);
    else if (key == "search.bit_min") { search.bit_min = parse_int(key, value); search_range_explicit = true; }
    else if (key == "search.bit_max") { search.bit_max = parse_int(key, value); search_range_explicit = true; }
    else if (key == "search.eval_subset") search.eval_subset = parse_int(key, value);
    else if (key == "search.seed") search.seed = parse_u64(key, value);
    else if (key == "constraint.target_ratio") constraint.target_ratio = parse_double(key, value);
    else if (key == "constraint.include_side_params") constraint.include_side_params = parse_bool(key, value);
    else if (key == "retrain.mode") retrain.mode = value;
    else if (key == "retrain.policy") retrain.policy = parse_int_list(key, value);
    else if (key == "sweep.bits") sweep_bits = parse_int_list(key, value);
    else throw config_error("unknown config key '" + key + "'");
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error(path + ": cannot open config file");
    RunConfig cfg;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw format_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        cfg.apply(section.empty() ? key : section + "." + key, value);
    }
    return cfg;
}

void RunConfig::finalize() {
    if (const char* env_out = std::getenv("HYPERQUANT_OUT"); env_out && *env_out) out = env_out;
    if (checkpoint_out.empty()) checkpoint_out = out + "/checkpoint.bin";
    if (checkpoint_in.empty()) checkpoint_in = checkpoint_out;
    if (search_json.empty()) search_json = out + "/search_report.json";
    if (!search_range_explicit) {
        const auto range = bit_range_for_ratio(constraint.target_ratio);
        search.bit_min = range.first;
        search.bit_max = range.second;
    }
    if (stage != "train" && stage != "search" && stage != "retrain" && stage != "uniform-sweep" &&
        stage != "full-pipeline") {
        throw config_error("stage must be one of train, search, retrain, uniform-sweep, full-pipeline; got '" + stage +
                           "'");
    }
}

std::string RunConfig::resolved_ini() const {
    std::ostringstream s;
    s << "stage = " << stage << "\n";
    s << "target = " << target << "\n";
    s << "out = " << out << "\n";
    s << "checkpoint_in = " << checkpoint_in << "\n";
    s << "checkpoint_out = " << checkpoint_out << "\n";
    s << "search_json = " << search_json << "\n\n";
    s << "[dataset]\n";
    s << "kind = " << dataset.kind << "\n";
    s << "n = " << dataset.n << "\n";
    s << "classes = " << dataset.classes << "\n";
    s << "noise = " << dataset.noise << "\n";
    s << "seed = " << dataset.seed << "\n";
    if (!dataset.images.empty()) s << "images = " << dataset.images << "\n";
    if (!dataset.labels.empty()) s << "labels = " << dataset.labels << "\n";
    s << "\n[net]\n";
    s << "hidden = " << net.hidden << "\n";
    s << "delta = " << net.delta << "\n";
    s << "\n[train]\n";
    s << "epochs = " << train.epochs << "\n";
    s << "batch_size = " << train.batch_size << "\n";
    s << "lr = " << train.lr << "\n";
    s << "momentum = " << train.momentum << "\n";
    s << "weight_decay = " << train.weight_decay << "\n";
    s << "warm_epochs = " << train.warm_epochs << "\n";
    s << "halve_every = " << train.halve_every << "\n";
    s << "bit_min = " << train.bit_min << "\n";
    s << "bit_max = " << train.bit_max << "\n";
    s << "seed = " << train.seed << "\n";
    s << "\n[search]\n";
    s << "population = " << search.population << "\n";
    s << "generations = " << search.generations << "\n";
    s << "parents = " << search.parents << "\n";
    s << "mutation_prob = " << search.mutation_prob << "\n";
    s << "bit_min = " << search.bit_min << "\n";
    s << "bit_max = " << search.bit_max << "\n";
    s << "eval_subset = " << search.eval_subset << "\n";
    s << "seed = " << search.seed << "\n";
    s << "\n[constraint]\n";
    s << "target_ratio = " << constraint.target_ratio << "\n";
    s << "include_side_params = " << (constraint.include_side_params ? "true" : "false") << "\n";
    s << "\n[retrain]\n";
    s << "mode = " << retrain.mode << "\n";
    if (!retrain.policy.empty()) {
        s << "policy = ";
        for (size_t i = 0; i < retrain.policy.size(); ++i) s << (i ? "," : "") << retrain.policy[i];
        s << "\n";
    }
    s << "\n[sweep]\n";
    s << "bits = ";
    for (size_t i = 0; i < sweep_bits.size(); ++i) s << (i ? "," : "") << sweep_bits[i];
    s << "\n";
    return s.str();
}

Dataset build_dataset(const DatasetConfig& cfg) {
    if (cfg.kind == "idx") {
        if (cfg.images.empty() || cfg.labels.empty()) {
            throw config_error("dataset.kind = idx requires dataset.images and dataset.labels");
        }
        Dataset ds = load_idx(cfg.images, cfg.labels);
        split_dataset(ds, 0.8, 0.1, cfg.seed);
        return ds;
    }
    return make_synthetic(synthetic_kind_from(cfg.kind), cfg.n, cfg.classes, cfg.noise, cfg.seed);
}

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error(path + ": cannot open for writing");
    out << body;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error(path + ": cannot open");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

namespace {

void stage_train(const RunConfig& cfg) {
    Dataset ds = build_dataset(cfg.dataset);
    const TargetNetSpec spec = builtin_spec(cfg.target, ds.classes);
    HyperNet hnet = make_hypernet(spec, cfg.net.hidden, cfg.net.delta, cfg.train.bit_min, cfg.train.bit_max,
                                  cfg.train.seed);
    TrainConfig tc = cfg.train;
    tc.mode = TrainMode::train;
    const TrainReport report = run_training(hnet, spec, ds, tc);
    write_text_file(cfg.out + "/train_report.csv", report.to_csv());
    if (report.diverged) {
        throw divergence_error("training diverged at epoch " + std::to_string(report.diverged_epoch) + ", step " +
                                   std::to_string(report.diverged_step),
                               report.diverged_epoch, report.diverged_step);
    }
    const double final_loss = report.rows.empty() ? 0.0 : report.rows.back().loss;
    save_checkpoint(cfg.checkpoint_out, hnet, spec, final_loss);
    std::cout << "wrote " << cfg.checkpoint_out << " and train_report.csv"
              << (report.rows.empty() ? "" : " (final loss " + std::to_string(report.rows.back().loss) + ")")
              << "\n";
}

void stage_search(const RunConfig& cfg) {
    LoadedCheckpoint loaded = load_checkpoint(cfg.checkpoint_in);
    Dataset ds = build_dataset(cfg.dataset);
    if (ds.classes != loaded.class_count) {
        throw config_error("dataset has " + std::to_string(ds.classes) + " classes but checkpoint was trained with " +
                           std::to_string(loaded.class_count));
    }
    const TargetNetSpec spec = builtin_spec(loaded.target_name, loaded.class_count);
    loaded.net.set_requires_grad(false);  // frozen snapshot
    const EvalSet eval = make_eval_set(ds, ds.val_idx.empty() ? ds.train_idx : ds.val_idx, cfg.search.eval_subset);
    // search may probe any bitwidth in its configured range
    loaded.net.bit_min = std::min(loaded.net.bit_min, cfg.search.bit_min);
    loaded.net.bit_max = std::max(loaded.net.bit_max, cfg.search.bit_max);
    const SearchReport report = genetic_search(loaded.net, spec, cfg.constraint, cfg.search, eval);
    write_text_file(cfg.search_json, report.to_json().dump(2) + "\n");
    write_text_file(cfg.out + "/bitwidths.csv", report.normalized_csv(report.bit_max));
    std::cout << report_policy_table(report);
    std::cout << "wrote " << cfg.search_json << " and bitwidths.csv\n";
}

BitwidthPolicy retrain_policy(const RunConfig& cfg) {
    if (!cfg.retrain.policy.empty()) return BitwidthPolicy(cfg.retrain.policy);
    const auto report = SearchReport::from_json(nlohmann::json::parse(read_text_file(cfg.search_json)));
    return report.best;
}

void stage_retrain(const RunConfig& cfg) {
    LoadedCheckpoint loaded = load_checkpoint(cfg.checkpoint_in);
    Dataset ds = build_dataset(cfg.dataset);
    const TargetNetSpec spec = builtin_spec(loaded.target_name, loaded.class_count);
    const BitwidthPolicy policy = retrain_policy(cfg);
    policy.validate(spec.quantizable_count(), kMinBits, kMaxBits);

    TrainConfig tc = cfg.train;
    tc.mode = train_mode_from(cfg.retrain.mode);
    if (tc.mode == TrainMode::train) throw config_error("retrain.mode must be retrain or finetune");
    tc.fixed_policy = policy;

    HyperNet hnet =
        tc.mode == TrainMode::finetune
            ? std::move(loaded.net)
            : make_hypernet(spec, loaded.net.hidden, loaded.net.delta, kMinBits, kMaxBits, cfg.train.seed);
    hnet.set_requires_grad(true);
    hnet.bit_min = kMinBits;  // the fixed policy may sit outside the stage-1 range
    hnet.bit_max = kMaxBits;

    const TrainReport report = run_training(hnet, spec, ds, tc);
    write_text_file(cfg.out + "/retrain_report.csv", report.to_csv());
    if (report.diverged) {
        throw divergence_error("retraining diverged at epoch " + std::to_string(report.diverged_epoch) + ", step " +
                                   std::to_string(report.diverged_step),
                               report.diverged_epoch, report.diverged_step);
    }
    const double final_loss = evaluate_mean_loss(hnet, spec, ds, ds.train_idx, policy, cfg.train.batch_size);
    save_checkpoint(cfg.out + "/final_checkpoint.bin", hnet, spec, final_loss);

    const EvalSet test = make_eval_set(ds, ds.test_idx.empty() ? ds.train_idx : ds.test_idx, ds.count());
    const double acc = evaluate_policy(hnet, spec, policy, test);
    std::cout << "policy " << policy.str() << " ratio " << compression_ratio(policy, spec, cfg.constraint)
              << "x test accuracy " << acc << "\n";
    std::cout << "wrote final_checkpoint.bin and retrain_report.csv\n";
}

void stage_uniform_sweep(const RunConfig& cfg) {
    Dataset ds = build_dataset(cfg.dataset);
    const TargetNetSpec spec = builtin_spec(cfg.target, ds.classes);
    const EvalSet test = make_eval_set(ds, ds.test_idx.empty() ? ds.train_idx : ds.test_idx, ds.count());

    std::ostringstream csv;
    csv << "q,ratio,test_accuracy\n";
    for (int q : cfg.sweep_bits) {
        validate_bits(q);
        const BitwidthPolicy policy = BitwidthPolicy::uniform(spec.quantizable_count(), q);
        HyperNet hnet = make_hypernet(spec, cfg.net.hidden, cfg.net.delta, kMinBits, kMaxBits, cfg.train.seed);
        TrainConfig tc = cfg.train;
        tc.mode = TrainMode::retrain;
        tc.fixed_policy = policy;
        const TrainReport report = run_training(hnet, spec, ds, tc);
        if (report.diverged) {
            throw divergence_error("uniform-" + std::to_string(q) + " retraining diverged", report.diverged_epoch,
                                   report.diverged_step);
        }
        const double acc = evaluate_policy(hnet, spec, policy, test);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", q, compression_ratio(policy, spec, cfg.constraint), acc);
        csv << buf;
        std::cout << "uniform " << q << "-bit: accuracy " << acc << "\n";
    }
    write_text_file(cfg.out + "/uniform_sweep.csv", csv.str());
    std::cout << "wrote uniform_sweep.csv\n";
}

}  // namespace

void run_stage(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out);
    write_text_file(cfg.out + "/resolved_config.ini", cfg.resolved_ini());
    if (cfg.stage == "train") {
        stage_train(cfg);
    } else if (cfg.stage == "search") {
        stage_search(cfg);
    } else if (cfg.stage == "retrain") {
        stage_retrain(cfg);
    } else if (cfg.stage == "uniform-sweep") {
        stage_uniform_sweep(cfg);
    } else if (cfg.stage == "full-pipeline") {
        stage_train(cfg);
        stage_search(cfg);
        stage_retrain(cfg);
    } else {
        throw config_error("unknown stage '" + cfg.stage + "'");
    }
}

std::string report_policy_table(const SearchReport& report) {
    std::ostringstream s;
    s << "layer  bits  bits/q_max\n";
    char buf[64];
    for (size_t i = 0; i < report.best.bits.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%5zu  %4d  %10.3f\n", i, report.best.bits[i],
                      static_cast<double>(report.best.bits[i]) / report.bit_max);
        s << buf;
    }
    std::snprintf(buf, sizeof(buf), "ratio %.3fx (target %.3fx), accuracy %.4f\n", report.best_ratio,
                  report.target_ratio, report.best_accuracy);
    s << buf;
    return s.str();
}

}  // namespace hq
