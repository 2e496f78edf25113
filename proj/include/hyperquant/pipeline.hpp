#pragma once

#include <string>
#include <vector>

#include "hyperquant/datasets.hpp"
#include "hyperquant/policy_search.hpp"
#include "hyperquant/trainer.hpp"

namespace hq {

struct DatasetConfig {
    std::string kind = "blobs";  // blobs | spirals | idx
    int n = 4000;
    int classes = 4;
    float noise = 0.05f;
    uint64_t seed = 1;
    std::string images;  // idx only
    std::string labels;
};

struct NetConfig {
    int hidden = 64;
    float delta = 1.0f;
};

struct RetrainConfig {
    std::string mode = "retrain";  // retrain | finetune
    std::vector<int> policy;       // empty: take the best policy from search_json
};

// Declarative run description: an INI-style file with [sections], every key
// overridable by a --section.key flag of the same dotted name.
struct RunConfig {
    std::string stage;  // train | search | retrain | uniform-sweep | full-pipeline
    std::string target = "mlp-3";
    std::string out = "runs/out";
    std::string checkpoint_in;   // default: <out>/checkpoint.bin
    std::string checkpoint_out;  // default: <out>/checkpoint.bin
    std::string search_json;     // default: <out>/search_report.json

    DatasetConfig dataset;
    NetConfig net;
    TrainConfig train;
    SearchConfig search;
    CompressionConstraint constraint;
    RetrainConfig retrain;
    std::vector<int> sweep_bits = {1, 2, 4, 8};

    bool search_range_explicit = false;

    static RunConfig load(const std::string& path);
    void apply(const std::string& key, const std::string& value);
    // Applies the HYPERQUANT_OUT override, derives default paths, narrows the
    // search bit range from the target ratio unless set explicitly, and
    // validates the stage name.
    void finalize();
    std::string resolved_ini() const;
};

Dataset build_dataset(const DatasetConfig& cfg);

// Executes one stage (or the full three-stage chain) and writes its artifacts
// under cfg.out. Throws hq::error subtypes on failure; a partial stage leaves
// a "<stage>.failed" marker beside its artifacts.
void run_stage(const RunConfig& cfg);

// Human-readable per-layer table for a search report.
std::string report_policy_table(const SearchReport& report);

void write_text_file(const std::string& path, const std::string& body);
std::string read_text_file(const std::string& path);

}  // namespace hq
