#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hyperquant/errors.hpp"
#include "hyperquant/pipeline.hpp"
#include "hyperquant/policy_search.hpp"

namespace {

// Leftover tokens become config overrides: --train.epochs 5 or --train.epochs=5.
void apply_overrides(hq::RunConfig& cfg, const std::vector<std::string>& extras) {
    for (size_t i = 0; i < extras.size(); ++i) {
        std::string token = extras[i];
        if (token.rfind("--", 0) != 0) {
            throw hq::config_error("unexpected argument '" + token + "' (overrides look like --train.epochs 5)");
        }
        token = token.substr(2);
        std::string value;
        if (const auto eq = token.find('='); eq != std::string::npos) {
            value = token.substr(eq + 1);
            token = token.substr(0, eq);
        } else {
            if (i + 1 >= extras.size()) throw hq::config_error("flag --" + token + " is missing a value");
            value = extras[++i];
        }
        cfg.apply(token, value);
    }
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& extras) {
    hq::RunConfig cfg = hq::RunConfig::load(config_path);
    apply_overrides(cfg, extras);
    cfg.finalize();
    try {
        hq::run_stage(cfg);
    } catch (const hq::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::filesystem::create_directories(cfg.out);
        hq::write_text_file(cfg.out + "/" + cfg.stage + ".failed", std::string(e.what()) + "\n");
        return 1;
    }
    return 0;
}

int cmd_report(const std::string& json_path, std::string csv_path) {
    const auto report = hq::SearchReport::from_json(nlohmann::json::parse(hq::read_text_file(json_path)));
    std::cout << hq::report_policy_table(report);
    if (csv_path.empty()) csv_path = json_path + ".bitwidths.csv";
    hq::write_text_file(csv_path, report.normalized_csv(report.bit_max));
    std::cout << "wrote " << csv_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid weight-quantization policy search: train a weight generator, "
                 "search per-layer bitwidths under a size constraint, retrain"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "execute a pipeline stage from a config file");
    run->add_option("config", config_path, "INI-style run config")->required()->check(CLI::ExistingFile);
    run->allow_extras();

    std::string json_path, csv_path;
    auto* report = app.add_subcommand("report", "print a search report and write the normalized-bitwidth CSV");
    report->add_option("search_json", json_path, "search report JSON")->required()->check(CLI::ExistingFile);
    report->add_option("--csv", csv_path, "output CSV path (default: <search_json>.bitwidths.csv)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, run->remaining());
        if (report->parsed()) return cmd_report(json_path, csv_path);
    } catch (const hq::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
