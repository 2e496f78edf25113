#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "hyperquant/checkpoint.hpp"
#include "hyperquant/errors.hpp"
#include "hyperquant/pipeline.hpp"

using namespace hq;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hq_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig tiny_config(const fs::path& out) {
    RunConfig cfg;
    cfg.stage = "full-pipeline";
    cfg.target = "mlp-3";
    cfg.out = out.string();
    cfg.dataset.kind = "blobs";
    cfg.dataset.n = 240;
    cfg.dataset.classes = 3;
    cfg.dataset.noise = 0.05f;
    cfg.dataset.seed = 5;
    cfg.net.hidden = 8;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 32;
    cfg.train.warm_epochs = 2;
    cfg.train.halve_every = 1;
    cfg.train.seed = 5;
    cfg.search.population = 6;
    cfg.search.generations = 2;
    cfg.search.parents = 3;
    cfg.search.eval_subset = 64;
    cfg.search.seed = 5;
    cfg.constraint.target_ratio = 16.0;
    cfg.finalize();
    return cfg;
}

}  // namespace

TEST_CASE("checkpoint save and load restore parameters bitwise") {
    auto spec = builtin_spec("mlp-3", 4);
    auto net = make_hypernet(spec, 8, 0.5f, 2, 6, 31);
    const auto dir = fresh_dir("ckpt");
    const auto path = (dir / "net.bin").string();
    save_checkpoint(path, net, spec, 1.25);

    auto loaded = load_checkpoint(path);
    CHECK(loaded.target_name == "mlp-3");
    CHECK(loaded.class_count == 4);
    CHECK(loaded.final_loss == 1.25);
    CHECK(loaded.net.hidden == 8);
    CHECK(loaded.net.delta == 0.5f);
    CHECK(loaded.net.bit_min == 2);
    CHECK(loaded.net.bit_max == 6);

    const auto a = net.parameters();
    const auto b = loaded.net.parameters();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i]->data == b[i]->data);
}

TEST_CASE("corrupted checkpoints are format errors") {
    auto spec = builtin_spec("mlp-3", 3);
    auto net = make_hypernet(spec, 8, 1.0f, 1, 8, 32);
    const auto dir = fresh_dir("ckpt_bad");
    const auto path = (dir / "net.bin").string();
    save_checkpoint(path, net, spec, 0.0);

    // truncate the payload
    const auto size = fs::file_size(path);
    fs::resize_file(path, size - 10);
    CHECK_THROWS_AS(load_checkpoint(path), format_error);

    // bad magic
    {
        std::ofstream f(path, std::ios::binary);
        f << "NOTACKPT";
    }
    CHECK_THROWS_AS(load_checkpoint(path), format_error);
    CHECK_THROWS_AS(load_checkpoint((dir / "missing.bin").string()), format_error);
}

TEST_CASE("search report JSON round-trips") {
    SearchReport r;
    r.best = BitwidthPolicy({8, 2, 8});
    r.best_ratio = 10.67;
    r.best_accuracy = 0.91;
    r.target_ratio = 10.0;
    r.bit_min = 1;
    r.bit_max = 8;
    r.evaluations = 120;
    r.generations = {{0, 0.8, 0.5}, {1, 0.91, 0.6}};

    const auto j = r.to_json();
    const auto back = SearchReport::from_json(j);
    CHECK(back.to_json() == j);
    CHECK(back.best == r.best);
    CHECK(back.best_accuracy == r.best_accuracy);
    CHECK(back.generations.size() == 2);

    CHECK_THROWS_AS(SearchReport::from_json(nlohmann::json{{"policy", 3}}), format_error);
}

TEST_CASE("normalized bitwidth table and CSV") {
    SearchReport r;
    r.best = BitwidthPolicy({8, 2, 8});
    r.bit_max = 8;
    r.best_ratio = 12.0;
    r.target_ratio = 12.0;
    r.best_accuracy = 0.9;
    const auto csv = r.normalized_csv(8);
    CHECK(csv == "layer,bits,normalized\n0,8,1\n1,2,0.25\n2,8,1\n");

    // uniform policies normalize to a constant column
    SearchReport u;
    u.best = BitwidthPolicy({4, 4, 4, 4});
    u.bit_max = 8;
    const auto ucsv = u.normalized_csv(8);
    CHECK(ucsv.find("0,4,0.5") != std::string::npos);
    CHECK(ucsv.find("3,4,0.5") != std::string::npos);

    const auto table = report_policy_table(r);
    CHECK(table.find("0.250") != std::string::npos);
    CHECK(table.find("accuracy 0.9000") != std::string::npos);
}

TEST_CASE("config files parse with sections and dotted overrides") {
    const auto dir = fresh_dir("cfg");
    const auto path = (dir / "run.ini").string();
    write_text_file(path,
                    "# comment\n"
                    "stage = train\n"
                    "target = cnn-5\n"
                    "out = " + (dir / "artifacts").string() + "\n"
                    "\n[train]\n"
                    "epochs = 7\n"
                    "lr = 0.05\n"
                    "\n[search]\n"
                    "population = 9\n"
                    "\n[constraint]\n"
                    "target_ratio = 25\n");

    auto cfg = RunConfig::load(path);
    CHECK(cfg.stage == "train");
    CHECK(cfg.target == "cnn-5");
    CHECK(cfg.train.epochs == 7);
    CHECK(cfg.train.lr == 0.05f);
    CHECK(cfg.search.population == 9);

    cfg.apply("train.epochs", "11");
    CHECK(cfg.train.epochs == 11);

    cfg.finalize();
    // target 25x narrows the search range unless set explicitly
    CHECK(cfg.search.bit_min == 1);
    CHECK(cfg.search.bit_max == 3);
    CHECK(cfg.checkpoint_out == cfg.out + "/checkpoint.bin");

    CHECK_THROWS_AS(cfg.apply("train.epoch", "3"), config_error);
    CHECK_THROWS_AS(cfg.apply("train.epochs", "many"), config_error);

    RunConfig bad;
    bad.stage = "deploy";
    CHECK_THROWS_AS(bad.finalize(), config_error);

    write_text_file(path, "stage train\n");
    CHECK_THROWS_AS(RunConfig::load(path), format_error);
}

TEST_CASE("explicit search range survives finalize") {
    RunConfig cfg;
    cfg.stage = "search";
    cfg.constraint.target_ratio = 25.0;
    cfg.apply("search.bit_min", "2");
    cfg.apply("search.bit_max", "6");
    cfg.finalize();
    CHECK(cfg.search.bit_min == 2);
    CHECK(cfg.search.bit_max == 6);
}

TEST_CASE("output dir env var overrides the config") {
    const auto dir = fresh_dir("envout");
    RunConfig cfg;
    cfg.stage = "train";
    cfg.out = "somewhere/else";
    setenv("HYPERQUANT_OUT", dir.string().c_str(), 1);
    cfg.finalize();
    unsetenv("HYPERQUANT_OUT");
    CHECK(cfg.out == dir.string());
}

TEST_CASE("full pipeline emits the complete artifact set") {
    const auto dir = fresh_dir("pipeline");
    auto cfg = tiny_config(dir);
    run_stage(cfg);

    for (const char* name : {"resolved_config.ini", "checkpoint.bin", "train_report.csv", "search_report.json",
                             "bitwidths.csv", "final_checkpoint.bin", "retrain_report.csv"}) {
        CHECK_MESSAGE(fs::exists(dir / name), name);
    }
    CHECK(!fs::exists(dir / "full-pipeline.failed"));

    // the search artifact parses and its policy is feasible at the target
    const auto report = SearchReport::from_json(nlohmann::json::parse(read_text_file((dir / "search_report.json").string())));
    CHECK(report.best_ratio >= 16.0);
    CHECK(report.bit_max == 5);  // 16x preset
}

TEST_CASE("uniform sweep writes the expected ratios") {
    const auto dir = fresh_dir("sweep");
    auto cfg = tiny_config(dir);
    cfg.stage = "uniform-sweep";
    cfg.train.epochs = 1;
    cfg.sweep_bits = {1, 2, 4, 8};
    run_stage(cfg);

    const auto csv = read_text_file((dir / "uniform_sweep.csv").string());
    CHECK(csv.find("q,ratio,test_accuracy\n") == 0);
    CHECK(csv.find("1,32,") != std::string::npos);
    CHECK(csv.find("2,16,") != std::string::npos);
    CHECK(csv.find("4,8,") != std::string::npos);
    CHECK(csv.find("8,4,") != std::string::npos);
}

TEST_CASE("finetune resumes from the checkpoint's recorded loss") {
    const auto dir = fresh_dir("finetune");
    auto ds = make_synthetic(SyntheticKind::blobs, 240, 3, 0.05f, 21);
    auto spec = builtin_spec("mlp-3", 3);
    auto net = make_hypernet(spec, 8, 1.0f, 1, 8, 21);

    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 32;
    tc.warm_epochs = 2;
    tc.halve_every = 1;
    tc.seed = 21;
    tc.mode = TrainMode::retrain;
    tc.fixed_policy = BitwidthPolicy::uniform(3, 8);
    run_training(net, spec, ds, tc);

    const double final_loss = evaluate_mean_loss(net, spec, ds, ds.train_idx, tc.fixed_policy, tc.batch_size);
    const auto path = (dir / "net.bin").string();
    save_checkpoint(path, net, spec, final_loss);

    auto resumed = load_checkpoint(path);
    resumed.net.set_requires_grad(true);
    TrainConfig ft = tc;
    ft.mode = TrainMode::finetune;
    ft.epochs = 1;
    const auto report = run_training(resumed.net, spec, ds, ft);
    REQUIRE(report.has_initial_eval_loss);
    CHECK(report.initial_eval_loss == doctest::Approx(resumed.final_loss).epsilon(1e-4));
}

TEST_CASE("search stage requires an existing checkpoint") {
    const auto dir = fresh_dir("nockpt");
    auto cfg = tiny_config(dir);
    cfg.stage = "search";
    CHECK_THROWS_AS(run_stage(cfg), format_error);
}
