#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hyperquant/errors.hpp"
#include "hyperquant/trainer.hpp"

using namespace hq;

namespace {

TrainConfig desk_config(TrainMode mode, uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = 8;
    cfg.batch_size = 32;
    cfg.lr = 0.1f;
    cfg.warm_epochs = 4;
    cfg.halve_every = 2;
    cfg.seed = seed;
    cfg.mode = mode;
    return cfg;
}

std::vector<float> snapshot(const HyperNet& net) {
    std::vector<float> all;
    for (const auto& p : net.parameters()) all.insert(all.end(), p->data.begin(), p->data.end());
    return all;
}

}  // namespace

TEST_CASE("sample_policy degenerate range") {
    Rng rng(1);
    auto p = sample_policy(5, 3, 3, rng);
    CHECK(p.bits == std::vector<int>{3, 3, 3, 3, 3});
}

TEST_CASE("sample_policy slots are uniform within 3 sigma") {
    Rng rng(2);
    const int samples = 10000, l = 4;
    std::vector<std::vector<int>> counts(l, std::vector<int>(9, 0));
    for (int s = 0; s < samples; ++s) {
        auto p = sample_policy(l, 1, 8, rng);
        for (int i = 0; i < l; ++i) ++counts[static_cast<size_t>(i)][static_cast<size_t>(p.bits[static_cast<size_t>(i)])];
    }
    const double expected = samples / 8.0;
    const double sigma = std::sqrt(samples * (1.0 / 8.0) * (7.0 / 8.0));
    for (int i = 0; i < l; ++i)
        for (int q = 1; q <= 8; ++q)
            CHECK(std::abs(counts[static_cast<size_t>(i)][static_cast<size_t>(q)] - expected) <= 3.0 * sigma);
}

TEST_CASE("sample_policy is deterministic per seed") {
    Rng a(42), b(42);
    for (int i = 0; i < 50; ++i) CHECK(sample_policy(6, 1, 8, a).bits == sample_policy(6, 1, 8, b).bits);
}

TEST_CASE("learning rate schedule: warm phase then halvings") {
    TrainConfig cfg;
    cfg.lr = 0.1f;
    cfg.warm_epochs = 60;
    cfg.halve_every = 30;
    CHECK(lr_at_epoch(cfg, 0) == 0.1f);
    CHECK(lr_at_epoch(cfg, 59) == 0.1f);
    CHECK(lr_at_epoch(cfg, 60) == 0.05f);
    CHECK(lr_at_epoch(cfg, 89) == 0.05f);
    CHECK(lr_at_epoch(cfg, 90) == 0.025f);
    CHECK(lr_at_epoch(cfg, 120) == 0.0125f);
}

TEST_CASE("sgd momentum update matches the hand-computed rule") {
    // v <- mu*v + g + lambda*w ; w <- w - lr*v, all power-of-two friendly
    auto w = make_tensor({1}, std::vector<float>{1.0f});
    w->grad = {0.5f};
    SgdState state;
    state.init({w});
    state.velocity[0][0] = 0.25f;

    sgd_update({w}, state, /*lr=*/0.5f, /*momentum=*/0.5f, /*weight_decay=*/0.25f);
    // v = 0.5*0.25 + 0.5 + 0.25*1 = 0.875 ; w = 1 - 0.5*0.875 = 0.5625
    CHECK(state.velocity[0][0] == 0.875f);
    CHECK(w->data[0] == 0.5625f);
}

TEST_CASE("first-step weight decay shifts the update by exactly -lr*lambda*w") {
    auto w_with = make_tensor({1}, std::vector<float>{1.0f});
    auto w_without = make_tensor({1}, std::vector<float>{1.0f});
    w_with->grad = {0.5f};
    w_without->grad = {0.5f};
    SgdState s1, s2;
    s1.init({w_with});
    s2.init({w_without});
    sgd_update({w_with}, s1, 0.5f, 0.9f, 0.25f);
    sgd_update({w_without}, s2, 0.5f, 0.9f, 0.0f);
    CHECK(w_with->data[0] - w_without->data[0] == -0.5f * 0.25f * 1.0f);
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
    auto ds = make_synthetic(SyntheticKind::blobs, 200, 3, 0.05f, 9);
    auto spec = builtin_spec("mlp-3", 3);
    auto net = make_hypernet(spec, 16, 1.0f, 1, 8, 9);
    const auto before = snapshot(net);

    TrainConfig cfg = desk_config(TrainMode::train, 9);
    SgdState state;
    auto params = net.parameters();
    state.init(params);
    Rng rng(1);
    auto policy = sample_policy(3, 1, 8, rng);
    const auto batch_idx = std::vector<int>(ds.train_idx.begin(), ds.train_idx.begin() + 16);
    train_step(net, spec, gather_features(ds, batch_idx), gather_labels(ds, batch_idx), policy, state, /*lr=*/0.0f,
               cfg, 0, 0);
    CHECK(snapshot(net) == before);
}

TEST_CASE("zero epochs returns an empty report and leaves the net unchanged") {
    auto ds = make_synthetic(SyntheticKind::blobs, 200, 3, 0.05f, 10);
    auto spec = builtin_spec("mlp-3", 3);
    auto net = make_hypernet(spec, 16, 1.0f, 1, 8, 10);
    const auto before = snapshot(net);
    TrainConfig cfg = desk_config(TrainMode::train, 10);
    cfg.epochs = 0;
    const auto report = run_training(net, spec, ds, cfg);
    CHECK(report.rows.empty());
    CHECK(!report.diverged);
    CHECK(snapshot(net) == before);
}

TEST_CASE("non-finite loss raises a divergence error carrying epoch and step") {
    auto ds = make_synthetic(SyntheticKind::blobs, 100, 3, 0.05f, 11);
    auto spec = builtin_spec("mlp-3", 3);
    auto net = make_hypernet(spec, 16, 1.0f, 1, 8, 11);
    SgdState state;
    state.init(net.parameters());
    TrainConfig cfg = desk_config(TrainMode::train, 11);

    // poison the last layer's bias: it feeds the logits with no relu in between
    net.layer_biases.back()->data[0] = std::nanf("");
    auto batch = gather_features(ds, {0, 1});
    Rng rng(3);
    try {
        train_step(net, spec, batch, gather_labels(ds, {0, 1}), sample_policy(3, 1, 8, rng), state, 0.1f, cfg, 7, 2);
        FAIL("expected divergence_error");
    } catch (const divergence_error& e) {
        CHECK(e.epoch == 7);
        CHECK(e.step == 2);
    }
}

TEST_CASE("training loss decreases on separable blobs with a fixed 8-bit policy") {
    auto ds = make_synthetic(SyntheticKind::blobs, 600, 3, 0.02f, 12);
    auto spec = builtin_spec("mlp-3", 3);
    auto net = make_hypernet(spec, 24, 1.0f, 1, 8, 12);
    TrainConfig cfg = desk_config(TrainMode::retrain, 12);
    cfg.epochs = 11;
    cfg.fixed_policy = BitwidthPolicy::uniform(3, 8);
    const auto report = run_training(net, spec, ds, cfg);
    REQUIRE(report.rows.size() == 11);
    CHECK(report.rows[10].loss < report.rows[0].loss);
}

TEST_CASE("reports are reproducible from the seed") {
    auto ds = make_synthetic(SyntheticKind::blobs, 300, 3, 0.05f, 13);
    auto spec = builtin_spec("mlp-3", 3);

    auto run_once = [&] {
        auto net = make_hypernet(spec, 16, 1.0f, 1, 8, 13);
        TrainConfig cfg = desk_config(TrainMode::train, 13);
        cfg.epochs = 3;
        return run_training(net, spec, ds, cfg).to_csv(/*include_timing=*/false);
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("probe accuracies in the report match evaluate_policy on the same snapshot") {
    auto ds = make_synthetic(SyntheticKind::blobs, 300, 3, 0.05f, 14);
    auto spec = builtin_spec("mlp-3", 3);
    auto net = make_hypernet(spec, 16, 1.0f, 1, 8, 14);
    TrainConfig cfg = desk_config(TrainMode::train, 14);
    cfg.epochs = 2;
    const auto report = run_training(net, spec, ds, cfg);
    REQUIRE(report.rows.size() == 2);

    // the net now sits in its final state; the last row's probes were taken there
    const auto eval = make_eval_set(ds, ds.val_idx, 1024);
    for (size_t i = 0; i < report.probes.size(); ++i) {
        CHECK(report.rows[1].probe_acc[i] == evaluate_policy(net, spec, report.probes[i], eval));
    }
}

TEST_CASE("retraining with the all-8 policy keeps pace with the float baseline") {
    auto ds = make_synthetic(SyntheticKind::blobs, 900, 3, 0.05f, 15);
    auto spec = builtin_spec("mlp-3", 3);
    TrainConfig cfg = desk_config(TrainMode::retrain, 15);
    cfg.epochs = 10;
    cfg.fixed_policy = BitwidthPolicy::uniform(3, 8);
    const auto eval = make_eval_set(ds, ds.test_idx, 1024);

    auto float_net = make_hypernet(spec, 24, 1.0f, 1, 8, 15);
    float_net.mode = QuantMode::identity;
    run_training(float_net, spec, ds, cfg);
    const double float_acc = evaluate_policy(float_net, spec, cfg.fixed_policy, eval);

    auto quant_net = make_hypernet(spec, 24, 1.0f, 1, 8, 15);
    run_training(quant_net, spec, ds, cfg);
    const double quant_acc = evaluate_policy(quant_net, spec, cfg.fixed_policy, eval);

    CHECK(quant_acc >= float_acc - 0.02);
}

TEST_CASE("train config invariants are enforced") {
    TrainConfig cfg;
    cfg.lr = 0.0f;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = TrainConfig{};
    cfg.bit_min = 0;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = TrainConfig{};
    cfg.bit_min = 5;
    cfg.bit_max = 3;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = TrainConfig{};
    cfg.halve_every = 0;
    CHECK_THROWS_AS(cfg.validate(), config_error);
}

TEST_CASE("csv layout: one row per epoch with probe columns") {
    auto ds = make_synthetic(SyntheticKind::blobs, 200, 3, 0.05f, 16);
    auto spec = builtin_spec("mlp-3", 3);
    auto net = make_hypernet(spec, 16, 1.0f, 1, 8, 16);
    TrainConfig cfg = desk_config(TrainMode::train, 16);
    cfg.epochs = 2;
    const auto report = run_training(net, spec, ds, cfg);
    const auto csv = report.to_csv();
    CHECK(csv.find("epoch,loss,probe_8-8-8,probe_5-5-5,probe_1-1-1,seconds") == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 epochs
}
