#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hyperquant/datasets.hpp"
#include "hyperquant/errors.hpp"

using namespace hq;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("hq_ds_" + name)).string();
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("noise-free blobs are solved by nearest class centroid") {
    auto ds = make_synthetic(SyntheticKind::blobs, 400, 4, 0.0f, 3);
    const auto shape = ds.sample_shape();
    const size_t per = static_cast<size_t>(shape_size(shape));

    std::vector<std::vector<double>> centroid(4, std::vector<double>(per, 0.0));
    std::vector<int> counts(4, 0);
    for (int i = 0; i < ds.count(); ++i) {
        const int c = ds.labels[static_cast<size_t>(i)];
        ++counts[static_cast<size_t>(c)];
        for (size_t j = 0; j < per; ++j)
            centroid[static_cast<size_t>(c)][j] += ds.features->data[static_cast<size_t>(i) * per + j];
    }
    for (int c = 0; c < 4; ++c) {
        REQUIRE(counts[static_cast<size_t>(c)] > 0);
        for (auto& v : centroid[static_cast<size_t>(c)]) v /= counts[static_cast<size_t>(c)];
    }

    int correct = 0;
    for (int i = 0; i < ds.count(); ++i) {
        int best = -1;
        double best_d = 1e300;
        for (int c = 0; c < 4; ++c) {
            double d = 0.0;
            for (size_t j = 0; j < per; ++j) {
                const double diff = ds.features->data[static_cast<size_t>(i) * per + j] - centroid[static_cast<size_t>(c)][j];
                d += diff * diff;
            }
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        if (best == ds.labels[static_cast<size_t>(i)]) ++correct;
    }
    CHECK(correct == ds.count());
}

TEST_CASE("synthetic generation is deterministic per seed") {
    auto a = make_synthetic(SyntheticKind::spirals, 300, 3, 0.02f, 99);
    auto b = make_synthetic(SyntheticKind::spirals, 300, 3, 0.02f, 99);
    CHECK(a.features->data == b.features->data);
    CHECK(a.labels == b.labels);
    CHECK(a.train_idx == b.train_idx);
    auto c = make_synthetic(SyntheticKind::spirals, 300, 3, 0.02f, 100);
    CHECK(a.features->data != c.features->data);
}

TEST_CASE("class frequencies are uniform within 3 sigma") {
    const int n = 10000, k = 4;
    auto ds = make_synthetic(SyntheticKind::blobs, n, k, 0.05f, 11);
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int label : ds.labels) ++counts[static_cast<size_t>(label)];
    const double expected = static_cast<double>(n) / k;
    const double sigma = std::sqrt(n * (1.0 / k) * (1.0 - 1.0 / k));
    for (int c = 0; c < k; ++c) {
        CHECK(std::abs(counts[static_cast<size_t>(c)] - expected) <= 3.0 * sigma);
    }
}

TEST_CASE("invalid synthetic parameters are input errors") {
    CHECK_THROWS_AS(make_synthetic(SyntheticKind::blobs, 2, 4, 0.1f, 0), input_error);
    CHECK_THROWS_AS(make_synthetic(SyntheticKind::blobs, 100, 1, 0.1f, 0), input_error);
    CHECK_THROWS_AS(make_synthetic(SyntheticKind::blobs, 100, 4, -0.5f, 0), input_error);
    CHECK_THROWS_AS(synthetic_kind_from("moons"), lookup_error);
}

TEST_CASE("splits are disjoint and cover the dataset") {
    auto ds = make_synthetic(SyntheticKind::blobs, 503, 3, 0.05f, 21);
    std::vector<int> seen(503, 0);
    for (int i : ds.train_idx) ++seen[static_cast<size_t>(i)];
    for (int i : ds.val_idx) ++seen[static_cast<size_t>(i)];
    for (int i : ds.test_idx) ++seen[static_cast<size_t>(i)];
    for (int count : seen) CHECK(count == 1);

    // same seed, same membership
    Dataset copy = ds;
    split_dataset(copy, 0.8, 0.1, 77);
    Dataset copy2 = ds;
    split_dataset(copy2, 0.8, 0.1, 77);
    CHECK(copy.train_idx == copy2.train_idx);
    CHECK(copy.val_idx == copy2.val_idx);
}

TEST_CASE("single-pixel IDX file scales 255 to exactly 1.0") {
    const auto img = tmp_path("one.images");
    const auto lab = tmp_path("one.labels");
    write_idx(img, lab, 1, 1, 1, {255}, {0});
    auto ds = load_idx(img, lab);
    CHECK(ds.count() == 1);
    CHECK(ds.features->data[0] == 1.0f);
    CHECK(ds.labels[0] == 0);
}

TEST_CASE("IDX round-trip is bitwise") {
    const auto img = tmp_path("rt.images");
    const auto lab = tmp_path("rt.labels");
    std::vector<uint8_t> pixels(3 * 2 * 2);
    for (size_t i = 0; i < pixels.size(); ++i) pixels[i] = static_cast<uint8_t>(i * 21 + 3);
    write_idx(img, lab, 3, 2, 2, pixels, {2, 0, 1});

    auto ds = load_idx(img, lab);
    REQUIRE(ds.count() == 3);
    CHECK(ds.labels == std::vector<int>{2, 0, 1});
    for (size_t i = 0; i < pixels.size(); ++i) {
        CHECK(ds.features->data[i] == static_cast<float>(pixels[i]) / 255.0f);
    }

    // write the loaded dataset back out and compare the containers bitwise
    const auto img2 = tmp_path("rt2.images");
    const auto lab2 = tmp_path("rt2.labels");
    std::vector<uint8_t> rescaled(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i)
        rescaled[i] = static_cast<uint8_t>(std::lround(ds.features->data[i] * 255.0f));
    write_idx(img2, lab2, 3, 2, 2, rescaled, {2, 0, 1});
    CHECK(read_text(img) == read_text(img2));
    CHECK(read_text(lab) == read_text(lab2));
}

TEST_CASE("IDX format errors carry byte positions") {
    const auto img = tmp_path("bad.images");
    const auto lab = tmp_path("bad.labels");

    // bad magic
    {
        std::ofstream f(img, std::ios::binary);
        const char junk[16] = {0};
        f.write(junk, sizeof(junk));
    }
    write_idx(tmp_path("ok.images"), lab, 1, 1, 1, {9}, {1});
    CHECK_THROWS_AS(load_idx(img, lab), format_error);

    // count mismatch between images and labels
    write_idx(img, tmp_path("scratch.labels"), 2, 1, 1, {1, 2}, {0, 1});
    write_idx(tmp_path("scratch.images"), lab, 1, 1, 1, {9}, {1});
    CHECK_THROWS_AS(load_idx(img, lab), format_error);

    // truncated pixel payload
    const auto timg = tmp_path("trunc.images");
    write_idx(timg, lab, 1, 1, 1, {9}, {1});
    std::filesystem::resize_file(timg, 16);
    try {
        load_idx(timg, lab);
        FAIL("expected format_error");
    } catch (const format_error& e) {
        CHECK(std::string(e.what()).find("byte") != std::string::npos);
    }
}

TEST_CASE("gather produces contiguous batches in index order") {
    auto ds = make_synthetic(SyntheticKind::blobs, 50, 2, 0.05f, 5);
    auto batch = gather_features(ds, {4, 9});
    CHECK(batch->shape == std::vector<int>{2, 1, 8, 8});
    const size_t per = 64;
    for (size_t j = 0; j < per; ++j) {
        CHECK(batch->data[j] == ds.features->data[4 * per + j]);
        CHECK(batch->data[per + j] == ds.features->data[9 * per + j]);
    }
    CHECK(gather_labels(ds, {4, 9}) == std::vector<int>{ds.labels[4], ds.labels[9]});
}
