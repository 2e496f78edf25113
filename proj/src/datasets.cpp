#include "hyperquant/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "hyperquant/errors.hpp"
#include "hyperquant/rng.hpp"

namespace hq {

namespace {

constexpr int kGrid = 8;            // synthetic samples render on an 8x8 grid
constexpr float kBumpSigma = 0.09f;  // bump width in unit coordinates

// Renders a point in the unit square as a Gaussian intensity bump.
void render_bump(float x, float y, float* out) {
    const float inv = 1.0f / (2.0f * kBumpSigma * kBumpSigma);
    for (int iy = 0; iy < kGrid; ++iy) {
        const float py = (static_cast<float>(iy) + 0.5f) / kGrid;
        for (int ix = 0; ix < kGrid; ++ix) {
            const float px = (static_cast<float>(ix) + 0.5f) / kGrid;
            const float d2 = (px - x) * (px - x) + (py - y) * (py - y);
            out[iy * kGrid + ix] = std::exp(-d2 * inv);
        }
    }
}

}  // namespace

std::vector<int> Dataset::sample_shape() const {
    if (!features) return {};
    return {features->dim(1), features->dim(2), features->dim(3)};
}

SyntheticKind synthetic_kind_from(const std::string& name) {
    if (name == "blobs") return SyntheticKind::blobs;
    if (name == "spirals") return SyntheticKind::spirals;
    throw lookup_error("unknown synthetic dataset '" + name + "'; available: blobs, spirals");
}

Dataset make_synthetic(SyntheticKind kind, int n, int classes, float noise, uint64_t seed) {
    if (classes < 2) throw input_error("make_synthetic: need at least 2 classes");
    if (n < classes) throw input_error("make_synthetic: n must be >= classes");
    if (noise < 0.0f) throw input_error("make_synthetic: noise must be >= 0");

    Dataset ds;
    ds.classes = classes;
    ds.labels.resize(static_cast<size_t>(n));
    ds.features = make_tensor({n, 1, kGrid, kGrid});
    Rng rng(seed);

    for (int i = 0; i < n; ++i) {
        const int c = rng.uniform_int(0, classes - 1);
        float x = 0.5f, y = 0.5f;
        if (kind == SyntheticKind::blobs) {
            const float ang = 2.0f * static_cast<float>(M_PI) * c / classes;
            x = 0.5f + 0.3f * std::cos(ang) + rng.normal(0.0f, noise);
            y = 0.5f + 0.3f * std::sin(ang) + rng.normal(0.0f, noise);
        } else {
            const float t = rng.uniform_real(0.0f, 1.0f);
            const float r = 0.08f + 0.36f * t;
            const float ang = 2.0f * static_cast<float>(M_PI) * (1.6f * t + static_cast<float>(c) / classes);
            x = 0.5f + r * std::cos(ang) + rng.normal(0.0f, noise);
            y = 0.5f + r * std::sin(ang) + rng.normal(0.0f, noise);
        }
        x = std::clamp(x, 0.0f, 1.0f);
        y = std::clamp(y, 0.0f, 1.0f);
        ds.labels[static_cast<size_t>(i)] = c;
        render_bump(x, y, ds.features->data.data() + static_cast<size_t>(i) * kGrid * kGrid);
    }
    split_dataset(ds, 0.8, 0.1, seed ^ 0x5eedu);
    return ds;
}

void split_dataset(Dataset& ds, double train_frac, double val_frac, uint64_t seed) {
    const int n = ds.count();
    if (train_frac <= 0.0 || val_frac < 0.0 || train_frac + val_frac > 1.0) {
        throw input_error("split_dataset: invalid fractions");
    }
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    for (int i = n - 1; i > 0; --i) std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.uniform_int(0, i))]);

    const int n_train = static_cast<int>(train_frac * n);
    const int n_val = static_cast<int>(val_frac * n);
    ds.train_idx.assign(order.begin(), order.begin() + n_train);
    ds.val_idx.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    ds.test_idx.assign(order.begin() + n_train + n_val, order.end());
}

namespace {

uint32_t read_be32(std::ifstream& in, const std::string& path, size_t offset) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw format_error(path + ": truncated at byte " + std::to_string(offset));
    return (static_cast<uint32_t>(buf[0]) << 24) | (static_cast<uint32_t>(buf[1]) << 16) |
           (static_cast<uint32_t>(buf[2]) << 8) | static_cast<uint32_t>(buf[3]);
}

void write_be32(std::ofstream& out, uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

constexpr uint32_t kImageMagic = 0x00000803;
constexpr uint32_t kLabelMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw format_error(images_path + ": cannot open");
    if (const uint32_t magic = read_be32(img, images_path, 0); magic != kImageMagic) {
        char msg[64];
        std::snprintf(msg, sizeof(msg), ": bad image magic 0x%08x at byte 0", magic);
        throw format_error(images_path + msg);
    }
    const int n = static_cast<int>(read_be32(img, images_path, 4));
    const int rows = static_cast<int>(read_be32(img, images_path, 8));
    const int cols = static_cast<int>(read_be32(img, images_path, 12));
    if (n <= 0 || rows <= 0 || cols <= 0) throw format_error(images_path + ": non-positive dimensions in header");

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw format_error(labels_path + ": cannot open");
    if (const uint32_t magic = read_be32(lab, labels_path, 0); magic != kLabelMagic) {
        char msg[64];
        std::snprintf(msg, sizeof(msg), ": bad label magic 0x%08x at byte 0", magic);
        throw format_error(labels_path + msg);
    }
    const int n_labels = static_cast<int>(read_be32(lab, labels_path, 4));
    if (n_labels != n) {
        throw format_error(labels_path + ": label count " + std::to_string(n_labels) + " != image count " +
                           std::to_string(n));
    }

    const size_t pixel_count = static_cast<size_t>(n) * rows * cols;
    std::vector<unsigned char> pixels(pixel_count);
    img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixel_count));
    if (static_cast<size_t>(img.gcount()) != pixel_count) {
        throw format_error(images_path + ": truncated at byte " + std::to_string(16 + img.gcount()));
    }
    std::vector<unsigned char> raw_labels(static_cast<size_t>(n));
    lab.read(reinterpret_cast<char*>(raw_labels.data()), n);
    if (static_cast<size_t>(lab.gcount()) != static_cast<size_t>(n)) {
        throw format_error(labels_path + ": truncated at byte " + std::to_string(8 + lab.gcount()));
    }

    Dataset ds;
    ds.features = make_tensor({n, 1, rows, cols});
    for (size_t i = 0; i < pixel_count; ++i) ds.features->data[i] = static_cast<float>(pixels[i]) / 255.0f;
    ds.labels.resize(static_cast<size_t>(n));
    int max_label = 0;
    for (int i = 0; i < n; ++i) {
        ds.labels[static_cast<size_t>(i)] = raw_labels[static_cast<size_t>(i)];
        max_label = std::max(max_label, static_cast<int>(raw_labels[static_cast<size_t>(i)]));
    }
    ds.classes = max_label + 1;
    split_dataset(ds, 0.8, 0.1, 0);
    return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path, int count, int rows, int cols,
               const std::vector<uint8_t>& pixels, const std::vector<uint8_t>& labels) {
    if (pixels.size() != static_cast<size_t>(count) * rows * cols) {
        throw input_error("write_idx: pixel buffer does not match count*rows*cols");
    }
    if (labels.size() != static_cast<size_t>(count)) throw input_error("write_idx: label buffer does not match count");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw format_error(images_path + ": cannot open for writing");
    write_be32(img, kImageMagic);
    write_be32(img, static_cast<uint32_t>(count));
    write_be32(img, static_cast<uint32_t>(rows));
    write_be32(img, static_cast<uint32_t>(cols));
    img.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw format_error(labels_path + ": cannot open for writing");
    write_be32(lab, kLabelMagic);
    write_be32(lab, static_cast<uint32_t>(count));
    lab.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

TensorPtr gather_features(const Dataset& ds, const std::vector<int>& idx) {
    const auto s = ds.sample_shape();
    const size_t per = static_cast<size_t>(shape_size(s));
    auto batch = make_tensor({static_cast<int>(idx.size()), s[0], s[1], s[2]});
    for (size_t i = 0; i < idx.size(); ++i) {
        const float* src = ds.features->data.data() + static_cast<size_t>(idx[i]) * per;
        std::copy(src, src + per, batch->data.data() + i * per);
    }
    return batch;
}

std::vector<int> gather_labels(const Dataset& ds, const std::vector<int>& idx) {
    std::vector<int> out(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) out[i] = ds.labels[static_cast<size_t>(idx[i])];
    return out;
}

}  // namespace hq
