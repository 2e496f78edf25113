#include "hyperquant/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "hyperquant/errors.hpp"

namespace hq {

namespace {

constexpr char kMagic[8] = {'H', 'Q', 'C', 'K', 'P', 'T', '0', '\n'};
constexpr int kFormatVersion = 1;

void write_u32_le(std::ofstream& out, uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

uint32_t read_u32_le(std::ifstream& in, const std::string& path) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw format_error(path + ": truncated header");
    return static_cast<uint32_t>(buf[0]) | (static_cast<uint32_t>(buf[1]) << 8) |
           (static_cast<uint32_t>(buf[2]) << 16) | (static_cast<uint32_t>(buf[3]) << 24);
}

void write_f32_le(std::ofstream& out, const std::vector<float>& values) {
    for (float f : values) {
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        const unsigned char buf[4] = {static_cast<unsigned char>(bits), static_cast<unsigned char>(bits >> 8),
                                      static_cast<unsigned char>(bits >> 16), static_cast<unsigned char>(bits >> 24)};
        out.write(reinterpret_cast<const char*>(buf), 4);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const HyperNet& net, const TargetNetSpec& spec, double final_loss) {
    const auto params = net.parameters();
    const auto names = net.parameter_names();

    nlohmann::json manifest;
    manifest["version"] = kFormatVersion;
    manifest["target"] = spec.name;
    manifest["class_count"] = spec.class_count;
    manifest["bit_min"] = net.bit_min;
    manifest["bit_max"] = net.bit_max;
    manifest["hidden"] = net.hidden;
    manifest["delta"] = net.delta;
    manifest["final_loss"] = final_loss;
    manifest["tensors"] = nlohmann::json::array();
    uint64_t offset = 0;
    for (size_t i = 0; i < params.size(); ++i) {
        const uint64_t byte_len = params[i]->data.size() * 4;
        manifest["tensors"].push_back(
            {{"name", names[i]}, {"shape", params[i]->shape}, {"offset", offset}, {"byte_len", byte_len}});
        offset += byte_len;
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw format_error(path + ": cannot open for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::string body = manifest.dump();
    write_u32_le(out, static_cast<uint32_t>(body.size()));
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    for (const auto& p : params) write_f32_le(out, p->data);
    if (!out) throw format_error(path + ": write failed");
}

nlohmann::json read_checkpoint_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw format_error(path + ": cannot open");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw format_error(path + ": bad checkpoint magic");
    const uint32_t len = read_u32_le(in, path);
    std::string body(len, '\0');
    in.read(body.data(), len);
    if (!in) throw format_error(path + ": truncated manifest");
    try {
        return nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path + ": manifest parse error: " + e.what());
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    const nlohmann::json manifest = read_checkpoint_manifest(path);
    LoadedCheckpoint result;
    int bit_min, bit_max, hidden;
    float delta;
    try {
        if (manifest.at("version").get<int>() != kFormatVersion) {
            throw format_error(path + ": unsupported checkpoint version");
        }
        result.target_name = manifest.at("target").get<std::string>();
        result.class_count = manifest.at("class_count").get<int>();
        result.final_loss = manifest.at("final_loss").get<double>();
        bit_min = manifest.at("bit_min").get<int>();
        bit_max = manifest.at("bit_max").get<int>();
        hidden = manifest.at("hidden").get<int>();
        delta = manifest.at("delta").get<float>();
    } catch (const nlohmann::json::exception& e) {
        throw format_error(path + ": manifest field error: " + e.what());
    }

    const TargetNetSpec spec = builtin_spec(result.target_name, result.class_count);
    result.net = make_hypernet(spec, hidden, delta, bit_min, bit_max, /*seed=*/0);

    const auto params = result.net.parameters();
    const auto names = result.net.parameter_names();
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != params.size()) {
        throw format_error(path + ": manifest lists " + std::to_string(tensors.size()) + " tensors, expected " +
                           std::to_string(params.size()));
    }

    std::ifstream in(path, std::ios::binary);
    in.seekg(static_cast<std::streamoff>(sizeof(kMagic)));
    const uint32_t len = read_u32_le(in, path);
    in.seekg(static_cast<std::streamoff>(sizeof(kMagic) + 4 + len));

    uint64_t expected_offset = 0;
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& desc = tensors.at(i);
        const std::string name = desc.at("name").get<std::string>();
        const auto shape = desc.at("shape").get<std::vector<int>>();
        const uint64_t offset = desc.at("offset").get<uint64_t>();
        const uint64_t byte_len = desc.at("byte_len").get<uint64_t>();
        if (name != names[i]) throw format_error(path + ": tensor " + std::to_string(i) + " named '" + name +
                                                 "', expected '" + names[i] + "'");
        if (shape != params[i]->shape) throw format_error(path + ": tensor '" + name + "' has wrong shape");
        if (offset != expected_offset || byte_len != params[i]->data.size() * 4) {
            throw format_error(path + ": tensor '" + name + "' does not tile the payload (offset " +
                               std::to_string(offset) + ", expected " + std::to_string(expected_offset) + ")");
        }
        expected_offset += byte_len;

        std::vector<unsigned char> raw(byte_len);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(byte_len));
        if (static_cast<uint64_t>(in.gcount()) != byte_len) throw format_error(path + ": truncated payload");
        for (size_t j = 0; j < params[i]->data.size(); ++j) {
            const uint32_t bits = static_cast<uint32_t>(raw[j * 4]) | (static_cast<uint32_t>(raw[j * 4 + 1]) << 8) |
                                  (static_cast<uint32_t>(raw[j * 4 + 2]) << 16) |
                                  (static_cast<uint32_t>(raw[j * 4 + 3]) << 24);
            std::memcpy(&params[i]->data[j], &bits, 4);
        }
    }
    in.peek();
    if (!in.eof()) throw format_error(path + ": trailing bytes after payload");
    return result;
}

}  // namespace hq
