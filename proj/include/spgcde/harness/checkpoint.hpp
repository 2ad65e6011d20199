#pragma once
// Checkpoint layout: <dir>/params.bin (+ prior.bin) and <dir>/manifest.json.
// The archive stores named tensors in registry order; loading verifies the
// architecture fingerprint and every tensor's name and shape.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "spgcde/harness/config.hpp"
#include "spgcde/nn/module.hpp"
#include "spgcde/serialize.hpp"

namespace spgcde {

inline constexpr uint64_t kParamsMagic = 0x53504743444B5031ULL;  // "SPGCDKP1"

template <typename T>
inline std::vector<uint8_t> pack_registry(nn::Registry<T>& reg) {
    ByteWriter w;
    w.u64(kParamsMagic);
    w.u64(static_cast<uint64_t>(reg.params.size() + reg.buffers.size()));
    auto put = [&w](const std::string& name, const Tensor<T>& t) {
        w.str(name);
        w.u32(static_cast<uint32_t>(t.ndim()));
        for (int i = 0; i < t.ndim(); ++i) w.u32(static_cast<uint32_t>(t.dim(i)));
        for (int64_t i = 0; i < t.numel(); ++i) w.f64(static_cast<double>(t[i]));
    };
    for (const auto& p : reg.params) put(p.name, *p.value);
    for (const auto& b : reg.buffers) put(b.name, *b.value);
    return w.bytes();
}

template <typename T>
inline void unpack_registry(const std::vector<uint8_t>& bytes, nn::Registry<T>& reg) {
    ByteReader r(bytes);
    if (r.u64() != kParamsMagic) throw CheckpointMismatch("parameter archive has wrong magic");
    const uint64_t count = r.u64();
    if (count != reg.params.size() + reg.buffers.size())
        throw CheckpointMismatch("parameter archive holds " + std::to_string(count) +
                                 " tensors, model expects " +
                                 std::to_string(reg.params.size() + reg.buffers.size()));
    auto get = [&r](const std::string& name, Tensor<T>& t) {
        const std::string stored = r.str();
        if (stored != name)
            throw CheckpointMismatch("tensor order mismatch: archive has '" + stored +
                                     "', model expects '" + name + "'");
        const uint32_t nd = r.u32();
        if (nd != static_cast<uint32_t>(t.ndim()))
            throw CheckpointMismatch("tensor '" + name + "' rank mismatch");
        for (int i = 0; i < t.ndim(); ++i)
            if (r.u32() != static_cast<uint32_t>(t.dim(i)))
                throw CheckpointMismatch("tensor '" + name + "' shape mismatch");
        for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(r.f64());
    };
    for (auto& p : reg.params) get(p.name, *p.value);
    for (auto& b : reg.buffers) get(b.name, *b.value);
}

struct CheckpointInfo {
    std::string config_hash;
    int epoch = 0;
    double val_dsc = -1.0;
    bool has_prior_net = false;
    std::string params_fnv;
};

inline void write_checkpoint(const std::filesystem::path& dir,
                             const std::vector<uint8_t>& bytes, const CheckpointInfo& info,
                             const std::vector<uint8_t>* prior_bytes = nullptr) {
    std::filesystem::create_directories(dir);
    write_file_bytes(dir / "params.bin", bytes.data(), bytes.size());
    if (prior_bytes) write_file_bytes(dir / "prior.bin", prior_bytes->data(), prior_bytes->size());
    nlohmann::ordered_json m;
    m["format"] = 1;
    m["config_hash"] = info.config_hash;
    m["epoch"] = info.epoch;
    m["val_dsc"] = info.val_dsc < 0.0 ? nlohmann::ordered_json(nullptr)
                                      : nlohmann::ordered_json(fmt_fixed(info.val_dsc, 6));
    m["params_fnv"] = hex64(fnv1a64(bytes.data(), bytes.size()));
    m["has_prior_net"] = prior_bytes != nullptr;
    const std::string text = m.dump(2) + "\n";
    write_file_bytes(dir / "manifest.json", text.data(), text.size());
}

template <typename T>
inline void save_checkpoint(const std::filesystem::path& dir, nn::Registry<T>& reg,
                            const CheckpointInfo& info,
                            const std::vector<uint8_t>* prior_bytes = nullptr) {
    write_checkpoint(dir, pack_registry(reg), info, prior_bytes);
}

inline CheckpointInfo read_manifest(const std::filesystem::path& dir) {
    const auto path = dir / "manifest.json";
    if (!std::filesystem::exists(path))
        throw CheckpointMismatch("no manifest.json in " + dir.string());
    CheckpointInfo info;
    try {
        const auto m = nlohmann::json::parse(read_file_text(path));
        info.config_hash = m.at("config_hash").get<std::string>();
        info.epoch = m.at("epoch").get<int>();
        info.has_prior_net = m.value("has_prior_net", false);
        info.params_fnv = m.value("params_fnv", std::string());
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointMismatch(std::string("manifest unreadable: ") + e.what());
    }
    return info;
}

template <typename T>
inline CheckpointInfo load_checkpoint(const std::filesystem::path& dir, nn::Registry<T>& reg,
                                      const std::string& expected_hash) {
    const CheckpointInfo info = read_manifest(dir);
    if (info.config_hash != expected_hash)
        throw CheckpointMismatch("checkpoint was built for architecture " + info.config_hash +
                                 ", requested " + expected_hash);
    unpack_registry(read_file_bytes(dir / "params.bin"), reg);
    return info;
}

}  // namespace spgcde
