#pragma once
// On-disk case layout: <root>/<case_id>/{image.f32, label.u8, prior.u8?, meta.json}.
// image.f32 is row-major little-endian float32; meta.json carries the shape,
// spacing, split, and class count. Loads are validated against the meta.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spgcde/common.hpp"
#include "spgcde/serialize.hpp"

namespace spgcde {

struct ImageCase {
    std::string case_id;
    int h = 0, w = 0;
    std::vector<float> image;       // intensities in [0,1]
    std::vector<uint8_t> label;     // 0 = background
    double spacing_y = 1.0, spacing_x = 1.0;
    std::string split = "train";
    int num_classes = 2;
    std::optional<std::vector<uint8_t>> prior;

    bool operator==(const ImageCase& o) const {
        return case_id == o.case_id && h == o.h && w == o.w && image == o.image &&
               label == o.label && spacing_y == o.spacing_y && spacing_x == o.spacing_x &&
               split == o.split && num_classes == o.num_classes && prior == o.prior;
    }
};

inline void store_case(const std::filesystem::path& root, const ImageCase& c) {
    const auto dir = root / c.case_id;
    std::filesystem::create_directories(dir);
    write_file_bytes(dir / "image.f32", c.image.data(), c.image.size() * sizeof(float));
    write_file_bytes(dir / "label.u8", c.label.data(), c.label.size());
    if (c.prior) write_file_bytes(dir / "prior.u8", c.prior->data(), c.prior->size());
    nlohmann::ordered_json meta;
    meta["height"] = c.h;
    meta["width"] = c.w;
    meta["spacing"] = {c.spacing_y, c.spacing_x};
    meta["split"] = c.split;
    meta["num_classes"] = c.num_classes;
    const std::string text = meta.dump(2) + "\n";
    write_file_bytes(dir / "meta.json", text.data(), text.size());
}

// Loads and validates one case; out-of-range intensities are clamped and
// counted rather than rejected.
inline ImageCase load_case(const std::filesystem::path& root, const std::string& case_id,
                           int64_t* clamp_warnings = nullptr) {
    const auto dir = root / case_id;
    if (!std::filesystem::exists(dir / "meta.json"))
        throw CorruptCase("case " + case_id + " has no meta.json");
    ImageCase c;
    c.case_id = case_id;
    try {
        const auto meta = nlohmann::json::parse(read_file_text(dir / "meta.json"));
        c.h = meta.at("height").get<int>();
        c.w = meta.at("width").get<int>();
        c.spacing_y = meta.at("spacing").at(0).get<double>();
        c.spacing_x = meta.at("spacing").at(1).get<double>();
        c.split = meta.at("split").get<std::string>();
        c.num_classes = meta.at("num_classes").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCase("case " + case_id + " meta.json unreadable: " + e.what());
    }
    if (c.h <= 0 || c.w <= 0) throw CorruptCase("case " + case_id + " has non-positive extents");
    if (c.spacing_y <= 0.0 || c.spacing_x <= 0.0)
        throw CorruptCase("case " + case_id + " has non-positive spacing");
    if (c.num_classes < 1) throw CorruptCase("case " + case_id + " has no classes");
    const size_t pixels = static_cast<size_t>(c.h) * static_cast<size_t>(c.w);

    const auto img_bytes = read_file_bytes(dir / "image.f32");
    if (img_bytes.size() != pixels * sizeof(float))
        throw CorruptCase("case " + case_id + " image.f32 holds " +
                          std::to_string(img_bytes.size() / sizeof(float)) + " pixels, meta says " +
                          std::to_string(pixels));
    c.image.resize(pixels);
    std::memcpy(c.image.data(), img_bytes.data(), img_bytes.size());
    int64_t clamped = 0;
    for (auto& v : c.image) {
        if (v < 0.0f || v > 1.0f || !std::isfinite(v)) {
            v = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
            ++clamped;
        }
    }
    if (clamp_warnings) *clamp_warnings += clamped;

    const auto lab_bytes = read_file_bytes(dir / "label.u8");
    if (lab_bytes.size() != pixels)
        throw CorruptCase("case " + case_id + " label.u8 holds " +
                          std::to_string(lab_bytes.size()) + " pixels, meta says " +
                          std::to_string(pixels));
    c.label.assign(lab_bytes.begin(), lab_bytes.end());
    for (uint8_t v : c.label)
        if (v >= c.num_classes)
            throw BadLabels("case " + case_id + " label value " + std::to_string(int(v)) +
                            " >= num_classes " + std::to_string(c.num_classes));

    if (std::filesystem::exists(dir / "prior.u8")) {
        const auto pb = read_file_bytes(dir / "prior.u8");
        if (pb.size() != pixels)
            throw CorruptCase("case " + case_id + " prior.u8 holds " + std::to_string(pb.size()) +
                              " pixels, meta says " + std::to_string(pixels));
        c.prior = std::vector<uint8_t>(pb.begin(), pb.end());
    }
    return c;
}

inline std::vector<std::string> list_cases(const std::filesystem::path& root) {
    if (!std::filesystem::exists(root)) throw DataError("dataset root not found: " + root.string());
    std::vector<std::string> ids;
    for (const auto& e : std::filesystem::directory_iterator(root)) {
        if (e.is_directory() && std::filesystem::exists(e.path() / "meta.json"))
            ids.push_back(e.path().filename().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

}  // namespace spgcde
