#pragma once
// Deterministic low-contrast multi-organ phantom generator: one ellipse per
// foreground class, non-overlapping, exact rasterized labels, optional stored
// coarse prior built by dilating the label.

#include <cstdint>
#include <string>
#include <vector>

#include "spgcde/common.hpp"
#include "spgcde/data/case_store.hpp"
#include "spgcde/rng.hpp"

namespace spgcde {

struct SynthSpec {
    int num_cases = 8;
    int h = 64, w = 64;
    int num_classes = 4;        // background + 3 organs
    double contrast_gap = 0.15;  // organ intensity offset from background mean
    uint64_t seed = 0;
    std::string split_cycle = "train,train,train,val,test";
    bool with_priors = true;
    int prior_dilate = 2;       // rounds of 4-neighbor label dilation
    double noise_sigma = 0.05;

    void validate() const {
        if (num_cases < 1) throw BadSpec("num_cases must be positive");
        if (h % 32 != 0 || w % 32 != 0)
            throw BadSpec("case size must be divisible by 32, got " + std::to_string(h) + "x" +
                          std::to_string(w));
        if (num_classes < 2) throw BadSpec("need at least one foreground class");
        if (contrast_gap <= 0.0 || contrast_gap > 0.2)
            throw BadSpec("contrast_gap must lie in (0, 0.2]");
        if (split_cycle.empty()) throw BadSpec("split_cycle must not be empty");
        if (prior_dilate < 0) throw BadSpec("prior_dilate must be non-negative");
    }
};

namespace detail {

struct Ellipse {
    double cy, cx, ry, rx;
    bool contains(int y, int x) const {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        return dy * dy + dx * dx <= 1.0;
    }
};

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline std::vector<uint8_t> dilate_label(const std::vector<uint8_t>& label, int h, int w,
                                         int rounds) {
    std::vector<uint8_t> cur = label;
    std::vector<uint8_t> next(cur.size());
    for (int r = 0; r < rounds; ++r) {
        next = cur;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const size_t i = static_cast<size_t>(y) * w + x;
                if (cur[i]) continue;
                uint8_t v = 0;
                if (y > 0 && cur[i - static_cast<size_t>(w)]) v = cur[i - static_cast<size_t>(w)];
                else if (y + 1 < h && cur[i + static_cast<size_t>(w)]) v = cur[i + static_cast<size_t>(w)];
                else if (x > 0 && cur[i - 1]) v = cur[i - 1];
                else if (x + 1 < w && cur[i + 1]) v = cur[i + 1];
                next[i] = v;
            }
        }
        cur.swap(next);
    }
    return cur;
}

}  // namespace detail

inline std::vector<ImageCase> generate_synthetic(const SynthSpec& spec) {
    spec.validate();
    const auto splits = detail::split_list(spec.split_cycle);
    for (const auto& s : splits)
        if (s != "train" && s != "val" && s != "test")
            throw BadSpec("split_cycle entry must be train|val|test, got '" + s + "'");

    std::vector<ImageCase> cases;
    cases.reserve(static_cast<size_t>(spec.num_cases));
    const size_t pixels = static_cast<size_t>(spec.h) * static_cast<size_t>(spec.w);

    for (int ci = 0; ci < spec.num_cases; ++ci) {
        Rng rng(hash_seed(spec.seed, 0xe11a9u, static_cast<uint64_t>(ci)));
        ImageCase c;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "case_%04d", ci);
        c.case_id = idbuf;
        c.h = spec.h;
        c.w = spec.w;
        c.num_classes = spec.num_classes;
        c.split = splits[static_cast<size_t>(ci) % splits.size()];
        c.label.assign(pixels, 0);

        const double r_lo = spec.h / 16.0, r_hi = spec.h / 6.0;
        std::vector<detail::Ellipse> placed;
        for (int cls = 1; cls < spec.num_classes; ++cls) {
            bool ok = false;
            for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
                detail::Ellipse e;
                e.ry = rng.uniform(r_lo, r_hi);
                e.rx = rng.uniform(r_lo, r_hi);
                e.cy = rng.uniform(e.ry + 1.0, spec.h - 1.0 - e.ry);
                e.cx = rng.uniform(e.rx + 1.0, spec.w - 1.0 - e.rx);
                bool overlap = false;
                for (const auto& p : placed) {
                    // generous separation test on padded bounding circles
                    const double dy = e.cy - p.cy, dx = e.cx - p.cx;
                    const double min_gap = std::max(e.ry, e.rx) + std::max(p.ry, p.rx) + 2.0;
                    if (dy * dy + dx * dx < min_gap * min_gap) overlap = true;
                }
                if (overlap) continue;
                placed.push_back(e);
                for (int y = 0; y < spec.h; ++y)
                    for (int x = 0; x < spec.w; ++x)
                        if (e.contains(y, x))
                            c.label[static_cast<size_t>(y) * spec.w + x] =
                                static_cast<uint8_t>(cls);
                ok = true;
            }
            if (!ok)
                throw BadSpec("could not place " + std::to_string(spec.num_classes - 1) +
                              " non-overlapping organs at " + std::to_string(spec.h) + "x" +
                              std::to_string(spec.w));
        }

        // Post-check: every class must rasterize to at least one pixel.
        std::vector<int64_t> counts(static_cast<size_t>(spec.num_classes), 0);
        for (uint8_t v : c.label) ++counts[v];
        for (int cls = 1; cls < spec.num_classes; ++cls)
            if (counts[static_cast<size_t>(cls)] == 0)
                throw BadSpec("organ " + std::to_string(cls) + " rasterized to zero pixels");

        c.image.resize(pixels);
        for (size_t p = 0; p < pixels; ++p) {
            const uint8_t cls = c.label[p];
            double v = 0.5;
            if (cls > 0) v += (cls % 2 == 1 ? spec.contrast_gap : -spec.contrast_gap);
            v += rng.normal(0.0, spec.noise_sigma);
            c.image[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }

        if (spec.with_priors)
            c.prior = detail::dilate_label(c.label, spec.h, spec.w, spec.prior_dilate);
        cases.push_back(std::move(c));
    }
    return cases;
}

}  // namespace spgcde
