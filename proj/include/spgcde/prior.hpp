#pragma once
// Stage-1 gating: run a coarse segmenter (or load its stored output),
// binarize at the threshold, and zero the image outside the region of
// interest to form the local image.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "spgcde/common.hpp"
#include "spgcde/model/prior_unet.hpp"
#include "spgcde/serialize.hpp"

namespace spgcde {

struct ClassMap {
    int h = 0, w = 0;
    std::vector<uint8_t> values;  // row-major, 0 = background
};

inline std::vector<uint8_t> binarize_prior(const ClassMap& coarse, int tau) {
    std::vector<uint8_t> mask(coarse.values.size());
    for (size_t i = 0; i < mask.size(); ++i)
        mask[i] = coarse.values[i] > tau ? uint8_t(1) : uint8_t(0);
    return mask;
}

struct LocalImage {
    std::vector<float> pixels;
    int h = 0, w = 0;
    double support_fraction = 0.0;
};

inline LocalImage apply_prior_map(const std::vector<float>& x, int h, int w,
                                  const ClassMap& coarse, int tau = 0) {
    if (coarse.h != h || coarse.w != w ||
        coarse.values.size() != static_cast<size_t>(h) * static_cast<size_t>(w))
        throw ShapeMismatch("prior map " + std::to_string(coarse.h) + "x" +
                            std::to_string(coarse.w) + " for image " + std::to_string(h) + "x" +
                            std::to_string(w));
    LocalImage out;
    out.h = h;
    out.w = w;
    out.pixels.resize(x.size());
    size_t positives = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        const bool keep = coarse.values[i] > tau;
        out.pixels[i] = keep ? x[i] : 0.0f;
        positives += keep ? 1 : 0;
    }
    out.support_fraction =
        static_cast<double>(positives) / (static_cast<double>(h) * static_cast<double>(w));
    return out;
}

class PriorSegmenter {
  public:
    virtual ~PriorSegmenter() = default;
    virtual std::string identity() const = 0;
    virtual ClassMap predict(const std::vector<float>& image, int h, int w) = 0;
};

inline LocalImage apply_prior_mask(const std::vector<float>& x, int h, int w,
                                   PriorSegmenter& segmenter, int tau = 0) {
    return apply_prior_map(x, h, w, segmenter.predict(x, h, w), tau);
}

class LambdaSegmenter : public PriorSegmenter {
  public:
    using Fn = std::function<ClassMap(const std::vector<float>&, int, int)>;
    LambdaSegmenter(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}
    std::string identity() const override { return name_; }
    ClassMap predict(const std::vector<float>& image, int h, int w) override {
        return fn_(image, h, w);
    }

  private:
    std::string name_;
    Fn fn_;
};

// Wraps the trainable built-in coarse model; prediction is channel argmax.
class UnetPriorSegmenter : public PriorSegmenter {
  public:
    explicit UnetPriorSegmenter(PriorUnet<float>& net) : net_(&net) {}
    std::string identity() const override { return "builtin-unet-like"; }
    ClassMap predict(const std::vector<float>& image, int h, int w) override {
        Tensor<float> x({1, 1, h, w});
        std::copy(image.begin(), image.end(), x.data());
        Tensor<float> logits = net_->forward(x, false, false);
        ClassMap out;
        out.h = h;
        out.w = w;
        out.values.resize(static_cast<size_t>(h) * w);
        const int c = logits.dim(1);
        const int64_t plane = static_cast<int64_t>(h) * w;
        for (int64_t p = 0; p < plane; ++p) {
            int best = 0;
            float best_v = logits[p];
            for (int ci = 1; ci < c; ++ci) {
                const float v = logits[ci * plane + p];
                if (v > best_v) {
                    best_v = v;
                    best = ci;
                }
            }
            out.values[static_cast<size_t>(p)] = static_cast<uint8_t>(best);
        }
        return out;
    }

  private:
    PriorUnet<float>* net_;
};

inline ClassMap load_precomputed_prior(const std::filesystem::path& root,
                                       const std::string& case_id, int h, int w) {
    const auto path = root / case_id / "prior.u8";
    if (!std::filesystem::exists(path))
        throw MissingPrior("no stored prior for case " + case_id);
    const auto bytes = read_file_bytes(path);
    if (bytes.size() != static_cast<size_t>(h) * static_cast<size_t>(w))
        throw ShapeMismatch("stored prior for case " + case_id + " has " +
                            std::to_string(bytes.size()) + " pixels, case image has " +
                            std::to_string(static_cast<size_t>(h) * w));
    ClassMap m;
    m.h = h;
    m.w = w;
    m.values.assign(bytes.begin(), bytes.end());
    return m;
}

}  // namespace spgcde
