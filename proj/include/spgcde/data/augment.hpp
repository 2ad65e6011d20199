#pragma once
// Paired augmentation: one seeded draw of rotation/flip parameters applied
// identically to the global image, the masked local image, and the label.
// Labels always resample nearest-neighbor.

#include <cmath>
#include <cstdint>
#include <vector>

#include "spgcde/rng.hpp"

namespace spgcde {

struct AugmentDraw {
    int rot90 = 0;          // quarter turns, 0..3
    bool flip_h = false;    // mirror along x
    bool flip_v = false;    // mirror along y
    double angle_deg = 0.0; // extra small-angle rotation, 0 when disabled

    bool identity() const { return rot90 == 0 && !flip_h && !flip_v && angle_deg == 0.0; }
};

inline AugmentDraw draw_augment(uint64_t seed, bool small_angle = false) {
    Rng rng(seed);
    AugmentDraw d;
    d.rot90 = static_cast<int>(rng.below(4));
    d.flip_h = rng.coin();
    d.flip_v = rng.coin();
    if (small_angle) d.angle_deg = rng.uniform(-20.0, 20.0);
    return d;
}

namespace detail {

// Quarter turn: out[x, H-1-y] = in[y, x]; output extents are (w, h).
template <typename T>
inline std::vector<T> rot90_once(const std::vector<T>& in, int h, int w) {
    std::vector<T> out(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<size_t>(x) * h + (h - 1 - y)] = in[static_cast<size_t>(y) * w + x];
    return out;
}

template <typename T>
inline std::vector<T> flip_h(const std::vector<T>& in, int h, int w) {
    std::vector<T> out(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<size_t>(y) * w + (w - 1 - x)] = in[static_cast<size_t>(y) * w + x];
    return out;
}

template <typename T>
inline std::vector<T> flip_v(const std::vector<T>& in, int h, int w) {
    std::vector<T> out(in.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<size_t>(h - 1 - y) * w + x] = in[static_cast<size_t>(y) * w + x];
    return out;
}

// Rotation about the image center; bilinear taps, zero outside.
inline std::vector<float> rotate_bilinear(const std::vector<float>& in, int h, int w,
                                          double deg) {
    const double rad = deg * M_PI / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    std::vector<float> out(in.size(), 0.0f);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double sy = cs * (y - cy) + sn * (x - cx) + cy;
            const double sx = -sn * (y - cy) + cs * (x - cx) + cx;
            const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
            const double fy = sy - y0, fx = sx - x0;
            double acc = 0.0;
            for (int dy = 0; dy <= 1; ++dy) {
                for (int dx = 0; dx <= 1; ++dx) {
                    const int yy = y0 + dy, xx = x0 + dx;
                    if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                    const double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
                    acc += wgt * in[static_cast<size_t>(yy) * w + xx];
                }
            }
            out[static_cast<size_t>(y) * w + x] = static_cast<float>(acc);
        }
    }
    return out;
}

inline std::vector<uint8_t> rotate_nearest(const std::vector<uint8_t>& in, int h, int w,
                                           double deg) {
    const double rad = deg * M_PI / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
    std::vector<uint8_t> out(in.size(), 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double sy = cs * (y - cy) + sn * (x - cx) + cy;
            const double sx = -sn * (y - cy) + cs * (x - cx) + cx;
            const int yy = static_cast<int>(std::lround(sy)), xx = static_cast<int>(std::lround(sx));
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            out[static_cast<size_t>(y) * w + x] = in[static_cast<size_t>(yy) * w + xx];
        }
    }
    return out;
}

}  // namespace detail

struct AugmentedPair {
    std::vector<float> global_img;
    std::vector<float> local_img;
    std::vector<uint8_t> label;
    int h = 0, w = 0;  // quarter turns can swap extents
};

// An empty local image passes through untouched (single-stream callers).
inline AugmentedPair apply_augment(const AugmentDraw& d, std::vector<float> g,
                                   std::vector<float> l, std::vector<uint8_t> lab, int h,
                                   int w) {
    const bool dual = !l.empty();
    for (int k = 0; k < d.rot90 % 4; ++k) {
        g = detail::rot90_once(g, h, w);
        if (dual) l = detail::rot90_once(l, h, w);
        lab = detail::rot90_once(lab, h, w);
        std::swap(h, w);
    }
    if (d.flip_h) {
        g = detail::flip_h(g, h, w);
        if (dual) l = detail::flip_h(l, h, w);
        lab = detail::flip_h(lab, h, w);
    }
    if (d.flip_v) {
        g = detail::flip_v(g, h, w);
        if (dual) l = detail::flip_v(l, h, w);
        lab = detail::flip_v(lab, h, w);
    }
    if (d.angle_deg != 0.0) {
        g = detail::rotate_bilinear(g, h, w, d.angle_deg);
        if (dual) l = detail::rotate_bilinear(l, h, w, d.angle_deg);
        lab = detail::rotate_nearest(lab, h, w, d.angle_deg);
    }
    return {std::move(g), std::move(l), std::move(lab), h, w};
}

inline AugmentedPair augment_pair(const std::vector<float>& global_img,
                                  const std::vector<float>& local_img,
                                  const std::vector<uint8_t>& label, int h, int w, uint64_t seed,
                                  bool small_angle = false) {
    return apply_augment(draw_augment(seed, small_angle), global_img, local_img, label, h, w);
}

}  // namespace spgcde
