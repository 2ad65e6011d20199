#pragma once
// Evaluation metrics: Dice overlap and the 95th-percentile symmetric boundary
// distance in physical units. Boundary pixels are foreground pixels whose
// 4-neighborhood touches background or the image edge. Distances use an exact
// Euclidean distance transform with anisotropic spacing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "spgcde/common.hpp"

namespace spgcde {

inline double dsc(const std::vector<uint8_t>& pred, const std::vector<uint8_t>& gt) {
    if (pred.size() != gt.size())
        throw ShapeMismatch("dsc mask sizes " + std::to_string(pred.size()) + " vs " +
                            std::to_string(gt.size()));
    int64_t inter = 0, p = 0, g = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred[i] != 0, b = gt[i] != 0;
        p += a;
        g += b;
        inter += a && b;
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

inline std::vector<std::pair<int, int>> boundary_pixels(const std::vector<uint8_t>& mask, int h,
                                                        int w) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask[static_cast<size_t>(y) * w + x]) continue;
            const bool edge = y == 0 || y == h - 1 || x == 0 || x == w - 1;
            const bool open =
                edge || !mask[static_cast<size_t>(y - 1) * w + x] ||
                !mask[static_cast<size_t>(y + 1) * w + x] ||
                !mask[static_cast<size_t>(y) * w + x - 1] || !mask[static_cast<size_t>(y) * w + x + 1];
            if (open) out.emplace_back(y, x);
        }
    }
    return out;
}

namespace detail {

inline constexpr double kFarSq = 1e20;

// 1-D squared-distance transform along physical coordinate p*s.
inline void edt_1d(const double* f, double* d, int n, double s) {
    std::vector<int> v(static_cast<size_t>(n));
    std::vector<double> z(static_cast<size_t>(n) + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -kFarSq;
    z[1] = kFarSq;
    for (int q = 1; q < n; ++q) {
        const double xq = q * s;
        double inter;
        while (true) {
            const double xv = v[static_cast<size_t>(k)] * s;
            inter = ((f[q] + xq * xq) - (f[v[static_cast<size_t>(k)]] + xv * xv)) /
                    (2.0 * (xq - xv));
            if (inter <= z[static_cast<size_t>(k)] && k > 0)
                --k;
            else
                break;
        }
        ++k;
        v[static_cast<size_t>(k)] = q;
        z[static_cast<size_t>(k)] = inter;
        z[static_cast<size_t>(k) + 1] = kFarSq;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        const double xq = q * s;
        while (z[static_cast<size_t>(k) + 1] < xq) ++k;
        const double diff = xq - v[static_cast<size_t>(k)] * s;
        d[q] = diff * diff + f[v[static_cast<size_t>(k)]];
    }
}

// Squared distance from every pixel to the nearest site, spacing-aware.
inline std::vector<double> edt_sq(const std::vector<std::pair<int, int>>& sites, int h, int w,
                                  double dy, double dx) {
    std::vector<double> grid(static_cast<size_t>(h) * w, kFarSq);
    for (const auto& [y, x] : sites) grid[static_cast<size_t>(y) * w + x] = 0.0;
    std::vector<double> row_in(static_cast<size_t>(w)), row_out(static_cast<size_t>(w));
    for (int y = 0; y < h; ++y) {
        std::copy(grid.begin() + static_cast<int64_t>(y) * w,
                  grid.begin() + static_cast<int64_t>(y + 1) * w, row_in.begin());
        edt_1d(row_in.data(), row_out.data(), w, dx);
        std::copy(row_out.begin(), row_out.end(), grid.begin() + static_cast<int64_t>(y) * w);
    }
    std::vector<double> col_in(static_cast<size_t>(h)), col_out(static_cast<size_t>(h));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) col_in[static_cast<size_t>(y)] = grid[static_cast<size_t>(y) * w + x];
        edt_1d(col_in.data(), col_out.data(), h, dy);
        for (int y = 0; y < h; ++y) grid[static_cast<size_t>(y) * w + x] = col_out[static_cast<size_t>(y)];
    }
    return grid;
}

}  // namespace detail

// Percentile with linear interpolation at rank p*(n-1); values need not be sorted.
inline double percentile(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    if (values.size() == 1) return values[0];
    const double rank = p * static_cast<double>(values.size() - 1);
    const size_t lo = static_cast<size_t>(rank);
    const double frac = rank - static_cast<double>(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

// 95th percentile of the concatenated directed boundary distances, physical
// units; no value when either mask has no foreground.
inline std::optional<double> hd95(const std::vector<uint8_t>& pred,
                                  const std::vector<uint8_t>& gt, int h, int w, double dy,
                                  double dx) {
    if (pred.size() != gt.size() || pred.size() != static_cast<size_t>(h) * static_cast<size_t>(w))
        throw ShapeMismatch("hd95 mask sizes " + std::to_string(pred.size()) + " vs " +
                            std::to_string(gt.size()) + " for " + std::to_string(h) + "x" +
                            std::to_string(w));
    const bool p_any = std::any_of(pred.begin(), pred.end(), [](uint8_t v) { return v != 0; });
    const bool g_any = std::any_of(gt.begin(), gt.end(), [](uint8_t v) { return v != 0; });
    if (!p_any || !g_any) return std::nullopt;

    const auto pb = boundary_pixels(pred, h, w);
    const auto gb = boundary_pixels(gt, h, w);
    const auto to_g = detail::edt_sq(gb, h, w, dy, dx);
    const auto to_p = detail::edt_sq(pb, h, w, dy, dx);

    std::vector<double> dists;
    dists.reserve(pb.size() + gb.size());
    for (const auto& [y, x] : pb) dists.push_back(std::sqrt(to_g[static_cast<size_t>(y) * w + x]));
    for (const auto& [y, x] : gb) dists.push_back(std::sqrt(to_p[static_cast<size_t>(y) * w + x]));
    return percentile(std::move(dists), 0.95);
}

}  // namespace spgcde
