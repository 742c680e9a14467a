#pragma once

#include <cmath>
#include <vector>

#include "crowdloc/eval.hpp"
#include "crowdloc/instances.hpp"
#include "crowdloc/png_io.hpp"

// Diagnostic overlay: the input image in gray with matched predictions in
// green, misses in red, false alarms in magenta, and the per-head match
// radius drawn as a circle in the head's outcome color.

namespace crowdloc {

namespace detail {

constexpr double kGreen[3] = {0.1, 0.9, 0.2};
constexpr double kRed[3] = {0.95, 0.15, 0.15};
constexpr double kMagenta[3] = {0.9, 0.2, 0.9};

inline void put_px(RgbImage& img, int y, int x, const double* c) {
    if (y < 0 || y >= img.h || x < 0 || x >= img.w) return;
    double* p = img.px(y, x);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
}

inline void draw_dot(RgbImage& img, double cx, double cy, const double* c, int r = 2) {
    const int x0 = static_cast<int>(std::lround(cx));
    const int y0 = static_cast<int>(std::lround(cy));
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) put_px(img, y0 + dy, x0 + dx, c);
}

inline void draw_circle(RgbImage& img, double cx, double cy, double radius, const double* c) {
    const int x0 = static_cast<int>(std::lround(cx));
    const int y0 = static_cast<int>(std::lround(cy));
    int r = static_cast<int>(std::lround(radius));
    if (r < 1) r = 1;
    int x = r, y = 0, err = 1 - r;
    while (x >= y) {
        put_px(img, y0 + y, x0 + x, c);
        put_px(img, y0 + y, x0 - x, c);
        put_px(img, y0 - y, x0 + x, c);
        put_px(img, y0 - y, x0 - x, c);
        put_px(img, y0 + x, x0 + y, c);
        put_px(img, y0 + x, x0 - y, c);
        put_px(img, y0 - x, x0 + y, c);
        put_px(img, y0 - x, x0 - y, c);
        ++y;
        if (err < 0) {
            err += 2 * y + 1;
        } else {
            --x;
            err += 2 * (y - x) + 1;
        }
    }
}

}  // namespace detail

struct OverlayCounts {
    int tp = 0, fp = 0, fn = 0;
};

inline OverlayCounts render_overlay(const Grid& base, const LocalizationResult& loc,
                                    const std::vector<GtPoint>& gts, const MatchReport& match,
                                    RgbImage* out) {
    RgbImage img(base.h, base.w);
    for (int y = 0; y < base.h; ++y)
        for (int x = 0; x < base.w; ++x) {
            double g = base.at(y, x);
            g = g < 0.0 ? 0.0 : (g > 1.0 ? 1.0 : g);
            double* p = img.px(y, x);
            p[0] = p[1] = p[2] = g;
        }

    std::vector<char> pred_hit(loc.instances.size(), 0);
    std::vector<char> gt_hit(gts.size(), 0);
    for (const MatchPair& pr : match.pairs) {
        if (pr.pred >= 0 && pr.pred < static_cast<int>(pred_hit.size())) pred_hit[pr.pred] = 1;
        if (pr.gt >= 0 && pr.gt < static_cast<int>(gt_hit.size())) gt_hit[pr.gt] = 1;
    }

    OverlayCounts counts;
    for (size_t j = 0; j < gts.size(); ++j)
        detail::draw_circle(img, gts[j].x, gts[j].y, gts[j].sigma,
                            gt_hit[j] ? detail::kGreen : detail::kRed);
    for (size_t j = 0; j < gts.size(); ++j)
        if (!gt_hit[j]) {
            detail::draw_dot(img, gts[j].x, gts[j].y, detail::kRed);
            ++counts.fn;
        }
    for (size_t i = 0; i < loc.instances.size(); ++i) {
        const Instance& inst = loc.instances[i];
        if (pred_hit[i]) {
            detail::draw_dot(img, inst.cx, inst.cy, detail::kGreen);
            ++counts.tp;
        } else {
            detail::draw_dot(img, inst.cx, inst.cy, detail::kMagenta);
            ++counts.fp;
        }
    }
    if (out) *out = std::move(img);
    return counts;
}

}  // namespace crowdloc
