#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdloc/grid.hpp"

// Ground-truth instance maps. Every annotated head becomes one painted
// region; regions are guaranteed pairwise non-adjacent under 4-connectivity,
// so component labeling of the binarized map recovers the instance count
// exactly. That guarantee is the whole point and is enforced here even where
// it costs a degenerate annotation a smaller footprint.

namespace crowdloc {

struct BoxAnn {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    double cx() const { return 0.5 * (x1 + x2); }
    double cy() const { return 0.5 * (y1 + y2); }
    double w() const { return x2 - x1; }
    double h() const { return y2 - y1; }
    double sigma_l() const { return 0.5 * std::sqrt(w() * w() + h() * h()); }
};

struct Annotation {
    std::string image_id;
    std::vector<std::pair<double, double>> points;  // (x, y)
    std::vector<BoxAnn> boxes;
};

// Integer label raster: 0 background, 1..count instances.
struct LabelMap {
    int h = 0, w = 0;
    std::vector<int32_t> v;
    int count = 0;

    LabelMap() = default;
    LabelMap(int height, int width) : h(height), w(width), v(static_cast<size_t>(height) * width, 0) {
        if (height < 1 || width < 1) throw std::invalid_argument("LabelMap: size must be at least 1x1");
    }
    int32_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    int32_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }

    Grid binarized() const {
        Grid g(h, w);
        for (size_t i = 0; i < v.size(); ++i) g.v[i] = v[i] > 0 ? 1.0 : 0.0;
        return g;
    }
};

namespace detail {

struct PaintRect {
    int x1, y1, x2, y2;  // inclusive pixel corners
};

inline PaintRect paint_rect(double cx, double cy, double w, double h, int img_w, int img_h) {
    PaintRect r;
    r.x1 = static_cast<int>(std::lround(cx - 0.5 * w));
    r.x2 = static_cast<int>(std::lround(cx + 0.5 * w));
    r.y1 = static_cast<int>(std::lround(cy - 0.5 * h));
    r.y2 = static_cast<int>(std::lround(cy + 0.5 * h));
    r.x1 = std::clamp(r.x1, 0, img_w - 1);
    r.x2 = std::clamp(r.x2, 0, img_w - 1);
    r.y1 = std::clamp(r.y1, 0, img_h - 1);
    r.y2 = std::clamp(r.y2, 0, img_h - 1);
    return r;
}

// Per-axis pixel gap between inclusive intervals: 0 when they overlap, else
// the index distance between the closest pixels.
inline int axis_gap(int a1, int a2, int b1, int b2) {
    if (b1 > a2) return b1 - a2;
    if (a1 > b2) return a1 - b2;
    return 0;
}

// Closest pixels of two rectangles are 4-adjacent (or overlapping) iff one
// axis gap is 0 and the other is at most 1.
inline bool rects_touch(const PaintRect& a, const PaintRect& b) {
    const int gx = axis_gap(a.x1, a.x2, b.x1, b.x2);
    const int gy = axis_gap(a.y1, a.y2, b.y1, b.y2);
    return std::min(gx, gy) == 0 && std::max(gx, gy) <= 1;
}

inline int cheb_gap(const PaintRect& a, const PaintRect& b) {
    return std::max(axis_gap(a.x1, a.x2, b.x1, b.x2), axis_gap(a.y1, a.y2, b.y1, b.y2));
}

}  // namespace detail

// Paints each box as a filled rectangle. Conflicting pairs shrink toward
// their fixed centers by 5% per round until every pair is separated by more
// than a quarter of the smaller box's shorter side and no two rectangles
// touch under 4-connectivity.
inline LabelMap iim_from_boxes(const Annotation& ann, int img_w, int img_h) {
    const size_t n = ann.boxes.size();
    for (const BoxAnn& b : ann.boxes)
        if (!(b.x1 < b.x2) || !(b.y1 < b.y2))
            throw std::invalid_argument("iim_from_boxes: degenerate box in '" + ann.image_id + "'");
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j)
            if (ann.boxes[i].cx() == ann.boxes[j].cx() && ann.boxes[i].cy() == ann.boxes[j].cy())
                throw std::invalid_argument("iim_from_boxes: boxes " + std::to_string(i) + " and " +
                                            std::to_string(j) + " share a center in '" +
                                            ann.image_id + "'");

    std::vector<double> w(n), h(n);
    for (size_t i = 0; i < n; ++i) {
        w[i] = ann.boxes[i].w();
        h[i] = ann.boxes[i].h();
    }
    std::vector<detail::PaintRect> rects(n);
    auto repaint = [&](size_t i) {
        rects[i] =
            detail::paint_rect(ann.boxes[i].cx(), ann.boxes[i].cy(), w[i], h[i], img_w, img_h);
    };
    for (size_t i = 0; i < n; ++i) repaint(i);

    auto pair_ok = [&](size_t i, size_t j) {
        if (detail::rects_touch(rects[i], rects[j])) return false;
        const size_t small = w[i] * h[i] <= w[j] * h[j] ? i : j;
        return detail::cheb_gap(rects[i], rects[j]) > 0.25 * std::min(w[small], h[small]);
    };

    for (;;) {
        std::vector<char> shrink(n, 0);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j)
                if (!pair_ok(i, j)) shrink[i] = shrink[j] = 1;
        bool any = false, progressed = false;
        for (size_t i = 0; i < n; ++i) {
            if (!shrink[i]) continue;
            any = true;
            const bool at_floor = rects[i].x1 == rects[i].x2 && rects[i].y1 == rects[i].y2 &&
                                  w[i] < 1e-6 && h[i] < 1e-6;
            if (at_floor) continue;
            w[i] *= 0.95;
            h[i] *= 0.95;
            repaint(i);
            progressed = true;
        }
        if (!any) break;
        if (!progressed)
            throw std::runtime_error("iim_from_boxes: boxes in '" + ann.image_id +
                                     "' cannot be separated (centers round to touching pixels)");
    }

    LabelMap map(img_h, img_w);
    map.count = static_cast<int>(n);
    for (size_t i = 0; i < n; ++i)
        for (int y = rects[i].y1; y <= rects[i].y2; ++y)
            for (int x = rects[i].x1; x <= rects[i].x2; ++x)
                map.at(y, x) = static_cast<int32_t>(i + 1);
    return map;
}

// Paints each point as a filled disk. Radius follows nearest-neighbour
// distance, capped at 15 px; pairs whose disks could still meet on the raster
// are trimmed, the later point first, down to a bare center pixel if needed.
inline LabelMap iim_from_points(const Annotation& ann, int img_w, int img_h) {
    const size_t n = ann.points.size();
    std::vector<int> px(n), py(n);
    for (size_t i = 0; i < n; ++i) {
        const auto& [x, y] = ann.points[i];
        if (x < 0 || x > img_w - 1 || y < 0 || y > img_h - 1)
            throw std::invalid_argument("iim_from_points: point " + std::to_string(i) +
                                        " outside image in '" + ann.image_id + "'");
        px[i] = static_cast<int>(std::lround(x));
        py[i] = static_cast<int>(std::lround(y));
    }
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            if (ann.points[i] == ann.points[j])
                throw std::invalid_argument("iim_from_points: coincident points " +
                                            std::to_string(i) + "," + std::to_string(j) + " in '" +
                                            ann.image_id + "'");
            const int ddx = std::abs(px[i] - px[j]), ddy = std::abs(py[i] - py[j]);
            if (ddx + ddy <= 1)
                throw std::invalid_argument(
                    "iim_from_points: points " + std::to_string(i) + "," + std::to_string(j) +
                    " land on touching pixels in '" + ann.image_id + "'");
        }

    std::vector<int> radius(n, 15);
    for (size_t i = 0; i < n; ++i) {
        double dnn = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = ann.points[i].first - ann.points[j].first;
            const double dy = ann.points[i].second - ann.points[j].second;
            dnn = std::min(dnn, std::sqrt(dx * dx + dy * dy));
        }
        if (std::isfinite(dnn))
            radius[i] = std::max(1, std::min(15, static_cast<int>(std::floor((dnn - 1.0) / 2.0))));
    }

    // Raster safety: pixels of two disks can be 4-adjacent only if
    // r_i + r_j + 1 >= pixel-center distance. Trim the larger radius (the
    // later point on ties) until that cannot happen. A pair may end at bare
    // center pixels; those are safe because touching centers were rejected
    // above (so d > 1, making the condition false at radius sum 0).
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            const double dx = px[i] - px[j], dy = py[i] - py[j];
            const double d = std::sqrt(dx * dx + dy * dy);
            while (radius[i] + radius[j] > 0 && radius[i] + radius[j] + 1 >= d - 1e-9) {
                const size_t cut = radius[j] >= radius[i] ? j : i;
                radius[cut] -= 1;
            }
        }

    LabelMap map(img_h, img_w);
    map.count = static_cast<int>(n);
    for (size_t i = 0; i < n; ++i) {
        const int r = radius[i];
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx) {
                if (dx * dx + dy * dy > r * r) continue;
                const int x = px[i] + dx, y = py[i] + dy;
                if (x < 0 || x >= img_w || y < 0 || y >= img_h) continue;
                map.at(y, x) = static_cast<int32_t>(i + 1);
            }
    }
    return map;
}

}  // namespace crowdloc
