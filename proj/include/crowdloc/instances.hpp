#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdloc/grid.hpp"
#include "crowdloc/labels.hpp"

// Localization read-out: 4-connected component labeling of a binary map and
// per-component boxes, mass centroids and areas.

namespace crowdloc {

struct Instance {
    int label = 0;
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // tight, inclusive
    double cx = 0.0, cy = 0.0;           // mass centroid
    int area = 0;
};

struct LocalizationResult {
    std::string image_id;
    std::vector<Instance> instances;
    int count() const { return static_cast<int>(instances.size()); }
};

namespace detail {

struct UnionFind {
    std::vector<int32_t> parent, size;
    int32_t make() {
        parent.push_back(static_cast<int32_t>(parent.size()));
        size.push_back(1);
        return parent.back();
    }
    int32_t find(int32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(int32_t a, int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
    }
};

}  // namespace detail

// Two-pass union-find labeling under 4-connectivity. Components are numbered
// 1..K in the raster order their first pixel appears.
inline LabelMap label_components(const Grid& bin) {
    for (double v : bin.v)
        if (v != 0.0 && v != 1.0)
            throw std::invalid_argument("label_components: input is not binary (found " +
                                        std::to_string(v) + ")");
    LabelMap map(bin.h, bin.w);
    detail::UnionFind uf;
    std::vector<int32_t> provisional(bin.v.size(), -1);
    for (int y = 0; y < bin.h; ++y)
        for (int x = 0; x < bin.w; ++x) {
            const size_t i = static_cast<size_t>(y) * bin.w + x;
            if (bin.v[i] == 0.0) continue;
            const int32_t left = x > 0 && bin.v[i - 1] == 1.0 ? provisional[i - 1] : -1;
            const int32_t up = y > 0 && bin.v[i - bin.w] == 1.0 ? provisional[i - bin.w] : -1;
            if (left < 0 && up < 0) {
                provisional[i] = uf.make();
            } else if (left >= 0 && up >= 0) {
                provisional[i] = left;
                uf.unite(left, up);
            } else {
                provisional[i] = left >= 0 ? left : up;
            }
        }
    std::vector<int32_t> compact(uf.parent.size(), 0);
    int32_t next = 0;
    for (size_t i = 0; i < provisional.size(); ++i) {
        if (provisional[i] < 0) continue;
        const int32_t root = uf.find(provisional[i]);
        if (compact[root] == 0) compact[root] = ++next;
        map.v[i] = compact[root];
    }
    map.count = next;
    return map;
}

// Tight boxes, centroids and areas per label; components under min_area are
// dropped and the survivors renumbered in label order.
inline LocalizationResult extract_instances(const LabelMap& labels, int min_area,
                                            const std::string& image_id = {}) {
    struct Acc {
        int x1 = 1 << 30, y1 = 1 << 30, x2 = -1, y2 = -1;
        double sx = 0.0, sy = 0.0;
        int area = 0;
    };
    std::vector<Acc> acc(static_cast<size_t>(labels.count) + 1);
    for (int y = 0; y < labels.h; ++y)
        for (int x = 0; x < labels.w; ++x) {
            const int32_t l = labels.at(y, x);
            if (l <= 0) continue;
            if (l > labels.count)
                throw std::invalid_argument("extract_instances: label " + std::to_string(l) +
                                            " exceeds declared count");
            Acc& a = acc[l];
            a.x1 = std::min(a.x1, x);
            a.y1 = std::min(a.y1, y);
            a.x2 = std::max(a.x2, x);
            a.y2 = std::max(a.y2, y);
            a.sx += x;
            a.sy += y;
            a.area += 1;
        }
    LocalizationResult res;
    res.image_id = image_id;
    for (int l = 1; l <= labels.count; ++l) {
        const Acc& a = acc[l];
        if (a.area < min_area) continue;
        Instance inst;
        inst.label = static_cast<int>(res.instances.size()) + 1;
        inst.x1 = a.x1;
        inst.y1 = a.y1;
        inst.x2 = a.x2;
        inst.y2 = a.y2;
        inst.cx = a.sx / a.area;
        inst.cy = a.sy / a.area;
        inst.area = a.area;
        res.instances.push_back(inst);
    }
    return res;
}

inline LocalizationResult localize(const Grid& bin, int min_area, const std::string& image_id = {}) {
    return extract_instances(label_components(bin), min_area, image_id);
}

}  // namespace crowdloc
