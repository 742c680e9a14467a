#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdloc/grid.hpp"
#include "crowdloc/io.hpp"
#include "crowdloc/labels.hpp"
#include "crowdloc/png_io.hpp"
#include "crowdloc/rng.hpp"

// Synthetic desk-scale crowd scenes. Heads are bright square tiles that fill
// their annotation boxes exactly, clutter is dimmer tiles and streaks, and
// every scene is rendered under its own illumination factor. Illumination
// shifts head and clutter brightness through overlapping absolute ranges, so
// no single constant threshold suits every image, while the factor itself is
// only readable from whole-image statistics - exactly the signal a learned
// per-image or per-pixel threshold can exploit.

namespace crowdloc {

struct SceneSpec {
    int width = 128, height = 128;
    int heads_min = 20, heads_max = 26;
    double radius_min = 2.5, radius_max = 5.5;
    double head_gain_min = 0.54, head_gain_max = 0.95;
    double background = 0.12;
    double noise = 0.015;
    double illum_min = 0.75, illum_max = 1.25;
    int clutter_min = 20, clutter_max = 30;
    double blob_gain_min = 0.41, blob_gain_max = 0.44;
    double streak_gain_min = 0.22, streak_gain_max = 0.36;
    // A small share of scenes carries almost no crowd. They teach a threshold
    // encoder that thin confidence mass calls for caution, not rescue, which
    // is what keeps clutter-only frames from being flooded at a low threshold.
    double sparse_frac = 0.1;
    int sparse_max = 3;

    void validate() const {
        if (width < 16 || height < 16) throw std::invalid_argument("SceneSpec: image too small");
        if (heads_min < 0 || heads_max < heads_min)
            throw std::invalid_argument("SceneSpec: bad head count range");
        if (!(radius_min > 0.0) || radius_max < radius_min)
            throw std::invalid_argument("SceneSpec: bad radius range");
        if (clutter_min < 0 || clutter_max < clutter_min)
            throw std::invalid_argument("SceneSpec: bad clutter range");
        if (!(illum_min > 0.0) || illum_max < illum_min)
            throw std::invalid_argument("SceneSpec: bad illumination range");
        if (sparse_frac < 0.0 || sparse_frac > 1.0)
            throw std::invalid_argument("SceneSpec: sparse_frac must be in [0, 1]");
        if (sparse_max < 0) throw std::invalid_argument("SceneSpec: sparse_max must be >= 0");
    }
};

struct Scene {
    Grid image;
    Annotation ann;
    LabelMap gt;
};

namespace detail {

// Hard square tile on the same rounding grid the label painter uses, so a
// painted instance region and its photometric footprint are pixel-identical:
// no labeled pixel sits at background brightness and no lit pixel leaks out.
// The outermost ring is slightly attenuated, the way real object boundaries
// lose a little energy to the sensor grid, so interiors outshine rims.
inline void stamp_tile(Grid& img, double cx, double cy, double r, double gain) {
    const int x0 = std::clamp(static_cast<int>(std::lround(cx - r)), 0, img.w - 1);
    const int x1 = std::clamp(static_cast<int>(std::lround(cx + r)), 0, img.w - 1);
    const int y0 = std::clamp(static_cast<int>(std::lround(cy - r)), 0, img.h - 1);
    const int y1 = std::clamp(static_cast<int>(std::lround(cy + r)), 0, img.h - 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const bool rim = y == y0 || y == y1 || x == x0 || x == x1;
            img.at(y, x) = std::max(img.at(y, x), rim ? 0.85 * gain : gain);
        }
}

inline double point_segment_dist(double px, double py, double ax, double ay, double bx,
                                 double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(px - (ax + t * vx), py - (ay + t * vy));
}

inline void stamp_streak(Grid& img, double ax, double ay, double bx, double by, double thick,
                         double gain) {
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - thick - 2)));
    const int x1 = std::min(img.w - 1, static_cast<int>(std::ceil(std::max(ax, bx) + thick + 2)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - thick - 2)));
    const int y1 = std::min(img.h - 1, static_cast<int>(std::ceil(std::max(ay, by) + thick + 2)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = point_segment_dist(x, y, ax, ay, bx, by);
            const double t = std::clamp(0.5 * thick + 0.5 - d, 0.0, 1.0);
            if (t > 0.0) img.at(y, x) = std::max(img.at(y, x), gain * t);
        }
}

}  // namespace detail

inline Scene synth_scene(const SceneSpec& spec, Rng& rng, const std::string& image_id = {}) {
    spec.validate();
    Scene s;
    s.image = Grid(spec.height, spec.width, 0.0);
    s.ann.image_id = image_id;

    // Heads: rejection-sampled so disks stay inside the frame and centers
    // keep enough room that label generation never degenerates.
    const bool sparse = rng.bernoulli(spec.sparse_frac);
    const int n_heads = sparse ? rng.uniform_int(0, spec.sparse_max)
                               : rng.uniform_int(spec.heads_min, spec.heads_max);
    std::vector<double> hx, hy, hr;
    for (int i = 0; i < n_heads; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < 300 && !placed; ++attempt) {
            const double r = rng.uniform(spec.radius_min, spec.radius_max);
            const double cx = rng.uniform(r + 1.0, spec.width - 2.0 - r);
            const double cy = rng.uniform(r + 1.0, spec.height - 2.0 - r);
            bool ok = true;
            for (size_t j = 0; j < hx.size(); ++j) {
                const double d = std::max(std::abs(cx - hx[j]), std::abs(cy - hy[j]));
                if (d < r + hr[j] + 1.0) ok = false;  // tiles stay disjoint
            }
            if (!ok) continue;
            hx.push_back(cx);
            hy.push_back(cy);
            hr.push_back(r);
            placed = true;
        }
        if (!placed)
            throw std::runtime_error("synth_scene: cannot place head " + std::to_string(i + 1) +
                                     " of " + std::to_string(n_heads) +
                                     " (spec too crowded for the frame)");
    }
    for (size_t i = 0; i < hx.size(); ++i)
        detail::stamp_tile(s.image, hx[i], hy[i], hr[i],
                           rng.uniform(spec.head_gain_min, spec.head_gain_max));

    // Clutter: half compact blobs, half elongated streaks, kept clear of the
    // heads so annotations stay truthful.
    const int n_clutter = rng.uniform_int(spec.clutter_min, spec.clutter_max);
    for (int i = 0; i < n_clutter; ++i) {
        if (rng.bernoulli(0.6)) {
            const double gain = rng.uniform(spec.blob_gain_min, spec.blob_gain_max);
            for (int attempt = 0; attempt < 100; ++attempt) {
                const double r = rng.uniform(2.0, 6.0);
                const double cx = rng.uniform(r, spec.width - 1.0 - r);
                const double cy = rng.uniform(r, spec.height - 1.0 - r);
                bool ok = true;
                for (size_t j = 0; j < hx.size(); ++j)
                    if (std::max(std::abs(cx - hx[j]), std::abs(cy - hy[j])) < hr[j] + r + 2.0)
                        ok = false;
                if (!ok) continue;
                detail::stamp_tile(s.image, cx, cy, r, gain);
                break;
            }
        } else {
            const double gain = rng.uniform(spec.streak_gain_min, spec.streak_gain_max);
            for (int attempt = 0; attempt < 100; ++attempt) {
                const double len = rng.uniform(8.0, 40.0);
                const double thick = rng.uniform(2.0, 3.5);
                const double ax = rng.uniform(1.0, spec.width - 2.0);
                const double ay = rng.uniform(1.0, spec.height - 2.0);
                const double phi = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
                const double bx = std::clamp(ax + len * std::cos(phi), 1.0, spec.width - 2.0);
                const double by = std::clamp(ay + len * std::sin(phi), 1.0, spec.height - 2.0);
                bool ok = true;
                for (size_t j = 0; j < hx.size(); ++j)
                    if (detail::point_segment_dist(hx[j], hy[j], ax, ay, bx, by) <
                        hr[j] + 0.5 * thick + 4.0)
                        ok = false;
                if (!ok) continue;
                detail::stamp_streak(s.image, ax, ay, bx, by, thick, gain);
                break;
            }
        }
    }

    // Scene-wide illumination scales the objects but neither the background
    // level nor the sensor noise: a local window cannot recover the factor by
    // comparing an object against nearby background, while statistics pooled
    // over the whole frame still can.
    const double illum = rng.uniform(spec.illum_min, spec.illum_max);
    for (auto& v : s.image.v) v = v * illum + spec.background;
    if (spec.noise > 0.0)
        for (auto& v : s.image.v) v += rng.normal(0.0, spec.noise);
    for (auto& v : s.image.v) v = std::clamp(v, 0.0, 1.0);

    for (size_t i = 0; i < hx.size(); ++i) {
        s.ann.points.push_back({hx[i], hy[i]});
        s.ann.boxes.push_back({hx[i] - hr[i], hy[i] - hr[i], hx[i] + hr[i], hy[i] + hr[i]});
    }
    s.gt = hx.empty() ? LabelMap(spec.height, spec.width)
                      : iim_from_boxes(s.ann, spec.width, spec.height);
    return s;
}

struct DatasetSpec {
    SceneSpec scene;
    int n_train = 200, n_val = 50, n_test = 50;
    double negative_frac = 0.1;  // this fraction of each split carries no heads
};

inline std::string scene_id(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", index);
    return buf;
}

// Writes out/<split>/{images,anns,gt}/<id>.{png,json,png} plus a manifest and
// per-image count sidecars. Fully determined by the seed.
inline void synth_dataset(const DatasetSpec& spec, const std::string& out_dir, uint64_t seed) {
    namespace fs = std::filesystem;
    spec.scene.validate();
    const std::pair<std::string, int> splits[3] = {
        {"train", spec.n_train}, {"val", spec.n_val}, {"test", spec.n_test}};
    const int neg_every =
        spec.negative_frac > 0.0 ? std::max(2, static_cast<int>(std::lround(1.0 / spec.negative_frac)))
                                 : 0;
    Rng master(seed);
    int split_tag = 0;
    for (const auto& [split, count] : splits) {
        const fs::path base = fs::path(out_dir) / split;
        fs::create_directories(base / "images");
        fs::create_directories(base / "anns");
        fs::create_directories(base / "gt");
        std::vector<std::string> ids;
        for (int i = 0; i < count; ++i) {
            Rng rng = master.fork(static_cast<uint64_t>(split_tag) * 1000000 + i);
            SceneSpec ss = spec.scene;
            if (neg_every > 0 && i % neg_every == neg_every - 1) ss.heads_min = ss.heads_max = 0;
            const std::string id = scene_id(i);
            Scene sc = synth_scene(ss, rng, id);
            write_png_gray8((base / "images" / (id + ".png")).string(), sc.image);
            write_annotation((base / "anns" / (id + ".json")).string(), sc.ann);
            write_png_gray16((base / "gt" / (id + ".png")).string(), sc.gt);
            write_text((base / "gt" / (id + ".txt")).string(), std::to_string(sc.gt.count) + "\n");
            ids.push_back(id);
        }
        write_manifest((base / "manifest.txt").string(), ids);
        ++split_tag;
    }
}

}  // namespace crowdloc
