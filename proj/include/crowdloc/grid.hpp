#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdloc {

// Dense H x W raster of doubles. Confidence maps, threshold maps, binary
// maps and loss targets all use this representation; the invariants differ
// per use (e.g. binary maps hold exactly 0 or 1) and are checked where they
// matter.
struct Grid {
    int h = 0;
    int w = 0;
    std::vector<double> v;

    Grid() = default;
    Grid(int height, int width, double fill = 0.0)
        : h(height), w(width), v(static_cast<size_t>(height) * width, fill) {
        if (height < 1 || width < 1)
            throw std::invalid_argument("Grid: size must be at least 1x1, got " +
                                        std::to_string(height) + "x" + std::to_string(width));
    }

    double& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    double* row(int y) { return v.data() + static_cast<size_t>(y) * w; }
    const double* row(int y) const { return v.data() + static_cast<size_t>(y) * w; }
    size_t size() const { return v.size(); }
    bool same_shape(const Grid& o) const { return h == o.h && w == o.w; }
};

// C x H x W stack of feature channels, channel-major contiguous.
struct FeatureStack {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<double> v;

    FeatureStack() = default;
    FeatureStack(int channels, int height, int width, double fill = 0.0)
        : c(channels), h(height), w(width),
          v(static_cast<size_t>(channels) * height * width, fill) {
        if (channels < 1 || height < 1 || width < 1)
            throw std::invalid_argument("FeatureStack: bad shape " + std::to_string(channels) +
                                        "x" + std::to_string(height) + "x" + std::to_string(width));
    }

    double& at(int ch, int y, int x) {
        return v[(static_cast<size_t>(ch) * h + y) * w + x];
    }
    double at(int ch, int y, int x) const {
        return v[(static_cast<size_t>(ch) * h + y) * w + x];
    }
    double* channel(int ch) { return v.data() + static_cast<size_t>(ch) * h * w; }
    const double* channel(int ch) const { return v.data() + static_cast<size_t>(ch) * h * w; }
    size_t plane() const { return static_cast<size_t>(h) * w; }
    bool same_shape(const FeatureStack& o) const { return c == o.c && h == o.h && w == o.w; }
};

inline FeatureStack to_stack(const Grid& g) {
    FeatureStack s(1, g.h, g.w);
    s.v = g.v;
    return s;
}

inline Grid to_grid(const FeatureStack& s) {
    if (s.c != 1)
        throw std::invalid_argument("to_grid: expected 1 channel, got " + std::to_string(s.c));
    Grid g(s.h, s.w);
    g.v = s.v;
    return g;
}

// Per-channel Hadamard product with a single-channel mask.
inline FeatureStack mask_channels(const FeatureStack& f, const Grid& mask) {
    if (f.h != mask.h || f.w != mask.w)
        throw std::invalid_argument("mask_channels: spatial mismatch");
    FeatureStack out(f.c, f.h, f.w);
    const size_t plane = f.plane();
    for (int ch = 0; ch < f.c; ++ch) {
        const double* src = f.channel(ch);
        double* dst = out.channel(ch);
        for (size_t i = 0; i < plane; ++i) dst[i] = src[i] * mask.v[i];
    }
    return out;
}

}  // namespace crowdloc
