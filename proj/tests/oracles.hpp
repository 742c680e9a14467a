#pragma once

// Independent reference implementations the tests check the library against.
// Everything here is written for obviousness, not speed: straight nested
// loops, explicit stacks, exhaustive search.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "crowdloc/eval.hpp"
#include "crowdloc/grid.hpp"
#include "crowdloc/labels.hpp"
#include "crowdloc/layers.hpp"

namespace oracle {

// Per-pixel naive convolution: acc starts at bias and walks (ic, kh, kw) in
// ascending order, mirroring the library's accumulation order so equality can
// be exact rather than approximate.
inline crowdloc::FeatureStack conv2d(const crowdloc::FeatureStack& in,
                                     const crowdloc::ConvParams& p, int padding) {
    const int oh = in.h - p.kh + 1 + 2 * padding;
    const int ow = in.w - p.kw + 1 + 2 * padding;
    crowdloc::FeatureStack out(p.out_ch, oh, ow);
    for (int oc = 0; oc < p.out_ch; ++oc)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double acc = p.bias[oc];
                for (int ic = 0; ic < p.in_ch; ++ic)
                    for (int r = 0; r < p.kh; ++r)
                        for (int s = 0; s < p.kw; ++s) {
                            const int yy = y + r - padding;
                            const int xx = x + s - padding;
                            if (yy < 0 || yy >= in.h || xx < 0 || xx >= in.w) continue;
                            acc += p.kernel(oc, ic)[r * p.kw + s] * in.at(ic, yy, xx);
                        }
                out.at(oc, y, x) = acc;
            }
    return out;
}

// Windowed mean with clamped (replicate) indexing.
inline crowdloc::FeatureStack avgpool_box(const crowdloc::FeatureStack& in, int kernel) {
    const int r = kernel / 2;
    crowdloc::FeatureStack out(in.c, in.h, in.w);
    for (int ch = 0; ch < in.c; ++ch)
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy)
                    for (int dx = -r; dx <= r; ++dx) {
                        int yy = y + dy, xx = x + dx;
                        yy = yy < 0 ? 0 : (yy >= in.h ? in.h - 1 : yy);
                        xx = xx < 0 ? 0 : (xx >= in.w ? in.w - 1 : xx);
                        acc += in.at(ch, yy, xx);
                    }
                out.at(ch, y, x) = acc / (static_cast<double>(kernel) * kernel);
            }
    return out;
}

// Central finite difference of scalar(buf) w.r.t. buf[i].
inline double fd_grad(double* slot, const std::function<double()>& scalar, double step = 1e-5) {
    const double saved = *slot;
    *slot = saved + step;
    const double hi = scalar();
    *slot = saved - step;
    const double lo = scalar();
    *slot = saved;
    return (hi - lo) / (2.0 * step);
}

// Relative error with absolute floor, for comparing analytic vs FD gradients.
inline double rel_err(double got, double want) {
    const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
    return std::abs(got - want) / denom;
}

// Flood-fill component labeling with an explicit stack, 4-connectivity,
// components numbered in first-encounter raster order.
inline crowdloc::LabelMap flood_fill_components(const crowdloc::Grid& bin) {
    crowdloc::LabelMap map(bin.h, bin.w);
    std::vector<std::pair<int, int>> stack;
    for (int sy = 0; sy < bin.h; ++sy)
        for (int sx = 0; sx < bin.w; ++sx) {
            if (bin.at(sy, sx) != 1.0 || map.at(sy, sx) != 0) continue;
            const int32_t label = ++map.count;
            stack.push_back({sy, sx});
            map.at(sy, sx) = label;
            while (!stack.empty()) {
                auto [y, x] = stack.back();
                stack.pop_back();
                const int ny[4] = {y - 1, y + 1, y, y};
                const int nx[4] = {x, x, x - 1, x + 1};
                for (int k = 0; k < 4; ++k) {
                    if (ny[k] < 0 || ny[k] >= bin.h || nx[k] < 0 || nx[k] >= bin.w) continue;
                    if (bin.at(ny[k], nx[k]) != 1.0 || map.at(ny[k], nx[k]) != 0) continue;
                    map.at(ny[k], nx[k]) = label;
                    stack.push_back({ny[k], nx[k]});
                }
            }
        }
    return map;
}

// Exhaustive optimal matching for small instances: maximize the number of
// within-radius pairs, break ties by minimal total distance.
struct BruteMatch {
    int tp = 0;
    double total_dist = 0.0;
};

inline void brute_match_rec(const std::vector<std::vector<double>>& dist,
                            const std::vector<double>& sigma, int pred, std::vector<char>& used,
                            int tp, double total, BruteMatch& best) {
    const int m = static_cast<int>(dist.size());
    if (pred == m) {
        if (tp > best.tp || (tp == best.tp && total < best.total_dist)) best = {tp, total};
        return;
    }
    brute_match_rec(dist, sigma, pred + 1, used, tp, total, best);  // leave unmatched
    for (size_t j = 0; j < used.size(); ++j) {
        if (used[j] || dist[pred][j] > sigma[j]) continue;
        used[j] = 1;
        brute_match_rec(dist, sigma, pred + 1, used, tp + 1, total + dist[pred][j], best);
        used[j] = 0;
    }
}

inline BruteMatch brute_match(const std::vector<std::pair<double, double>>& preds,
                              const std::vector<crowdloc::GtPoint>& gts) {
    const int m = static_cast<int>(preds.size());
    const int n = static_cast<int>(gts.size());
    std::vector<std::vector<double>> dist(m, std::vector<double>(n));
    std::vector<double> sigma(n);
    for (int j = 0; j < n; ++j) sigma[j] = gts[j].sigma;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            dist[i][j] = std::hypot(preds[i].first - gts[j].x, preds[i].second - gts[j].y);
    BruteMatch best;
    best.total_dist = std::numeric_limits<double>::infinity();
    if (m == 0) return {0, 0.0};
    std::vector<char> used(n, 0);
    brute_match_rec(dist, sigma, 0, used, 0, 0.0, best);
    return best;
}

// Checks every element of `buf` (length n) against finite differences of
// `scalar`; returns the worst relative error.
inline double check_grad(double* buf, const double* analytic, size_t n,
                         const std::function<double()>& scalar, double step = 1e-5) {
    double worst = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double fd = fd_grad(buf + i, scalar, step);
        worst = std::max(worst, rel_err(analytic[i], fd));
    }
    return worst;
}

}  // namespace oracle
