#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "crowdloc/grid.hpp"

// Layer kernel with hand-derived backward passes. All arithmetic is double
// precision and single threaded; forwards are plain loops so that identical
// inputs give bit-identical outputs. conv2d and avgpool_box accumulate
// contributions in ascending (ic, kh, kw) order, which keeps the forward
// results bit-exact against a naive nested-loop evaluation (the project is
// built with fp-contract off).
//
// Backward convention: *_backward(grad_input, grad_params) writes grad_input
// fresh and accumulates (+=) into parameter gradients, so per-batch
// accumulation falls out naturally.

namespace crowdloc {

// Learnable tensors of one conv layer. The PReLU slope rides along even for
// layers that do not use it.
struct ConvParams {
    int out_ch = 0, in_ch = 0, kh = 0, kw = 0;
    std::vector<double> weight;  // out*in*kh*kw
    std::vector<double> bias;    // out
    double prelu_slope = 0.25;

    ConvParams() = default;
    ConvParams(int oc, int ic, int k_h, int k_w)
        : out_ch(oc), in_ch(ic), kh(k_h), kw(k_w),
          weight(static_cast<size_t>(oc) * ic * k_h * k_w, 0.0), bias(oc, 0.0) {}

    double* kernel(int oc, int ic) {
        return weight.data() + (static_cast<size_t>(oc) * in_ch + ic) * kh * kw;
    }
    const double* kernel(int oc, int ic) const {
        return weight.data() + (static_cast<size_t>(oc) * in_ch + ic) * kh * kw;
    }

    ConvParams zeros_like() const {
        ConvParams g(out_ch, in_ch, kh, kw);
        g.prelu_slope = 0.0;
        return g;
    }
};

inline void check_conv_shapes(const FeatureStack& in, const ConvParams& p, int padding) {
    if (in.c != p.in_ch)
        throw std::invalid_argument("conv2d: input has " + std::to_string(in.c) +
                                    " channels, kernel expects " + std::to_string(p.in_ch));
    if (in.h + 2 * padding < p.kh || in.w + 2 * padding < p.kw)
        throw std::invalid_argument("conv2d: kernel " + std::to_string(p.kh) + "x" +
                                    std::to_string(p.kw) + " does not fit padded input " +
                                    std::to_string(in.h) + "x" + std::to_string(in.w));
    if (padding < 0) throw std::invalid_argument("conv2d: negative padding");
}

// Cross-correlation with zero padding.
inline FeatureStack conv2d(const FeatureStack& in, const ConvParams& p, int padding) {
    check_conv_shapes(in, p, padding);
    const int oh = in.h - p.kh + 1 + 2 * padding;
    const int ow = in.w - p.kw + 1 + 2 * padding;
    FeatureStack out(p.out_ch, oh, ow);
    for (int oc = 0; oc < p.out_ch; ++oc) {
        double* op = out.channel(oc);
        const double b = p.bias[oc];
        for (size_t i = 0; i < out.plane(); ++i) op[i] = b;
    }
    for (int oc = 0; oc < p.out_ch; ++oc) {
        double* op = out.channel(oc);
        for (int ic = 0; ic < p.in_ch; ++ic) {
            const double* inp = in.channel(ic);
            const double* k = p.kernel(oc, ic);
            for (int r = 0; r < p.kh; ++r)
                for (int s = 0; s < p.kw; ++s) {
                    const double kv = k[r * p.kw + s];
                    const int dy = r - padding, dx = s - padding;
                    const int y0 = std::max(0, -dy), y1 = std::min(oh, in.h - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(ow, in.w - dx);
                    for (int y = y0; y < y1; ++y) {
                        const double* ir = inp + static_cast<size_t>(y + dy) * in.w + (x0 + dx);
                        double* orow = op + static_cast<size_t>(y) * ow + x0;
                        const int n = x1 - x0;
                        for (int x = 0; x < n; ++x) orow[x] += kv * ir[x];
                    }
                }
        }
    }
    return out;
}

inline void conv2d_backward(const FeatureStack& in, const ConvParams& p, int padding,
                            const FeatureStack& upstream, FeatureStack* grad_in,
                            ConvParams* grad_p) {
    check_conv_shapes(in, p, padding);
    const int oh = in.h - p.kh + 1 + 2 * padding;
    const int ow = in.w - p.kw + 1 + 2 * padding;
    if (upstream.c != p.out_ch || upstream.h != oh || upstream.w != ow)
        throw std::invalid_argument("conv2d_backward: upstream shape mismatch");
    if (grad_in) *grad_in = FeatureStack(in.c, in.h, in.w);
    for (int oc = 0; oc < p.out_ch; ++oc) {
        const double* up = upstream.channel(oc);
        if (grad_p)
            for (size_t i = 0; i < upstream.plane(); ++i) grad_p->bias[oc] += up[i];
        for (int ic = 0; ic < p.in_ch; ++ic) {
            const double* inp = in.channel(ic);
            const double* k = p.kernel(oc, ic);
            double* gk = grad_p ? grad_p->kernel(oc, ic) : nullptr;
            double* gi = grad_in ? grad_in->channel(ic) : nullptr;
            for (int r = 0; r < p.kh; ++r)
                for (int s = 0; s < p.kw; ++s) {
                    const int dy = r - padding, dx = s - padding;
                    const int y0 = std::max(0, -dy), y1 = std::min(oh, in.h - dy);
                    const int x0 = std::max(0, -dx), x1 = std::min(ow, in.w - dx);
                    const int n = x1 - x0;
                    if (n <= 0 || y0 >= y1) continue;
                    if (gk) {
                        double acc = 0.0;
                        for (int y = y0; y < y1; ++y) {
                            const double* ir = inp + static_cast<size_t>(y + dy) * in.w + (x0 + dx);
                            const double* ur = up + static_cast<size_t>(y) * ow + x0;
                            for (int x = 0; x < n; ++x) acc += ur[x] * ir[x];
                        }
                        gk[r * p.kw + s] += acc;
                    }
                    if (gi) {
                        const double kv = k[r * p.kw + s];
                        for (int y = y0; y < y1; ++y) {
                            double* gr = gi + static_cast<size_t>(y + dy) * in.w + (x0 + dx);
                            const double* ur = up + static_cast<size_t>(y) * ow + x0;
                            for (int x = 0; x < n; ++x) gr[x] += kv * ur[x];
                        }
                    }
                }
        }
    }
}

inline FeatureStack prelu(const FeatureStack& in, double slope) {
    if (!std::isfinite(slope)) throw std::invalid_argument("prelu: non-finite slope");
    FeatureStack out(in.c, in.h, in.w);
    for (size_t i = 0; i < in.v.size(); ++i) {
        const double x = in.v[i];
        out.v[i] = x >= 0.0 ? x : slope * x;
    }
    return out;
}

// grad_slope accumulates the sum of upstream*x over negative inputs.
inline void prelu_backward(const FeatureStack& in, double slope, const FeatureStack& upstream,
                           FeatureStack* grad_in, double* grad_slope) {
    if (!in.same_shape(upstream))
        throw std::invalid_argument("prelu_backward: upstream shape mismatch");
    if (grad_in) *grad_in = FeatureStack(in.c, in.h, in.w);
    double gs = 0.0;
    for (size_t i = 0; i < in.v.size(); ++i) {
        const double x = in.v[i];
        if (x >= 0.0) {
            if (grad_in) grad_in->v[i] = upstream.v[i];
        } else {
            if (grad_in) grad_in->v[i] = slope * upstream.v[i];
            gs += upstream.v[i] * x;
        }
    }
    if (grad_slope) *grad_slope += gs;
}

// Box mean with stride 1 and replicate-edge padding; output keeps the input
// size. Kernel must be odd.
inline FeatureStack avgpool_box(const FeatureStack& in, int kernel) {
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("avgpool_box: kernel must be odd, got " +
                                    std::to_string(kernel));
    const int r = kernel / 2;
    const double cnt = static_cast<double>(kernel) * kernel;
    FeatureStack out(in.c, in.h, in.w);
    for (int ch = 0; ch < in.c; ++ch) {
        const double* src = in.channel(ch);
        double* dst = out.channel(ch);
        for (int y = 0; y < in.h; ++y)
            for (int x = 0; x < in.w; ++x) {
                double acc = 0.0;
                for (int dy = -r; dy <= r; ++dy) {
                    const int yy = std::clamp(y + dy, 0, in.h - 1);
                    const double* row = src + static_cast<size_t>(yy) * in.w;
                    for (int dx = -r; dx <= r; ++dx)
                        acc += row[std::clamp(x + dx, 0, in.w - 1)];
                }
                dst[static_cast<size_t>(y) * in.w + x] = acc / cnt;
            }
    }
    return out;
}

inline void avgpool_box_backward(int kernel, const FeatureStack& upstream,
                                 FeatureStack* grad_in) {
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("avgpool_box_backward: kernel must be odd");
    const int r = kernel / 2;
    const double cnt = static_cast<double>(kernel) * kernel;
    *grad_in = FeatureStack(upstream.c, upstream.h, upstream.w);
    for (int ch = 0; ch < upstream.c; ++ch) {
        const double* up = upstream.channel(ch);
        double* gi = grad_in->channel(ch);
        for (int y = 0; y < upstream.h; ++y)
            for (int x = 0; x < upstream.w; ++x) {
                const double u = up[static_cast<size_t>(y) * upstream.w + x] / cnt;
                for (int dy = -r; dy <= r; ++dy) {
                    const int yy = std::clamp(y + dy, 0, upstream.h - 1);
                    double* row = gi + static_cast<size_t>(yy) * upstream.w;
                    for (int dx = -r; dx <= r; ++dx)
                        row[std::clamp(x + dx, 0, upstream.w - 1)] += u;
                }
            }
    }
    return;
}

// Bilinear resize, align-corners-false. The lerp form keeps constant inputs
// exactly constant.
inline FeatureStack resize_bilinear(const FeatureStack& in, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_bilinear: bad output size");
    FeatureStack out(in.c, out_h, out_w);
    const double sy = static_cast<double>(in.h) / out_h;
    const double sx = static_cast<double>(in.w) / out_w;
    for (int ch = 0; ch < in.c; ++ch) {
        const double* src = in.channel(ch);
        double* dst = out.channel(ch);
        for (int y = 0; y < out_h; ++y) {
            double fy = (y + 0.5) * sy - 0.5;
            int y0 = static_cast<int>(std::floor(fy));
            double ty = fy - y0;
            int y0c = std::clamp(y0, 0, in.h - 1);
            int y1c = std::clamp(y0 + 1, 0, in.h - 1);
            for (int x = 0; x < out_w; ++x) {
                double fx = (x + 0.5) * sx - 0.5;
                int x0 = static_cast<int>(std::floor(fx));
                double tx = fx - x0;
                int x0c = std::clamp(x0, 0, in.w - 1);
                int x1c = std::clamp(x0 + 1, 0, in.w - 1);
                const double a = src[static_cast<size_t>(y0c) * in.w + x0c];
                const double b = src[static_cast<size_t>(y0c) * in.w + x1c];
                const double c = src[static_cast<size_t>(y1c) * in.w + x0c];
                const double d = src[static_cast<size_t>(y1c) * in.w + x1c];
                const double top = a + tx * (b - a);
                const double bot = c + tx * (d - c);
                dst[static_cast<size_t>(y) * out_w + x] = top + ty * (bot - top);
            }
        }
    }
    return out;
}

inline void resize_bilinear_backward(int in_h, int in_w, const FeatureStack& upstream,
                                     FeatureStack* grad_in) {
    *grad_in = FeatureStack(upstream.c, in_h, in_w);
    const double sy = static_cast<double>(in_h) / upstream.h;
    const double sx = static_cast<double>(in_w) / upstream.w;
    for (int ch = 0; ch < upstream.c; ++ch) {
        const double* up = upstream.channel(ch);
        double* gi = grad_in->channel(ch);
        for (int y = 0; y < upstream.h; ++y) {
            double fy = (y + 0.5) * sy - 0.5;
            int y0 = static_cast<int>(std::floor(fy));
            double ty = fy - y0;
            int y0c = std::clamp(y0, 0, in_h - 1);
            int y1c = std::clamp(y0 + 1, 0, in_h - 1);
            for (int x = 0; x < upstream.w; ++x) {
                double fx = (x + 0.5) * sx - 0.5;
                int x0 = static_cast<int>(std::floor(fx));
                double tx = fx - x0;
                int x0c = std::clamp(x0, 0, in_w - 1);
                int x1c = std::clamp(x0 + 1, 0, in_w - 1);
                const double u = up[static_cast<size_t>(y) * upstream.w + x];
                gi[static_cast<size_t>(y0c) * in_w + x0c] += u * (1.0 - ty) * (1.0 - tx);
                gi[static_cast<size_t>(y0c) * in_w + x1c] += u * (1.0 - ty) * tx;
                gi[static_cast<size_t>(y1c) * in_w + x0c] += u * ty * (1.0 - tx);
                gi[static_cast<size_t>(y1c) * in_w + x1c] += u * ty * tx;
            }
        }
    }
}

// Nearest-neighbour resize, same coordinate convention. No backward; used for
// label rasters where interpolation would invent values.
inline Grid resize_nearest(const Grid& in, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize_nearest: bad output size");
    Grid out(out_h, out_w);
    const double sy = static_cast<double>(in.h) / out_h;
    const double sx = static_cast<double>(in.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const int yy = std::clamp(static_cast<int>(std::lround((y + 0.5) * sy - 0.5)), 0, in.h - 1);
        for (int x = 0; x < out_w; ++x) {
            const int xx =
                std::clamp(static_cast<int>(std::lround((x + 0.5) * sx - 0.5)), 0, in.w - 1);
            out.at(y, x) = in.at(yy, xx);
        }
    }
    return out;
}

// Global average pooling: one mean per channel.
inline std::vector<double> global_avg_pool(const FeatureStack& in) {
    std::vector<double> out(in.c);
    const double cnt = static_cast<double>(in.plane());
    for (int ch = 0; ch < in.c; ++ch) {
        const double* src = in.channel(ch);
        double acc = 0.0;
        for (size_t i = 0; i < in.plane(); ++i) acc += src[i];
        out[ch] = acc / cnt;
    }
    return out;
}

inline void global_avg_pool_backward(const std::vector<double>& upstream, int c, int h, int w,
                                     FeatureStack* grad_in) {
    if (static_cast<int>(upstream.size()) != c)
        throw std::invalid_argument("global_avg_pool_backward: upstream length mismatch");
    *grad_in = FeatureStack(c, h, w);
    const double inv = 1.0 / (static_cast<double>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        double* gi = grad_in->channel(ch);
        const double u = upstream[ch] * inv;
        for (size_t i = 0; i < grad_in->plane(); ++i) gi[i] = u;
    }
}

// Numerically stable logistic sigmoid.
inline double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Grid sigmoid(const Grid& in) {
    Grid out(in.h, in.w);
    for (size_t i = 0; i < in.v.size(); ++i) out.v[i] = sigmoid_scalar(in.v[i]);
    return out;
}

// Backward from the saved output: ds/dx = s(1-s).
inline Grid sigmoid_backward(const Grid& output, const Grid& upstream) {
    if (!output.same_shape(upstream))
        throw std::invalid_argument("sigmoid_backward: shape mismatch");
    Grid g(output.h, output.w);
    for (size_t i = 0; i < g.v.size(); ++i) {
        const double s = output.v[i];
        g.v[i] = upstream.v[i] * s * (1.0 - s);
    }
    return g;
}

inline void check_same_shape(const Grid& a, const Grid& b, const char* who) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(who) + ": shape mismatch " + std::to_string(a.h) +
                                    "x" + std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                                    std::to_string(b.w));
}

inline double mse_loss(const Grid& pred, const Grid& target) {
    check_same_shape(pred, target, "mse_loss");
    double acc = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const double d = pred.v[i] - target.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.v.size());
}

inline Grid mse_loss_backward(const Grid& pred, const Grid& target) {
    check_same_shape(pred, target, "mse_loss_backward");
    Grid g(pred.h, pred.w);
    const double inv = 2.0 / static_cast<double>(pred.v.size());
    for (size_t i = 0; i < pred.v.size(); ++i) g.v[i] = inv * (pred.v[i] - target.v[i]);
    return g;
}

inline double l1_loss(const Grid& pred, const Grid& target) {
    check_same_shape(pred, target, "l1_loss");
    double acc = 0.0;
    for (size_t i = 0; i < pred.v.size(); ++i) acc += std::abs(pred.v[i] - target.v[i]);
    return acc / static_cast<double>(pred.v.size());
}

// Subgradient, 0 at exact ties (ties are routine with binary inputs).
inline Grid l1_loss_backward(const Grid& pred, const Grid& target) {
    check_same_shape(pred, target, "l1_loss_backward");
    Grid g(pred.h, pred.w);
    const double inv = 1.0 / static_cast<double>(pred.v.size());
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const double d = pred.v[i] - target.v[i];
        g.v[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    return g;
}

}  // namespace crowdloc
