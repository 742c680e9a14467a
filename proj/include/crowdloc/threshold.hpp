#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

#include "crowdloc/binarize.hpp"
#include "crowdloc/grid.hpp"
#include "crowdloc/layers.hpp"
#include "crowdloc/rng.hpp"

// Threshold encoders. Both take the confidence-masked feature stack, already
// detached by the caller (their backward never emits a gradient toward the
// input), and produce a threshold field squashed into (0.2, 0.7).
//
// IBM: conv1x1 -> GAP -> compressed sigmoid, one scalar per image.
// PBM: at 1/8 scale, three 3x3 conv+PReLU, avgpool15, conv1x1, avgpool15,
//      compressed sigmoid, then bilinear upsample back to full size.

namespace crowdloc {

inline int eighth(int n) { return std::max(1, (n + 4) / 8); }

struct IbmParams {
    ConvParams proj;  // 1x1, C -> 1

    static IbmParams init(int in_ch, Rng& rng) {
        IbmParams p;
        p.proj = ConvParams(1, in_ch, 1, 1);
        const double scale = 0.3 / std::sqrt(static_cast<double>(in_ch));
        for (auto& w : p.proj.weight) w = rng.uniform(-scale, scale);
        // zero bias puts the initial threshold at f(0) = 0.5333
        return p;
    }

    IbmParams zeros_like() const {
        IbmParams g;
        g.proj = proj.zeros_like();
        return g;
    }
};

struct IbmCache {
    FeatureStack input;
    FeatureStack proj_out;
    double pre = 0.0;  // GAP output
    double thr = 0.0;
};

inline double ibm_forward(const FeatureStack& x, const IbmParams& p, IbmCache* cache) {
    FeatureStack proj = conv2d(x, p.proj, 0);
    const double pre = global_avg_pool(proj)[0];
    const double thr = compressed_sigmoid_scalar(pre);
    if (cache) {
        cache->input = x;
        cache->proj_out = std::move(proj);
        cache->pre = pre;
        cache->thr = thr;
    }
    return thr;
}

inline void ibm_backward(const IbmCache& cache, const IbmParams& p, double d_thr,
                         IbmParams* grad) {
    const double d_pre = d_thr * compressed_sigmoid_deriv(cache.thr);
    FeatureStack d_proj;
    global_avg_pool_backward({d_pre}, 1, cache.proj_out.h, cache.proj_out.w, &d_proj);
    conv2d_backward(cache.input, p.proj, 0, d_proj, nullptr, &grad->proj);
}

struct PbmParams {
    ConvParams c1, c2, c3;  // 3x3 + PReLU
    ConvParams proj;        // 1x1 -> 1

    static PbmParams init(int in_ch, int width, Rng& rng) {
        PbmParams p;
        p.c1 = ConvParams(width, in_ch, 3, 3);
        p.c2 = ConvParams(width, width, 3, 3);
        p.c3 = ConvParams(width, width, 3, 3);
        p.proj = ConvParams(1, width, 1, 1);
        for (ConvParams* c : {&p.c1, &p.c2, &p.c3, &p.proj}) {
            const double scale = std::sqrt(2.0 / (static_cast<double>(c->in_ch) * c->kh * c->kw));
            for (auto& w : c->weight) w = rng.normal(0.0, scale);
        }
        // zero proj bias -> initial field near f(0) = 0.5333
        return p;
    }

    PbmParams zeros_like() const {
        PbmParams g;
        g.c1 = c1.zeros_like();
        g.c2 = c2.zeros_like();
        g.c3 = c3.zeros_like();
        g.proj = proj.zeros_like();
        return g;
    }
};

struct PbmCache {
    FeatureStack x8;            // input resized to 1/8
    FeatureStack z1, a1, z2, a2, z3, a3;
    FeatureStack pool1, z4, pool2;
    Grid sig8;                  // compressed sigmoid output at 1/8 scale
    int out_h = 0, out_w = 0;
};

inline Grid pbm_forward(const FeatureStack& x, const PbmParams& p, PbmCache* cache) {
    PbmCache local;
    PbmCache& c = cache ? *cache : local;
    c.out_h = x.h;
    c.out_w = x.w;
    c.x8 = resize_bilinear(x, eighth(x.h), eighth(x.w));
    c.z1 = conv2d(c.x8, p.c1, 1);
    c.a1 = prelu(c.z1, p.c1.prelu_slope);
    c.z2 = conv2d(c.a1, p.c2, 1);
    c.a2 = prelu(c.z2, p.c2.prelu_slope);
    c.z3 = conv2d(c.a2, p.c3, 1);
    c.a3 = prelu(c.z3, p.c3.prelu_slope);
    c.pool1 = avgpool_box(c.a3, 15);
    c.z4 = conv2d(c.pool1, p.proj, 0);
    c.pool2 = avgpool_box(c.z4, 15);
    c.sig8 = compressed_sigmoid(to_grid(c.pool2));
    FeatureStack up = resize_bilinear(to_stack(c.sig8), x.h, x.w);
    return to_grid(up);
}

inline void pbm_backward(const PbmCache& c, const PbmParams& p, const Grid& d_thr,
                         PbmParams* grad) {
    if (d_thr.h != c.out_h || d_thr.w != c.out_w)
        throw std::invalid_argument("pbm_backward: upstream shape mismatch");
    FeatureStack d_sig8;
    resize_bilinear_backward(c.sig8.h, c.sig8.w, to_stack(d_thr), &d_sig8);
    Grid d_pool2 = compressed_sigmoid_backward(c.sig8, to_grid(d_sig8));
    FeatureStack d_z4;
    avgpool_box_backward(15, to_stack(d_pool2), &d_z4);
    FeatureStack d_pool1;
    conv2d_backward(c.pool1, p.proj, 0, d_z4, &d_pool1, &grad->proj);
    FeatureStack d_a3;
    avgpool_box_backward(15, d_pool1, &d_a3);
    FeatureStack d_z3;
    prelu_backward(c.z3, p.c3.prelu_slope, d_a3, &d_z3, &grad->c3.prelu_slope);
    FeatureStack d_a2;
    conv2d_backward(c.a2, p.c3, 1, d_z3, &d_a2, &grad->c3);
    FeatureStack d_z2;
    prelu_backward(c.z2, p.c2.prelu_slope, d_a2, &d_z2, &grad->c2.prelu_slope);
    FeatureStack d_a1;
    conv2d_backward(c.a1, p.c2, 1, d_z2, &d_a1, &grad->c2);
    FeatureStack d_z1;
    prelu_backward(c.z1, p.c1.prelu_slope, d_a1, &d_z1, &grad->c1.prelu_slope);
    conv2d_backward(c.x8, p.c1, 1, d_z1, nullptr, &grad->c1);
}

// One threshold-encoder instance, either flavor.
enum class TeMode { Fixed, Ibm, Pbm };

struct TeGrads;

struct TeState {
    TeMode mode = TeMode::Fixed;
    double fixed_t = 0.5;
    IbmParams ibm;
    PbmParams pbm;

    TeGrads zero_grads() const;
};

struct BmTape {
    BinarizeTape bin;
    TeMode mode = TeMode::Fixed;
    IbmCache ibm;
    PbmCache pbm;
};

// Threshold-encoder forward + binarization in one step. `masked` is the
// detached (confidence x features) stack; unused in fixed mode.
inline Grid bm_apply(const Grid& conf, const FeatureStack& masked, const TeState& te,
                     BmTape* tape) {
    ThresholdField thr;
    switch (te.mode) {
        case TeMode::Fixed:
            thr = ThresholdField::make_scalar(te.fixed_t);
            break;
        case TeMode::Ibm:
            thr = ThresholdField::make_scalar(
                ibm_forward(masked, te.ibm, tape ? &tape->ibm : nullptr));
            break;
        case TeMode::Pbm:
            if (masked.h != conf.h || masked.w != conf.w)
                throw std::invalid_argument("bm_apply: feature/confidence spatial mismatch");
            thr = ThresholdField::make_pixel(pbm_forward(masked, te.pbm, tape ? &tape->pbm : nullptr));
            break;
    }
    if (tape) tape->mode = te.mode;
    return binarize_forward(conf, thr, tape ? &tape->bin : nullptr);
}

struct TeGrads {
    IbmParams ibm;
    PbmParams pbm;
};

inline TeGrads TeState::zero_grads() const {
    TeGrads g;
    if (mode == TeMode::Ibm) g.ibm = ibm.zeros_like();
    if (mode == TeMode::Pbm) g.pbm = pbm.zeros_like();
    return g;
}

// Routes the loss gradient on the binary map back to the encoder parameters
// and returns the straight-through gradient toward the confidence map. Fixed
// mode has no parameters, so only the pass-through survives.
inline Grid bm_backward(const BmTape& tape, const TeState& te, const Grid& upstream,
                        TeGrads* grads) {
    BinarizeGrads bg = binarize_backward(tape.bin, upstream);
    if (grads) {
        switch (tape.mode) {
            case TeMode::Fixed:
                break;
            case TeMode::Ibm:
                ibm_backward(tape.ibm, te.ibm, bg.grad_scalar, &grads->ibm);
                break;
            case TeMode::Pbm:
                pbm_backward(tape.pbm, te.pbm, bg.grad_map, &grads->pbm);
                break;
        }
    }
    return bg.grad_conf;
}

}  // namespace crowdloc
