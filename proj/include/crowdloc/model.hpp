#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdloc/binarize.hpp"
#include "crowdloc/grid.hpp"
#include "crowdloc/layers.hpp"
#include "crowdloc/optim.hpp"
#include "crowdloc/rng.hpp"
#include "crowdloc/threshold.hpp"

namespace crowdloc {

// Confidence predictor: four 3x3 conv layers at full resolution. The first
// three carry PReLU and the third's activations double as the feature stack
// handed to the threshold encoder; the last maps to one channel through a
// logistic sigmoid.
struct CpParams {
    ConvParams c1, c2, c3, c4;

    static CpParams init(int width, Rng& rng) {
        if (width < 1) throw std::invalid_argument("CpParams: width must be positive");
        CpParams p;
        auto he = [&rng](ConvParams& c, int oc, int ic, int k) {
            c = ConvParams(oc, ic, k, k);
            const double sd = std::sqrt(2.0 / (ic * k * k));
            for (auto& w : c.weight) w = rng.normal(0.0, sd);
        };
        he(p.c1, width, 1, 3);
        he(p.c2, width, width, 3);
        he(p.c3, width, width, 3);
        he(p.c4, 1, width, 3);
        // Start the output near the foreground prior; a sigmoid driven to fit a
        // rare-positive mean from 0.5 overshoots into saturation it cannot leave.
        p.c4.bias[0] = -2.5;
        return p;
    }

    CpParams zeros_like() const {
        CpParams g;
        g.c1 = c1.zeros_like();
        g.c2 = c2.zeros_like();
        g.c3 = c3.zeros_like();
        g.c4 = c4.zeros_like();
        return g;
    }

    int width() const { return c1.out_ch; }
};

struct CpCache {
    FeatureStack x, z1, a1, z2, a2, z3, a3, z4;
    Grid conf;
};

inline Grid cp_forward(const Grid& img, const CpParams& p, CpCache* cache = nullptr) {
    CpCache local;
    CpCache& c = cache ? *cache : local;
    c.x = to_stack(img);
    for (auto& v : c.x.v) v = 2.0 * v - 1.0;  // center so the DC level sits in biases
    c.z1 = conv2d(c.x, p.c1, 1);
    c.a1 = prelu(c.z1, p.c1.prelu_slope);
    c.z2 = conv2d(c.a1, p.c2, 1);
    c.a2 = prelu(c.z2, p.c2.prelu_slope);
    c.z3 = conv2d(c.a2, p.c3, 1);
    c.a3 = prelu(c.z3, p.c3.prelu_slope);
    c.z4 = conv2d(c.a3, p.c4, 1);
    c.conf = sigmoid(to_grid(c.z4));
    return c.conf;
}

// grad_p accumulates; d_conf is the upstream on the sigmoid output.
inline void cp_backward(const CpCache& c, const CpParams& p, const Grid& d_conf,
                        CpParams* grad_p) {
    const Grid d_sig = sigmoid_backward(c.conf, d_conf);
    const FeatureStack d_z4 = to_stack(d_sig);
    FeatureStack d_a3;
    conv2d_backward(c.a3, p.c4, 1, d_z4, &d_a3, &grad_p->c4);
    FeatureStack d_z3;
    prelu_backward(c.z3, p.c3.prelu_slope, d_a3, &d_z3, &grad_p->c3.prelu_slope);
    FeatureStack d_a2;
    conv2d_backward(c.a2, p.c3, 1, d_z3, &d_a2, &grad_p->c3);
    FeatureStack d_z2;
    prelu_backward(c.z2, p.c2.prelu_slope, d_a2, &d_z2, &grad_p->c2.prelu_slope);
    FeatureStack d_a1;
    conv2d_backward(c.a1, p.c2, 1, d_z2, &d_a1, &grad_p->c2);
    FeatureStack d_z1;
    prelu_backward(c.z1, p.c1.prelu_slope, d_a1, &d_z1, &grad_p->c1.prelu_slope);
    conv2d_backward(c.x, p.c1, 1, d_z1, nullptr, &grad_p->c1);
}

enum class Routing { TeOnly, TeAndCp };

struct ModelState {
    CpParams cp;
    TeState te;
    Routing routing = Routing::TeAndCp;
    AdamState adam;
    int epoch = 0;
};

inline ModelState init_model(TeMode mode, Routing routing, double fixed_t, int width,
                             int pbm_width, uint64_t seed) {
    Rng rng(seed);
    ModelState m;
    m.cp = CpParams::init(width, rng);
    m.te.mode = mode;
    m.te.fixed_t = fixed_t;
    if (mode == TeMode::Ibm) m.te.ibm = IbmParams::init(width, rng);
    if (mode == TeMode::Pbm) m.te.pbm = PbmParams::init(width, pbm_width, rng);
    m.routing = routing;
    return m;
}

struct ModelGrads {
    CpParams cp;
    TeGrads te;
};

inline ModelGrads zero_grads(const ModelState& m) {
    ModelGrads g;
    g.cp = m.cp.zeros_like();
    g.te = m.te.zero_grads();
    return g;
}

namespace detail {

inline void push_conv(std::vector<ParamRef>& out, const std::string& stem, ConvParams& p,
                      ConvParams& g, ParamGroup group, bool with_slope) {
    out.push_back({stem + ".weight", p.weight.data(), g.weight.data(), p.weight.size(), group});
    out.push_back({stem + ".bias", p.bias.data(), g.bias.data(), p.bias.size(), group});
    if (with_slope) out.push_back({stem + ".slope", &p.prelu_slope, &g.prelu_slope, 1, group});
}

}  // namespace detail

// Stable name -> storage map shared by the optimizer and the checkpoint
// format. The grads struct must outlive the refs.
inline std::vector<ParamRef> register_params(ModelState& m, ModelGrads& g) {
    std::vector<ParamRef> refs;
    detail::push_conv(refs, "cp.conv1", m.cp.c1, g.cp.c1, ParamGroup::Confidence, true);
    detail::push_conv(refs, "cp.conv2", m.cp.c2, g.cp.c2, ParamGroup::Confidence, true);
    detail::push_conv(refs, "cp.conv3", m.cp.c3, g.cp.c3, ParamGroup::Confidence, true);
    detail::push_conv(refs, "cp.conv4", m.cp.c4, g.cp.c4, ParamGroup::Confidence, false);
    if (m.te.mode == TeMode::Ibm) {
        detail::push_conv(refs, "te.proj", m.te.ibm.proj, g.te.ibm.proj, ParamGroup::Threshold,
                          false);
    } else if (m.te.mode == TeMode::Pbm) {
        detail::push_conv(refs, "te.conv1", m.te.pbm.c1, g.te.pbm.c1, ParamGroup::Threshold, true);
        detail::push_conv(refs, "te.conv2", m.te.pbm.c2, g.te.pbm.c2, ParamGroup::Threshold, true);
        detail::push_conv(refs, "te.conv3", m.te.pbm.c3, g.te.pbm.c3, ParamGroup::Threshold, true);
        detail::push_conv(refs, "te.proj", m.te.pbm.proj, g.te.pbm.proj, ParamGroup::Threshold,
                          false);
    }
    return refs;
}

}  // namespace crowdloc
