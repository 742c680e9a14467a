#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "crowdloc/grid.hpp"

// Hard binarization with a relaxed backward. Forward compares confidence
// against a scalar or per-pixel threshold; backward pretends the comparison
// had slope +1 toward the confidence and -1 toward the threshold, which is
// what lets both sides train against each other.

namespace crowdloc {

enum class ThrMode { Scalar, Pixel };

struct ThresholdField {
    ThrMode mode = ThrMode::Scalar;
    double scalar = 0.5;
    Grid map;  // pixel mode only

    static ThresholdField make_scalar(double t) {
        ThresholdField f;
        f.mode = ThrMode::Scalar;
        f.scalar = t;
        return f;
    }
    static ThresholdField make_pixel(Grid m) {
        ThresholdField f;
        f.mode = ThrMode::Pixel;
        f.map = std::move(m);
        return f;
    }
};

struct BinarizeTape {
    int h = 0, w = 0;
    ThrMode mode = ThrMode::Scalar;
};

struct BinarizeGrads {
    Grid grad_conf;
    double grad_scalar = 0.0;  // scalar mode
    Grid grad_map;             // pixel mode
};

// O(i,j) = 1 iff conf(i,j) >= threshold, ties included.
inline Grid binarize_forward(const Grid& conf, const ThresholdField& thr, BinarizeTape* tape) {
    if (thr.mode == ThrMode::Pixel && !conf.same_shape(thr.map))
        throw std::invalid_argument("binarize_forward: threshold map " + std::to_string(thr.map.h) +
                                    "x" + std::to_string(thr.map.w) + " vs confidence " +
                                    std::to_string(conf.h) + "x" + std::to_string(conf.w));
    Grid out(conf.h, conf.w);
    if (thr.mode == ThrMode::Scalar) {
        for (size_t i = 0; i < conf.v.size(); ++i) out.v[i] = conf.v[i] >= thr.scalar ? 1.0 : 0.0;
    } else {
        for (size_t i = 0; i < conf.v.size(); ++i)
            out.v[i] = conf.v[i] >= thr.map.v[i] ? 1.0 : 0.0;
    }
    if (tape) *tape = BinarizeTape{conf.h, conf.w, thr.mode};
    return out;
}

// grad_conf = +upstream (straight-through); grad_threshold = -upstream, summed
// in scalar mode. Raising a threshold can only erase foreground, so its
// gradient opposes the confidence gradient pixel for pixel.
inline BinarizeGrads binarize_backward(const BinarizeTape& tape, const Grid& upstream) {
    if (upstream.h != tape.h || upstream.w != tape.w)
        throw std::invalid_argument("binarize_backward: upstream " + std::to_string(upstream.h) +
                                    "x" + std::to_string(upstream.w) + " vs recorded " +
                                    std::to_string(tape.h) + "x" + std::to_string(tape.w));
    BinarizeGrads g;
    g.grad_conf = upstream;
    if (tape.mode == ThrMode::Scalar) {
        double acc = 0.0;
        for (double u : upstream.v) acc += u;
        g.grad_scalar = -acc;
    } else {
        g.grad_map = Grid(upstream.h, upstream.w);
        for (size_t i = 0; i < upstream.v.size(); ++i) g.grad_map.v[i] = -upstream.v[i];
    }
    return g;
}

// f(x) = 1/(2 + e^{-x}) + 0.2, squashing into (0.2, 0.7). Both branches avoid
// overflowing exp; the nextafter guards keep the output strictly inside the
// band even when exp underflows, so downstream range checks never see the
// asymptote values themselves.
inline double compressed_sigmoid_scalar(double x) {
    double f;
    if (x >= 0.0) {
        f = 1.0 / (2.0 + std::exp(-x)) + 0.2;
    } else {
        const double e = std::exp(x);
        f = e / (2.0 * e + 1.0) + 0.2;
    }
    if (f >= 0.7) f = std::nextafter(0.7, 0.0);
    if (f <= 0.2) f = std::nextafter(0.2, 1.0);
    return f;
}

// Derivative from the saved output: with s = f - 0.2 = 1/(2+e^{-x}),
// f'(x) = e^{-x}/(2+e^{-x})^2 = s(1 - 2s). Clamped to stay positive where the
// true value underflows.
inline double compressed_sigmoid_deriv(double output) {
    const double s = output - 0.2;
    double d = s * (1.0 - 2.0 * s);
    if (d <= 0.0) d = std::numeric_limits<double>::denorm_min();
    return d;
}

inline Grid compressed_sigmoid(const Grid& x) {
    Grid out(x.h, x.w);
    for (size_t i = 0; i < x.v.size(); ++i) out.v[i] = compressed_sigmoid_scalar(x.v[i]);
    return out;
}

inline Grid compressed_sigmoid_backward(const Grid& output, const Grid& upstream) {
    if (!output.same_shape(upstream))
        throw std::invalid_argument("compressed_sigmoid_backward: shape mismatch");
    Grid g(output.h, output.w);
    for (size_t i = 0; i < g.v.size(); ++i)
        g.v[i] = upstream.v[i] * compressed_sigmoid_deriv(output.v[i]);
    return g;
}

}  // namespace crowdloc
