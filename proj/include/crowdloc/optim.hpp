#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace crowdloc {

// Which learning rate a parameter tensor follows.
enum class ParamGroup { Confidence, Threshold, Layer };

struct OptimizerConfig {
    double lr_confidence = 1e-3;  // predictor tensors
    double lr_threshold = 1e-2;   // threshold-encoder tensors
    double lr_layer = 1e-2;       // learnable scalar threshold
    double decay = 0.99;          // per-epoch multiplier on all rates
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (!(lr_confidence > 0.0) || !(lr_threshold > 0.0) || !(lr_layer > 0.0))
            throw std::invalid_argument("OptimizerConfig: learning rates must be positive");
        if (!(decay > 0.0) || decay > 1.0)
            throw std::invalid_argument("OptimizerConfig: decay must be in (0,1]");
    }

    double rate(ParamGroup g) const {
        switch (g) {
            case ParamGroup::Confidence: return lr_confidence;
            case ParamGroup::Threshold: return lr_threshold;
            default: return lr_layer;
        }
    }
};

// Non-owning view of one named parameter tensor and its gradient buffer.
struct ParamRef {
    std::string name;
    double* value = nullptr;
    double* grad = nullptr;
    size_t n = 0;
    ParamGroup group = ParamGroup::Confidence;
};

// First/second moment buffers per parameter, keyed by name so the state
// survives serialization independent of registration order.
struct AdamState {
    struct Slot {
        std::vector<double> m, v;
    };
    std::map<std::string, Slot> slots;
    long step = 0;        // completed update count
    double lr_scale = 1.0;  // product of per-epoch decays applied so far

    Slot& slot_for(const ParamRef& p) {
        Slot& s = slots[p.name];
        if (s.m.empty()) {
            s.m.assign(p.n, 0.0);
            s.v.assign(p.n, 0.0);
        } else if (s.m.size() != p.n) {
            throw std::invalid_argument("AdamState: stored moments for '" + p.name +
                                        "' have size " + std::to_string(s.m.size()) +
                                        ", parameter has " + std::to_string(p.n));
        }
        return s;
    }
};

// One bias-corrected Adam update over all registered tensors. Gradients are
// validated first so a non-finite value never half-applies a step.
inline void adam_step(const std::vector<ParamRef>& params, AdamState& state,
                      const OptimizerConfig& cfg) {
    cfg.validate();
    for (const ParamRef& p : params)
        for (size_t i = 0; i < p.n; ++i)
            if (!std::isfinite(p.grad[i]))
                throw std::runtime_error("adam_step: non-finite gradient in '" + p.name + "'");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (const ParamRef& p : params) {
        AdamState::Slot& s = state.slot_for(p);
        const double lr = cfg.rate(p.group) * state.lr_scale;
        for (size_t i = 0; i < p.n; ++i) {
            const double g = p.grad[i];
            s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * g;
            s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = s.m[i] / bc1;
            const double vhat = s.v[i] / bc2;
            p.value[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

inline void zero_grads(const std::vector<ParamRef>& params) {
    for (const ParamRef& p : params)
        for (size_t i = 0; i < p.n; ++i) p.grad[i] = 0.0;
}

}  // namespace crowdloc
