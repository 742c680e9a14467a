#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdloc/checkpoint.hpp"
#include "crowdloc/eval.hpp"
#include "crowdloc/instances.hpp"
#include "crowdloc/io.hpp"
#include "crowdloc/model.hpp"
#include "crowdloc/png_io.hpp"
#include "crowdloc/rng.hpp"

namespace crowdloc {

struct Sample {
    std::string id;
    Grid image;
    Grid gmask;  // binarized instance map, the confidence target
    Annotation ann;
};

inline Sample load_sample(const std::filesystem::path& split_dir, const std::string& id) {
    Sample s;
    s.id = id;
    s.image = read_png_gray8((split_dir / "images" / (id + ".png")).string());
    s.ann = read_annotation((split_dir / "anns" / (id + ".json")).string());
    const LabelMap gt = read_png_gray16((split_dir / "gt" / (id + ".png")).string());
    if (gt.h != s.image.h || gt.w != s.image.w)
        throw std::runtime_error("load_sample: image/label size mismatch for id " + id);
    s.gmask = gt.binarized();
    return s;
}

inline std::vector<Sample> load_split(const std::string& split_dir) {
    const std::filesystem::path base(split_dir);
    std::vector<Sample> out;
    for (const std::string& id : read_manifest((base / "manifest.txt").string()))
        out.push_back(load_sample(base, id));
    return out;
}

inline std::vector<GtPoint> gt_points(const Annotation& ann, double default_sigma = 15.0) {
    std::vector<GtPoint> gts;
    const bool per_box = ann.boxes.size() == ann.points.size();
    for (size_t i = 0; i < ann.points.size(); ++i)
        gts.push_back({ann.points[i].first, ann.points[i].second,
                       per_box ? ann.boxes[i].sigma_l() : default_sigma});
    return gts;
}

// ---- inference ----

struct Prediction {
    Grid conf;
    ThresholdField thr;
    Grid bin;
};

// fixed_override >= 0 replaces the model's threshold path with that constant.
inline Prediction predict(const Grid& img, const ModelState& m, double fixed_override = -1.0) {
    Prediction p;
    CpCache cache;
    p.conf = cp_forward(img, m.cp, &cache);
    TeMode mode = fixed_override >= 0.0 ? TeMode::Fixed : m.te.mode;
    switch (mode) {
        case TeMode::Fixed:
            p.thr = ThresholdField::make_scalar(fixed_override >= 0.0 ? fixed_override
                                                                      : m.te.fixed_t);
            break;
        case TeMode::Ibm:
            p.thr = ThresholdField::make_scalar(
                ibm_forward(mask_channels(cache.a3, p.conf), m.te.ibm, nullptr));
            break;
        case TeMode::Pbm:
            p.thr = ThresholdField::make_pixel(
                pbm_forward(mask_channels(cache.a3, p.conf), m.te.pbm, nullptr));
            break;
    }
    p.bin = binarize_forward(p.conf, p.thr, nullptr);
    return p;
}

inline LocalizationResult localize_image(const Grid& img, const ModelState& m, int min_area = 3,
                                         const std::string& id = {},
                                         double fixed_override = -1.0) {
    return localize(predict(img, m, fixed_override).bin, min_area, id);
}

struct ImageEval {
    std::string id;
    LocalizationResult loc;
    MatchReport match;
    int gt_count = 0;
};

struct EvalResult {
    MetricsReport metrics;
    std::vector<ImageEval> images;
};

inline EvalResult evaluate_dataset(const std::vector<Sample>& samples, const ModelState& m,
                                   int min_area = 3, double fixed_override = -1.0) {
    EvalResult out;
    std::vector<MatchReport> reports;
    std::vector<std::pair<double, double>> counts;
    for (const Sample& s : samples) {
        ImageEval ie;
        ie.id = s.id;
        ie.loc = localize_image(s.image, m, min_area, s.id, fixed_override);
        const std::vector<GtPoint> gts = gt_points(s.ann);
        std::vector<std::pair<double, double>> centers;
        for (const Instance& inst : ie.loc.instances) centers.push_back({inst.cx, inst.cy});
        ie.match = match_instances(centers, gts);
        ie.gt_count = static_cast<int>(gts.size());
        reports.push_back(ie.match);
        counts.push_back({static_cast<double>(ie.loc.count()), static_cast<double>(gts.size())});
        out.images.push_back(std::move(ie));
    }
    out.metrics.loc = localization_scores(reports);
    out.metrics.cnt = counting_errors(counts);
    out.metrics.images = static_cast<int>(samples.size());
    return out;
}

// ---- augmentation ----

namespace detail {

inline Grid flip_lr(const Grid& g) {
    Grid out(g.h, g.w);
    for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) out.at(y, x) = g.at(y, g.w - 1 - x);
    return out;
}

// Crops or zero-pads around the center to the requested size.
inline Grid center_fit(const Grid& g, int H, int W) {
    Grid out(H, W, 0.0);
    const int oy = (g.h - H) / 2;
    const int ox = (g.w - W) / 2;
    for (int y = 0; y < H; ++y) {
        const int sy = y + oy;
        if (sy < 0 || sy >= g.h) continue;
        for (int x = 0; x < W; ++x) {
            const int sx = x + ox;
            if (sx < 0 || sx >= g.w) continue;
            out.at(y, x) = g.at(sy, sx);
        }
    }
    return out;
}

}  // namespace detail

// Horizontal flip plus mild scale jitter; the mask is resampled nearest so it
// stays strictly binary.
inline void augment_sample(Grid& img, Grid& mask, Rng& rng) {
    if (rng.bernoulli(0.5)) {
        img = detail::flip_lr(img);
        mask = detail::flip_lr(mask);
    }
    const double s = rng.uniform(0.8, 1.2);
    const int nh = std::max(8, static_cast<int>(std::lround(img.h * s)));
    const int nw = std::max(8, static_cast<int>(std::lround(img.w * s)));
    if (nh == img.h && nw == img.w) return;
    const int H = img.h, W = img.w;
    img = detail::center_fit(to_grid(resize_bilinear(to_stack(img), nh, nw)), H, W);
    mask = detail::center_fit(resize_nearest(mask, nh, nw), H, W);
}

// ---- training ----

struct TrainConfig {
    int epochs = 10;
    int batch = 4;
    OptimizerConfig opt;
    double lambda = 1.0;
    uint64_t seed = 1;
    bool augment = true;
    int min_area = 3;
    // Epochs during which the threshold encoder holds still. Until the
    // predictor leaves its near-zero init, every foreground pixel is a miss
    // and the binary term drags thresholds into floor saturation they cannot
    // leave; freezing the encoder briefly lets it learn on a live landscape.
    int thr_warmup = 0;

    void validate() const {
        if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be positive");
        if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be positive");
        if (lambda < 0.0) throw std::invalid_argument("TrainConfig: lambda must be >= 0");
        if (thr_warmup < 0) throw std::invalid_argument("TrainConfig: thr_warmup must be >= 0");
        opt.validate();
    }
};

struct EpochLog {
    int epoch = 0;
    double loss = 0.0;
    LocScores val;
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    double best_f1 = -1.0;
    int best_epoch = 0;
};

// One sample's forward/backward. Returns its (unweighted) loss; gradients are
// scaled by inv_batch and accumulated. The feature stack enters the threshold
// encoder as a value only: no gradient flows from the encoder into the
// predictor except the straight-through term, and that only when routed.
inline double accumulate_sample(const Grid& img, const Grid& gmask, const ModelState& m,
                                double lambda, double inv_batch, ModelGrads& grads) {
    CpCache cache;
    const Grid conf = cp_forward(img, m.cp, &cache);
    double loss = mse_loss(conf, gmask);
    Grid d_conf = mse_loss_backward(conf, gmask);
    for (auto& v : d_conf.v) v *= inv_batch;
    if (lambda > 0.0) {
        const FeatureStack masked = mask_channels(cache.a3, conf);
        BmTape tape;
        const Grid bin = bm_apply(conf, masked, m.te, &tape);
        loss += lambda * l1_loss(bin, gmask);
        Grid d_bin = l1_loss_backward(bin, gmask);
        for (auto& v : d_bin.v) v *= lambda * inv_batch;
        const Grid d_conf_st = bm_backward(tape, m.te, d_bin, &grads.te);
        if (m.routing == Routing::TeAndCp)
            for (size_t i = 0; i < d_conf.v.size(); ++i) d_conf.v[i] += d_conf_st.v[i];
    }
    cp_backward(cache, m.cp, d_conf, &grads.cp);
    return loss;
}

// Full training loop: shuffled minibatches with gradient accumulation, one
// optimizer step per batch, per-epoch rate decay, validation scoring after
// every epoch. On return the model holds the weights of the best validation
// F1 epoch (the final ones if no validation set was given).
inline TrainLog train(ModelState& m, const std::vector<Sample>& train_set,
                      const std::vector<Sample>& val_set, const TrainConfig& cfg,
                      const std::function<void(const EpochLog&)>& on_epoch = {}) {
    cfg.validate();
    if (train_set.empty()) throw std::invalid_argument("train: empty training set");
    for (const Sample& s : train_set)
        if (s.image.h != s.gmask.h || s.image.w != s.gmask.w)
            throw std::invalid_argument("train: image/mask size mismatch for id " + s.id);

    ModelGrads grads = zero_grads(m);
    std::vector<ParamRef> refs = register_params(m, grads);
    Rng rng(cfg.seed);
    TrainLog log;
    CpParams best_cp = m.cp;
    TeState best_te = m.te;
    long step = 0;

    const int n = static_cast<int>(train_set.size());
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(0, i)]);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int start = 0; start < n; start += cfg.batch) {
            const int bsz = std::min(cfg.batch, n - start);
            const double inv = 1.0 / bsz;
            zero_grads(refs);
            double batch_loss = 0.0;
            for (int k = 0; k < bsz; ++k) {
                const Sample& s = train_set[perm[start + k]];
                Grid img = s.image, mask = s.gmask;
                if (cfg.augment) augment_sample(img, mask, rng);
                batch_loss += inv * accumulate_sample(img, mask, m, cfg.lambda, inv, grads);
            }
            ++step;
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("train: non-finite loss at step " + std::to_string(step));
            if (epoch <= cfg.thr_warmup)
                for (const ParamRef& p : refs)
                    if (p.group == ParamGroup::Threshold) std::fill_n(p.grad, p.n, 0.0);
            adam_step(refs, m.adam, cfg.opt);
            epoch_loss += batch_loss;
            ++batches;
        }
        m.adam.lr_scale *= cfg.opt.decay;
        m.epoch = epoch;

        EpochLog el;
        el.epoch = epoch;
        el.loss = epoch_loss / batches;
        if (!val_set.empty()) {
            const EvalResult er = evaluate_dataset(val_set, m, cfg.min_area);
            el.val = er.metrics.loc;
            if (el.val.f1 >= log.best_f1) {
                log.best_f1 = el.val.f1;
                log.best_epoch = epoch;
                best_cp = m.cp;
                best_te = m.te;
            }
        }
        log.epochs.push_back(el);
        if (on_epoch) on_epoch(el);
    }
    if (!val_set.empty()) {
        m.cp = best_cp;
        m.te = best_te;
    } else {
        log.best_epoch = cfg.epochs;
    }
    return log;
}

}  // namespace crowdloc
