#pragma once

#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "crowdloc/checkpoint.hpp"
#include "crowdloc/render.hpp"
#include "crowdloc/scene.hpp"
#include "crowdloc/train.hpp"

namespace crowdloc {

namespace detail {

inline TeMode parse_mode(const std::string& s) {
    if (s == "fixed") return TeMode::Fixed;
    if (s == "ibm") return TeMode::Ibm;
    if (s == "pbm") return TeMode::Pbm;
    throw std::runtime_error("unknown threshold mode '" + s + "' (fixed|ibm|pbm)");
}

inline Routing parse_routing(const std::string& s) {
    if (s == "te-only") return Routing::TeOnly;
    if (s == "te-and-cp") return Routing::TeAndCp;
    throw std::runtime_error("unknown routing '" + s + "' (te-only|te-and-cp)");
}

inline std::string epoch_line(const EpochLog& el) {
    std::ostringstream os;
    os << "epoch " << el.epoch << " loss " << el.loss << " val_f1 " << el.val.f1 << " pre "
       << el.val.pre << " rec " << el.val.rec;
    return os.str();
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv) {
    CLI::App app{"independent-instance-map crowd localization"};
    app.set_config("--config", "", "key=value configuration file; flags override it");
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    DatasetSpec dspec;
    std::string synth_out = "data";
    uint64_t synth_seed = 1;
    synth->add_option("--out", synth_out, "output directory");
    synth->add_option("--seed", synth_seed, "dataset seed");
    synth->add_option("--train", dspec.n_train, "training images");
    synth->add_option("--val", dspec.n_val, "validation images");
    synth->add_option("--test", dspec.n_test, "test images");
    synth->add_option("--size", dspec.scene.width, "square image side")
        ->check(CLI::Range(16, 256));
    synth->add_option("--heads-min", dspec.scene.heads_min, "minimum heads per scene");
    synth->add_option("--heads-max", dspec.scene.heads_max, "maximum heads per scene");
    synth->add_option("--negative-frac", dspec.negative_frac, "fraction of scenes with no heads");
    synth->callback([&] {
        dspec.scene.height = dspec.scene.width;
        synth_dataset(dspec, synth_out, synth_seed);
        std::cout << "wrote " << dspec.n_train << "+" << dspec.n_val << "+" << dspec.n_test
                  << " scenes to " << synth_out << "\n";
    });

    // genlabels
    auto* gen = app.add_subcommand("genlabels", "instance label map from an annotation file");
    std::string gen_ann, gen_out = "labels.png", gen_mode = "auto";
    int gen_w = 0, gen_h = 0;
    gen->add_option("--ann", gen_ann, "annotation json")->required();
    gen->add_option("--width", gen_w, "map width")->required();
    gen->add_option("--height", gen_h, "map height")->required();
    gen->add_option("--out", gen_out, "output label map (16-bit png)");
    gen->add_option("--mode", gen_mode, "boxes|points|auto");
    gen->callback([&] {
        const Annotation ann = read_annotation(gen_ann);
        std::string mode = gen_mode;
        if (mode == "auto") mode = ann.boxes.empty() ? "points" : "boxes";
        LabelMap map;
        if (mode == "boxes")
            map = iim_from_boxes(ann, gen_w, gen_h);
        else if (mode == "points")
            map = iim_from_points(ann, gen_w, gen_h);
        else
            throw std::runtime_error("unknown label mode '" + gen_mode + "' (boxes|points|auto)");
        write_png_gray16(gen_out, map);
        write_text(gen_out + ".txt", std::to_string(map.count) + "\n");
        std::cout << map.count << " instances -> " << gen_out << "\n";
    });

    // train
    auto* tr = app.add_subcommand("train", "train a model on a synthesized dataset");
    std::string tr_data = "data", tr_mode = "pbm", tr_routing = "te-and-cp";
    std::string tr_out = "model.ckpt", tr_log;
    TrainConfig tcfg;
    int tr_width = 12, tr_pbm_width = 8;
    double tr_fixed_t = 0.5;
    uint64_t tr_init_seed = 0;  // 0: derive from --seed
    bool tr_no_augment = false;
    tr->add_option("--data", tr_data, "dataset root (train/ and val/ splits)");
    tr->add_option("--mode", tr_mode, "threshold mode: fixed|ibm|pbm");
    tr->add_option("--routing", tr_routing, "gradient routing: te-only|te-and-cp");
    tr->add_option("--fixed-t", tr_fixed_t, "threshold constant for fixed mode");
    tr->add_option("--out", tr_out, "checkpoint path");
    tr->add_option("--log", tr_log, "write per-epoch lines to this file");
    tr->add_option("--epochs", tcfg.epochs, "training epochs");
    tr->add_option("--batch", tcfg.batch, "batch size");
    tr->add_option("--lr-conf", tcfg.opt.lr_confidence, "predictor learning rate");
    tr->add_option("--lr-thr", tcfg.opt.lr_threshold, "threshold-encoder learning rate");
    tr->add_option("--decay", tcfg.opt.decay, "per-epoch learning-rate decay");
    tr->add_option("--lambda", tcfg.lambda, "binary-map loss weight");
    tr->add_option("--thr-warmup", tcfg.thr_warmup,
                   "epochs to hold the threshold encoder still at the start");
    tr->add_option("--seed", tcfg.seed, "training seed (shuffling, augmentation)");
    tr->add_option("--init-seed", tr_init_seed, "weight init seed (default: seed + 1)");
    tr->add_option("--width", tr_width, "predictor channel width");
    tr->add_option("--pbm-width", tr_pbm_width, "pixel threshold-encoder width");
    tr->add_option("--min-area", tcfg.min_area, "minimum component area during validation");
    tr->add_flag("--no-augment", tr_no_augment, "disable flip/scale augmentation");
    tr->callback([&] {
        tcfg.augment = !tr_no_augment;
        const uint64_t init_seed = tr_init_seed ? tr_init_seed : tcfg.seed + 1;
        ModelState m = init_model(detail::parse_mode(tr_mode), detail::parse_routing(tr_routing),
                                  tr_fixed_t, tr_width, tr_pbm_width, init_seed);
        const std::vector<Sample> train_set = load_split(tr_data + "/train");
        std::vector<Sample> val_set;
        if (std::filesystem::exists(tr_data + "/val/manifest.txt"))
            val_set = load_split(tr_data + "/val");
        std::string lines;
        const TrainLog log = train(m, train_set, val_set, tcfg, [&](const EpochLog& el) {
            const std::string line = detail::epoch_line(el);
            std::cout << line << std::endl;
            lines += line + "\n";
        });
        save_checkpoint(tr_out, m);
        std::cout << "best epoch " << log.best_epoch << " val_f1 " << log.best_f1 << " -> "
                  << tr_out << "\n";
        if (!tr_log.empty()) write_text(tr_log, lines);
    });

    // eval
    auto* ev = app.add_subcommand("eval", "score a model over a dataset split");
    std::string ev_data = "data", ev_split = "test", ev_model = "model.ckpt";
    std::string ev_json, ev_records;
    double ev_fixed = -1.0;
    int ev_min_area = 3;
    ev->add_option("--data", ev_data, "dataset root");
    ev->add_option("--split", ev_split, "split name (train|val|test)");
    ev->add_option("--model", ev_model, "checkpoint path");
    ev->add_option("--fixed-t", ev_fixed, "override: binarize at this constant threshold");
    ev->add_option("--min-area", ev_min_area, "minimum component area");
    ev->add_option("--json", ev_json, "also write metrics as json");
    ev->add_option("--records", ev_records, "also write per-image instance records");
    ev->callback([&] {
        const ModelState m = load_checkpoint(ev_model);
        const std::vector<Sample> samples = load_split(ev_data + "/" + ev_split);
        const EvalResult er = evaluate_dataset(samples, m, ev_min_area, ev_fixed);
        std::cout << metrics_table(er.metrics);
        if (!ev_json.empty()) write_text(ev_json, metrics_json(er.metrics).dump(2) + "\n");
        if (!ev_records.empty()) {
            std::string lines;
            for (const ImageEval& ie : er.images) lines += result_record(ie.loc);
            write_text(ev_records, lines);
        }
    });

    // localize
    auto* lo = app.add_subcommand("localize", "instances in a single image");
    std::string lo_model = "model.ckpt", lo_image, lo_out;
    double lo_fixed = -1.0;
    int lo_min_area = 3;
    lo->add_option("--model", lo_model, "checkpoint path");
    lo->add_option("--image", lo_image, "input image (8-bit gray png)")->required();
    lo->add_option("--fixed-t", lo_fixed, "override: binarize at this constant threshold");
    lo->add_option("--min-area", lo_min_area, "minimum component area");
    lo->add_option("--out", lo_out, "write the record here instead of stdout");
    lo->callback([&] {
        const ModelState m = load_checkpoint(lo_model);
        const Grid img = read_png_gray8(lo_image);
        const std::string id = std::filesystem::path(lo_image).stem().string();
        const LocalizationResult r = localize_image(img, m, lo_min_area, id, lo_fixed);
        if (lo_out.empty())
            std::cout << result_record(r);
        else
            write_text(lo_out, result_record(r));
    });

    // render
    auto* re = app.add_subcommand("render", "overlay predictions against an annotation");
    std::string re_model = "model.ckpt", re_image, re_ann, re_out = "overlay.png";
    double re_fixed = -1.0;
    int re_min_area = 3;
    re->add_option("--model", re_model, "checkpoint path");
    re->add_option("--image", re_image, "input image (8-bit gray png)")->required();
    re->add_option("--ann", re_ann, "annotation json")->required();
    re->add_option("--out", re_out, "overlay output (rgb png)");
    re->add_option("--fixed-t", re_fixed, "override: binarize at this constant threshold");
    re->add_option("--min-area", re_min_area, "minimum component area");
    re->callback([&] {
        const ModelState m = load_checkpoint(re_model);
        const Grid img = read_png_gray8(re_image);
        const Annotation ann = read_annotation(re_ann);
        const LocalizationResult r = localize_image(img, m, re_min_area, ann.image_id, re_fixed);
        const std::vector<GtPoint> gts = gt_points(ann);
        std::vector<std::pair<double, double>> centers;
        for (const Instance& inst : r.instances) centers.push_back({inst.cx, inst.cy});
        const MatchReport match = match_instances(centers, gts);
        RgbImage overlay;
        const OverlayCounts c = render_overlay(img, r, gts, match, &overlay);
        write_png_rgb8(re_out, overlay);
        std::cout << "tp " << c.tp << " fp " << c.fp << " fn " << c.fn << " -> " << re_out << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace crowdloc
