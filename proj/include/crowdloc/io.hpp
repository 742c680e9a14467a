#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "crowdloc/eval.hpp"
#include "crowdloc/instances.hpp"
#include "crowdloc/labels.hpp"

// File formats: per-image annotation JSON, localization result records (text
// and JSON), the metrics report, and split manifests.

namespace crowdloc {

inline void write_annotation(const std::string& path, const Annotation& ann) {
    nlohmann::json j;
    j["id"] = ann.image_id;
    j["points"] = nlohmann::json::array();
    for (const auto& [x, y] : ann.points) j["points"].push_back({x, y});
    j["boxes"] = nlohmann::json::array();
    for (const BoxAnn& b : ann.boxes) j["boxes"].push_back({b.x1, b.y1, b.x2, b.y2});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write annotation: " + path);
    out << j.dump(2) << "\n";
}

inline Annotation read_annotation(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read annotation: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("bad annotation json in " + path + ": " + e.what());
    }
    Annotation ann;
    ann.image_id = j.value("id", "");
    for (const auto& p : j.value("points", nlohmann::json::array())) {
        if (!p.is_array() || p.size() != 2)
            throw std::runtime_error("bad point entry in " + path);
        ann.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    for (const auto& b : j.value("boxes", nlohmann::json::array())) {
        if (!b.is_array() || b.size() != 4)
            throw std::runtime_error("bad box entry in " + path);
        ann.boxes.push_back(
            {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
    }
    return ann;
}

// One line per image: id, count, then x1 y1 x2 y2 cx cy per instance.
inline std::string result_record(const LocalizationResult& r) {
    std::ostringstream os;
    os << r.image_id << ' ' << r.count();
    os << std::setprecision(17);
    for (const Instance& i : r.instances)
        os << ' ' << i.x1 << ' ' << i.y1 << ' ' << i.x2 << ' ' << i.y2 << ' ' << i.cx << ' '
           << i.cy;
    os << '\n';
    return os.str();
}

inline nlohmann::json result_json(const LocalizationResult& r) {
    nlohmann::json j;
    j["id"] = r.image_id;
    j["count"] = r.count();
    j["instances"] = nlohmann::json::array();
    for (const Instance& i : r.instances)
        j["instances"].push_back({{"bbox", {i.x1, i.y1, i.x2, i.y2}},
                                  {"center", {i.cx, i.cy}},
                                  {"area", i.area}});
    return j;
}

struct MetricsReport {
    LocScores loc;
    CountReport cnt;
    int images = 0;
};

inline nlohmann::json metrics_json(const MetricsReport& m) {
    return {{"F1m", m.loc.f1},  {"Pre", m.loc.pre}, {"Rec", m.loc.rec},
            {"MAE", m.cnt.mae}, {"MSE", m.cnt.mse}, {"NAE", m.cnt.nae},
            {"images", m.images}};
}

inline std::string metrics_table(const MetricsReport& m) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "images " << m.images << "\n"
       << "F1-m   " << m.loc.f1 << "\n"
       << "Pre    " << m.loc.pre << "\n"
       << "Rec    " << m.loc.rec << "\n"
       << "MAE    " << m.cnt.mae << "\n"
       << "MSE    " << m.cnt.mse << "\n"
       << "NAE    " << m.cnt.nae << "\n";
    return os.str();
}

inline void write_manifest(const std::string& path, const std::vector<std::string>& ids) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    for (const std::string& id : ids) out << id << "\n";
}

inline std::vector<std::string> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read manifest: " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ids.push_back(line);
    return ids;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
}

}  // namespace crowdloc
