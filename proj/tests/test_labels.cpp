#include <catch2/catch_amalgamated.hpp>

#include "crowdloc/labels.hpp"
#include "crowdloc/rng.hpp"
#include "oracles.hpp"

using namespace crowdloc;

namespace {

int disk_area(int r) {
    int n = 0;
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dx * dx + dy * dy <= r * r) ++n;
    return n;
}

// Smallest pixel-center distance between two labels, infinity if either is
// absent.
double min_label_distance(const LabelMap& m, int32_t a, int32_t b) {
    std::vector<std::pair<int, int>> pa, pb;
    for (int y = 0; y < m.h; ++y)
        for (int x = 0; x < m.w; ++x) {
            if (m.at(y, x) == a) pa.push_back({x, y});
            if (m.at(y, x) == b) pb.push_back({x, y});
        }
    double best = std::numeric_limits<double>::infinity();
    for (auto& [xa, ya] : pa)
        for (auto& [xb, yb] : pb)
            best = std::min(best, std::hypot(xa - xb, ya - yb));
    return best;
}

}  // namespace

TEST_CASE("single box paints an inclusive filled rectangle") {
    Annotation ann;
    ann.boxes.push_back({10, 10, 20, 20});
    LabelMap m = iim_from_boxes(ann, 32, 32);
    CHECK(m.count == 1);
    int area = 0;
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            if (m.at(y, x) == 1) ++area;
            const bool inside = x >= 10 && x <= 20 && y >= 10 && y <= 20;
            CHECK(m.at(y, x) == (inside ? 1 : 0));
        }
    CHECK(area == 11 * 11);
}

TEST_CASE("disjoint far-apart boxes stay unchanged") {
    Annotation ann;
    ann.boxes.push_back({2, 2, 8, 8});
    ann.boxes.push_back({20, 20, 28, 26});
    LabelMap m = iim_from_boxes(ann, 40, 40);
    CHECK(m.count == 2);
    CHECK(m.at(5, 5) == 1);
    CHECK(m.at(23, 24) == 2);
    CHECK(m.at(2, 2) == 1);  // corners intact: no shrink happened
    CHECK(m.at(8, 8) == 1);
    CHECK(m.at(20, 20) == 2);
    CHECK(m.at(26, 28) == 2);
    CHECK(oracle::flood_fill_components(m.binarized()).count == 2);
}

TEST_CASE("overlapping boxes shrink until separated") {
    Annotation ann;
    ann.boxes.push_back({10, 10, 30, 30});
    ann.boxes.push_back({20, 10, 40, 30});  // centers 10 px apart horizontally
    LabelMap m = iim_from_boxes(ann, 64, 64);
    CHECK(m.count == 2);
    LabelMap relabeled = oracle::flood_fill_components(m.binarized());
    CHECK(relabeled.count == 2);
    // both centers still covered by their own instance
    CHECK(m.at(20, 20) == 1);
    CHECK(m.at(20, 30) == 2);
    // the painted rectangles are separated by at least 2 columns
    CHECK(min_label_distance(m, 1, 2) >= 2.0);
}

TEST_CASE("boxes with identical centers are rejected") {
    Annotation ann;
    ann.boxes.push_back({10, 10, 20, 20});
    ann.boxes.push_back({12, 12, 18, 18});
    CHECK_THROWS_AS(iim_from_boxes(ann, 32, 32), std::invalid_argument);
}

TEST_CASE("shrunk boxes remain centered subrectangles of the originals") {
    Annotation ann;
    ann.boxes.push_back({8, 8, 24, 24});
    ann.boxes.push_back({18, 8, 34, 24});
    LabelMap m = iim_from_boxes(ann, 48, 48);
    for (size_t i = 0; i < ann.boxes.size(); ++i) {
        const BoxAnn& b = ann.boxes[i];
        const int cx = static_cast<int>(std::lround(b.cx()));
        const int cy = static_cast<int>(std::lround(b.cy()));
        CHECK(m.at(cy, cx) == static_cast<int32_t>(i + 1));
        for (int y = 0; y < m.h; ++y)
            for (int x = 0; x < m.w; ++x)
                if (m.at(y, x) == static_cast<int32_t>(i + 1)) {
                    CHECK(x >= b.x1);
                    CHECK(x <= b.x2);
                    CHECK(y >= b.y1);
                    CHECK(y <= b.y2);
                }
    }
}

TEST_CASE("random box scatter always yields one component per box") {
    Rng rng(101);
    for (int trial = 0; trial < 20; ++trial) {
        Annotation ann;
        std::vector<std::pair<int, int>> centers;
        const int n = 2 + static_cast<int>(rng.next_u64() % 7);
        while (static_cast<int>(centers.size()) < n) {
            const int cx = rng.uniform_int(6, 57);
            const int cy = rng.uniform_int(6, 57);
            bool ok = true;
            for (auto& [ox, oy] : centers)
                if (std::abs(ox - cx) + std::abs(oy - cy) < 4) ok = false;
            if (!ok) continue;
            centers.push_back({cx, cy});
            const double w = rng.uniform(3.0, 14.0), h = rng.uniform(3.0, 14.0);
            ann.boxes.push_back({cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2});
        }
        LabelMap m = iim_from_boxes(ann, 64, 64);
        REQUIRE(m.count == n);
        LabelMap oracle_map = oracle::flood_fill_components(m.binarized());
        REQUIRE(oracle_map.count == n);
    }
}

TEST_CASE("box map generation is deterministic") {
    Annotation ann;
    ann.boxes.push_back({10, 10, 30, 30});
    ann.boxes.push_back({20, 12, 40, 28});
    LabelMap a = iim_from_boxes(ann, 64, 64);
    LabelMap b = iim_from_boxes(ann, 64, 64);
    REQUIRE(a.v == b.v);
}

TEST_CASE("isolated point gets the full 31-pixel-diameter disk") {
    Annotation ann;
    ann.points.push_back({32.0, 32.0});
    LabelMap m = iim_from_points(ann, 64, 64);
    CHECK(m.count == 1);
    int area = 0, minx = 64, maxx = -1;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            if (m.at(y, x) == 1) {
                ++area;
                minx = std::min(minx, x);
                maxx = std::max(maxx, x);
            }
    CHECK(area == disk_area(15));
    CHECK(maxx - minx + 1 == 31);
    CHECK(m.at(32, 32) == 1);
}

TEST_CASE("two points 10 px apart get radius-4 disks with a gap") {
    Annotation ann;
    ann.points.push_back({20.0, 20.0});
    ann.points.push_back({30.0, 20.0});
    LabelMap m = iim_from_points(ann, 64, 64);
    CHECK(m.count == 2);
    int a1 = 0, a2 = 0;
    for (int32_t v : m.v) {
        if (v == 1) ++a1;
        if (v == 2) ++a2;
    }
    CHECK(a1 == disk_area(4));
    CHECK(a2 == disk_area(4));
    CHECK(min_label_distance(m, 1, 2) >= 2.0);
    CHECK(oracle::flood_fill_components(m.binarized()).count == 2);
}

TEST_CASE("empty point list yields the zero map") {
    Annotation ann;
    LabelMap m = iim_from_points(ann, 32, 32);
    CHECK(m.count == 0);
    for (int32_t v : m.v) CHECK(v == 0);
}

TEST_CASE("coincident points are rejected") {
    Annotation ann;
    ann.points.push_back({10.0, 10.0});
    ann.points.push_back({10.0, 10.0});
    CHECK_THROWS_AS(iim_from_points(ann, 32, 32), std::invalid_argument);
    Annotation adj;
    adj.points.push_back({10.0, 10.0});
    adj.points.push_back({10.6, 10.0});  // rounds to a touching pixel
    CHECK_THROWS_AS(iim_from_points(adj, 32, 32), std::invalid_argument);
}

TEST_CASE("odd axis-aligned separations never merge disks") {
    // d = 9 makes the nominal radii 4 + 4, whose disks would sit in adjacent
    // columns; the safety trim has to prevent that.
    for (int d : {3, 5, 7, 9, 11, 13}) {
        Annotation ann;
        ann.points.push_back({20.0, 20.0});
        ann.points.push_back({20.0 + d, 20.0});
        LabelMap m = iim_from_points(ann, 64, 64);
        INFO("separation " << d);
        REQUIRE(m.count == 2);
        REQUIRE(oracle::flood_fill_components(m.binarized()).count == 2);
        CHECK(m.at(20, 20) == 1);
        CHECK(m.at(20, 20 + d) == 2);
    }
}

TEST_CASE("random point scatter always yields one component per point") {
    Rng rng(103);
    for (int trial = 0; trial < 20; ++trial) {
        Annotation ann;
        std::vector<std::pair<int, int>> placed;
        const int n = 1 + static_cast<int>(rng.next_u64() % 12);
        while (static_cast<int>(placed.size()) < n) {
            const int x = rng.uniform_int(2, 61);
            const int y = rng.uniform_int(2, 61);
            bool ok = true;
            for (auto& [ox, oy] : placed)
                if (std::abs(ox - x) + std::abs(oy - y) < 2) ok = false;
            if (!ok) continue;
            placed.push_back({x, y});
            ann.points.push_back({static_cast<double>(x), static_cast<double>(y)});
        }
        LabelMap m = iim_from_points(ann, 64, 64);
        REQUIRE(m.count == n);
        LabelMap oracle_map = oracle::flood_fill_components(m.binarized());
        INFO("trial " << trial << " with " << n << " points");
        REQUIRE(oracle_map.count == n);
        // every point keeps its center pixel
        for (size_t i = 0; i < ann.points.size(); ++i) {
            const int cx = static_cast<int>(std::lround(ann.points[i].first));
            const int cy = static_cast<int>(std::lround(ann.points[i].second));
            REQUIRE(m.at(cy, cx) == static_cast<int32_t>(i + 1));
        }
    }
}

TEST_CASE("point map generation is deterministic") {
    Annotation ann;
    ann.points = {{10.2, 14.7}, {30.0, 9.5}, {22.8, 40.1}};
    LabelMap a = iim_from_points(ann, 64, 64);
    LabelMap b = iim_from_points(ann, 64, 64);
    REQUIRE(a.v == b.v);
    CHECK(a.count == 3);
}

TEST_CASE("sigma_l follows the box diagonal") {
    BoxAnn b{10, 10, 14, 13};
    CHECK(b.sigma_l() == Catch::Approx(std::sqrt(16.0 + 9.0) / 2.0));
}
