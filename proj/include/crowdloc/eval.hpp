#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

// Instance-level localization metrics and image-level counting errors. A
// prediction counts as a hit only when it is assigned to a ground-truth head
// within that head's own radius sigma_l; the assignment is globally optimal,
// maximizing hits first and total matched distance second.

namespace crowdloc {

struct GtPoint {
    double x = 0.0, y = 0.0;
    double sigma = 0.0;  // match radius
};

struct MatchPair {
    int pred = 0, gt = 0;
    double dist = 0.0;
};

struct MatchReport {
    int tp = 0, fp = 0, fn = 0;
    std::vector<MatchPair> pairs;
};

struct LocScores {
    double pre = 0.0, rec = 0.0, f1 = 0.0;
};

struct CountReport {
    double mae = 0.0;
    double mse = 0.0;  // root form, sqrt(mean squared error)
    double nae = 0.0;
};

namespace detail {

// Jonker-style Hungarian algorithm with potentials, O(n^3), minimizing total
// cost of a perfect matching on a square matrix. Returns row -> column.
inline std::vector<int> hungarian_min(const std::vector<std::vector<double>>& a) {
    const int n = static_cast<int>(a.size());
    const double INF = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), INF);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = INF;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] >= 1) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

}  // namespace detail

// Optimal one-to-one matching between predicted centers and ground truth.
// Admissible pairs (distance within the head's sigma_l) earn a large bonus so
// the assignment maximizes their number before minimizing distance; padding
// rows/columns absorb whatever stays unmatched.
inline MatchReport match_instances(const std::vector<std::pair<double, double>>& preds,
                                   const std::vector<GtPoint>& gts) {
    const int m = static_cast<int>(preds.size());
    const int n = static_cast<int>(gts.size());
    MatchReport rep;
    if (m == 0 || n == 0) {
        rep.fp = m;
        rep.fn = n;
        return rep;
    }
    std::vector<std::vector<double>> dist(m, std::vector<double>(n));
    double bonus = 1.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const double dx = preds[i].first - gts[j].x;
            const double dy = preds[i].second - gts[j].y;
            dist[i][j] = std::sqrt(dx * dx + dy * dy);
            if (dist[i][j] <= gts[j].sigma) bonus += dist[i][j];
        }
    const int s = m + n;
    std::vector<std::vector<double>> cost(s, std::vector<double>(s, 0.0));
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            if (dist[i][j] <= gts[j].sigma) cost[i][j] = dist[i][j] - bonus;
    const std::vector<int> assign = detail::hungarian_min(cost);
    std::vector<char> gt_hit(n, 0);
    for (int i = 0; i < m; ++i) {
        const int j = assign[i];
        if (j >= 0 && j < n && dist[i][j] <= gts[j].sigma) {
            rep.pairs.push_back({i, j, dist[i][j]});
            gt_hit[j] = 1;
        }
    }
    rep.tp = static_cast<int>(rep.pairs.size());
    rep.fp = m - rep.tp;
    rep.fn = n - rep.tp;
    return rep;
}

// Micro-averaged dataset scores; empty denominators score 0.
inline LocScores localization_scores(const std::vector<MatchReport>& reports) {
    long tp = 0, fp = 0, fn = 0;
    for (const MatchReport& r : reports) {
        tp += r.tp;
        fp += r.fp;
        fn += r.fn;
    }
    LocScores s;
    s.pre = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    s.rec = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    s.f1 = s.pre + s.rec > 0.0 ? 2.0 * s.pre * s.rec / (s.pre + s.rec) : 0.0;
    return s;
}

// counts: (predicted, ground truth) per image. NAE averages only over images
// that actually contain people; MAE/MSE cover everything, negatives included.
inline CountReport counting_errors(const std::vector<std::pair<double, double>>& counts) {
    CountReport r;
    if (counts.empty()) return r;
    double abs_sum = 0.0, sq_sum = 0.0, nae_sum = 0.0;
    int nae_n = 0;
    for (const auto& [pred, gt] : counts) {
        const double d = pred - gt;
        abs_sum += std::abs(d);
        sq_sum += d * d;
        if (gt > 0.0) {
            nae_sum += std::abs(d) / gt;
            nae_n += 1;
        }
    }
    const double n = static_cast<double>(counts.size());
    r.mae = abs_sum / n;
    r.mse = std::sqrt(sq_sum / n);
    r.nae = nae_n > 0 ? nae_sum / nae_n : 0.0;
    return r;
}

}  // namespace crowdloc
