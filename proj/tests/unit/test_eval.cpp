#include <algorithm>
#include <cmath>
#include <numeric>
#include <numbers>
#include <random>

#include "asd/autodiff/ops.hpp"
#include "asd/error.hpp"
#include "asd/eval/metrics.hpp"
#include "asd/eval/scoring.hpp"
#include "doctest.h"

using namespace asd;
using namespace asd::eval;
using data::Condition;

namespace {

std::vector<ScoredClip> clips(const std::vector<double>& normal, const std::vector<double>& anomaly,
                              data::MachineKey key = {"fan", 0}) {
    std::vector<ScoredClip> out;
    for (double s : normal) out.push_back({key, Condition::kNormal, s});
    for (double s : anomaly) out.push_back({key, Condition::kAnomaly, s});
    return out;
}

// O(n^2) pair counting, doubled so ties stay integral.
double brute_auc(const std::vector<double>& n, const std::vector<double>& a) {
    std::uint64_t twice = 0;
    for (double x : a)
        for (double y : n) twice += x > y ? 2 : (x == y ? 1 : 0);
    return static_cast<double>(twice) / (2.0 * n.size() * a.size());
}

// Threshold sweep oracle: ROC vertices from every distinct score, area by
// trapezoids up to FPR = p with interpolation.
double brute_pauc(const std::vector<double>& n, const std::vector<double>& a, double p) {
    std::vector<double> thr(n);
    thr.insert(thr.end(), a.begin(), a.end());
    std::sort(thr.begin(), thr.end(), std::greater<>());
    thr.erase(std::unique(thr.begin(), thr.end()), thr.end());
    std::vector<std::pair<double, double>> roc{{0.0, 0.0}};
    for (double t : thr) {
        double fp = 0, tp = 0;
        for (double y : n) fp += y >= t;
        for (double x : a) tp += x >= t;
        roc.emplace_back(fp / n.size(), tp / a.size());
    }
    double area = 0.0;
    for (std::size_t i = 1; i < roc.size(); ++i) {
        auto [x0, y0] = roc[i - 1];
        auto [x1, y1] = roc[i];
        if (x0 >= p) break;
        if (x1 > p) {
            y1 = y0 + (y1 - y0) * (p - x0) / (x1 - x0);
            x1 = p;
        }
        area += (x1 - x0) * (y0 + y1) / 2;
    }
    return area / p;
}

}  // namespace

TEST_CASE("auc closed forms") {
    CHECK(auc(clips({0.2, 0.1}, {0.9, 0.8})) == 1.0);
    CHECK(auc(clips({0.4, 0.1}, {0.9, 0.3})) == 0.75);
    CHECK(auc(clips({0.5}, {0.5})) == 0.5);
    CHECK_THROWS_AS(auc(clips({0.1, 0.2}, {})), Error);
    CHECK_THROWS_AS(auc(clips({}, {0.3})), Error);
}

TEST_CASE("pauc closed forms") {
    for (double p : {0.05, 0.1, 0.5, 1.0}) {
        CHECK(pauc(clips({0.2, 0.1}, {0.9, 0.8}), p) == 1.0);
        CHECK(pauc(clips({0.9, 0.8}, {0.2, 0.1}), p) == 0.0);
    }
    CHECK(pauc(clips({0.6, 0.1}, {0.9, 0.4}), 0.5) == 0.5);
    CHECK_THROWS_AS(pauc(clips({0.1}, {0.2}), 0.0), ConfigError);
    CHECK_THROWS_AS(pauc(clips({0.1}, {0.2}), 1.5), ConfigError);
}

TEST_CASE("auc and pauc against brute-force oracles on random instances with ties") {
    std::mt19937_64 rng(51);
    for (int inst = 0; inst < 1000; ++inst) {
        const std::size_t nn = 1 + rng() % 30, na = 1 + rng() % 30;
        const int levels = 2 + static_cast<int>(rng() % 10);  // few levels -> many ties
        std::uniform_int_distribution<int> lv(0, levels);
        std::vector<double> n, a;
        for (std::size_t i = 0; i < nn; ++i) n.push_back(lv(rng) / static_cast<double>(levels));
        for (std::size_t i = 0; i < na; ++i) a.push_back(lv(rng) / static_cast<double>(levels));
        CHECK(auc(n, a) == brute_auc(n, a));
        CHECK(std::abs(pauc(n, a, 1.0) - auc(n, a)) <= 1e-12);
        CHECK(std::abs(pauc(n, a, 0.1) - brute_pauc(n, a, 0.1)) <= 1e-12);
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    std::mt19937_64 rng(52);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int inst = 0; inst < 200; ++inst) {
        std::vector<double> n, a;
        for (int i = 0; i < 20; ++i) n.push_back(std::round(g(rng) * 4) / 4);
        for (int i = 0; i < 15; ++i) a.push_back(std::round((g(rng) + 1) * 4) / 4);
        std::vector<double> ne, ae, na2, aa2;
        for (double v : n) {
            ne.push_back(std::exp(v));
            na2.push_back(3.0 * v + 7.0);
        }
        for (double v : a) {
            ae.push_back(std::exp(v));
            aa2.push_back(3.0 * v + 7.0);
        }
        CHECK(auc(ne, ae) == auc(n, a));
        CHECK(auc(na2, aa2) == auc(n, a));
    }
}

TEST_CASE("mAUC and type averages follow the per-ID / per-type construction") {
    std::vector<ScoredClip> all;
    const auto add = [&](const std::string& type, int id, std::vector<double> n, std::vector<double> a) {
        const auto c = clips(n, a, {type, id});
        all.insert(all.end(), c.begin(), c.end());
    };
    // fan: IDs with AUC 1.0 and 0.75 ; pump: IDs with AUC 0.5 and 1.0
    add("fan", 0, {0.1, 0.2}, {0.8, 0.9});
    add("fan", 2, {0.4, 0.1}, {0.9, 0.3});
    add("pump", 0, {0.5}, {0.5});
    add("pump", 1, {0.1}, {0.7});
    const auto r = evaluate_metrics(all, 0.1);
    REQUIRE(r.types.size() == 2);
    CHECK(r.types[0].type == "fan");
    CHECK(r.types[0].mauc == 0.75);
    CHECK(r.types[0].auc == 0.875);
    CHECK(r.types[1].mauc == 0.5);
    CHECK(r.average_mauc == doctest::Approx(0.625));
    CHECK(r.average_auc == doctest::Approx((0.875 + 0.75) / 2));
    for (const auto& t : r.types) CHECK(t.mauc <= t.auc);
    const auto per_type = mauc(all);
    CHECK(per_type.at("fan") == 0.75);

    // A group with one condition is skipped with a warning.
    add("valve", 0, {0.3, 0.2}, {});
    const auto r2 = evaluate_metrics(all, 0.1);
    CHECK(r2.types.size() == 2);
    CHECK(r2.warnings.size() == 1);
    CHECK_THROWS_AS(evaluate_metrics(clips({0.1}, {}), 0.1), Error);

    const auto j = to_json(r);
    CHECK(j.at("per_type").at("fan").at("mauc") == 0.75);
    CHECK(j.at("average").contains("pauc"));
}

TEST_CASE("mAUC closed forms") {
    std::vector<ScoredClip> all = clips({0.1, 0.2}, {0.8, 0.9}, {"fan", 0});
    auto b = clips({0.1, 0.2}, {0.8, 0.9}, {"fan", 1});
    all.insert(all.end(), b.begin(), b.end());
    CHECK(evaluate_metrics(all).average_mauc == 1.0);
}

TEST_CASE("anomaly score closed forms") {
    const losses::LossConfig cfg;
    const double eps = ad::kArccosEpsilon;
    const double at_centre = anomaly_score(std::vector<double>{1 - eps, 0.0}, 0, cfg);
    CHECK(at_centre == doctest::Approx(9.36e-14).epsilon(0.01));
    const double away = anomaly_score(std::vector<double>{0.0, 1 - eps}, 0, cfg);
    CHECK(away == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(anomaly_score(std::vector<double>{0.3, 0.3}, 1, cfg) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK_THROWS_AS(anomaly_score(std::vector<double>{0.3, 0.3}, 2, cfg), ClassMapError);
    // The margin flag only ever raises the score.
    CHECK(anomaly_score(std::vector<double>{0.5, 0.2}, 0, cfg, true) > anomaly_score(std::vector<double>{0.5, 0.2}, 0, cfg));
}

TEST_CASE("angle histogram conservation, edges and medians") {
    std::vector<AngleRecord> recs;
    std::mt19937_64 rng(53);
    std::uniform_real_distribution<double> u(0.0, std::numbers::pi);
    for (int i = 0; i < 37; ++i) recs.push_back({u(rng), Condition::kNormal});
    for (int i = 0; i < 11; ++i) recs.push_back({u(rng), Condition::kAnomaly});
    recs.push_back({std::numbers::pi, Condition::kAnomaly});
    recs.push_back({0.0, Condition::kNormal});
    const auto h = angle_histogram(recs, 9);
    CHECK(h.edges.size() == 10);
    CHECK(h.edges.back() == std::numbers::pi);
    CHECK(std::accumulate(h.normal.begin(), h.normal.end(), std::size_t{0}) == 38);
    CHECK(std::accumulate(h.anomaly.begin(), h.anomaly.end(), std::size_t{0}) == 12);
    CHECK(h.anomaly.back() >= 1);

    std::vector<AngleRecord> centred(5, AngleRecord{1e-4, Condition::kNormal});
    const auto hc = angle_histogram(centred, 18);
    CHECK(hc.normal[0] == 5);
    CHECK_THROWS_AS(angle_histogram(recs, 0), ConfigError);
    CHECK_THROWS(angle_histogram(std::vector<AngleRecord>{{4.0, Condition::kNormal}}, 3));

    const std::vector<AngleRecord> m{{0.1, Condition::kNormal}, {0.5, Condition::kNormal}, {0.3, Condition::kNormal}};
    CHECK(median_angle(m, Condition::kNormal) == 0.3);
    CHECK_THROWS(median_angle(m, Condition::kAnomaly));
}
