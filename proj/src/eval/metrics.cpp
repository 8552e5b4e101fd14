#include "asd/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "asd/error.hpp"

namespace asd::eval {
namespace {

void split_scores(std::span<const ScoredClip> clips, std::vector<double>& normal, std::vector<double>& anomaly) {
    for (const auto& c : clips) {
        if (!std::isfinite(c.score)) throw NonFiniteError("non-finite score for " + data::to_string(c.machine));
        (c.condition == data::Condition::kNormal ? normal : anomaly).push_back(c.score);
    }
}

void require_both(std::span<const double> normal, std::span<const double> anomaly) {
    if (normal.empty() || anomaly.empty()) {
        throw Error("AUC needs at least one normal and one anomalous clip (got " + std::to_string(normal.size()) +
                    " normal, " + std::to_string(anomaly.size()) + " anomalous)");
    }
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double auc(std::span<const double> normal, std::span<const double> anomaly) {
    require_both(normal, anomaly);
    std::vector<double> n(normal.begin(), normal.end());
    std::sort(n.begin(), n.end());
    // Twice the pair count keeps ties (worth 1/2) in integers.
    std::uint64_t twice = 0;
    for (double a : anomaly) {
        const auto lo = std::lower_bound(n.begin(), n.end(), a);
        const auto hi = std::upper_bound(lo, n.end(), a);
        twice += 2 * static_cast<std::uint64_t>(lo - n.begin()) + static_cast<std::uint64_t>(hi - lo);
    }
    return static_cast<double>(twice) / (2.0 * static_cast<double>(normal.size()) * static_cast<double>(anomaly.size()));
}

double auc(std::span<const ScoredClip> clips) {
    std::vector<double> n, a;
    split_scores(clips, n, a);
    return auc(n, a);
}

double pauc(std::span<const double> normal, std::span<const double> anomaly, double p) {
    require_both(normal, anomaly);
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("pAUC range p must lie in (0, 1]");
    std::vector<double> n(normal.begin(), normal.end()), a(anomaly.begin(), anomaly.end());
    std::sort(n.begin(), n.end(), std::greater<>());
    std::sort(a.begin(), a.end(), std::greater<>());
    const double nn = static_cast<double>(n.size());
    const double na = static_cast<double>(a.size());

    // Sweep thresholds from high to low; each distinct score adds one vertex.
    std::size_t i = 0, j = 0;
    double x0 = 0.0, y0 = 0.0, area = 0.0;
    while (i < n.size() || j < a.size()) {
        double t = -INFINITY;
        if (i < n.size()) t = n[i];
        if (j < a.size()) t = std::max(t, a[j]);
        while (i < n.size() && n[i] == t) ++i;
        while (j < a.size() && a[j] == t) ++j;
        const double x1 = static_cast<double>(i) / nn;
        const double y1 = static_cast<double>(j) / na;
        if (x1 >= p) {
            const double yp = x1 > x0 ? y0 + (y1 - y0) * (p - x0) / (x1 - x0) : y1;
            area += (p - x0) * (y0 + yp) / 2.0;
            return area / p;
        }
        area += (x1 - x0) * (y0 + y1) / 2.0;
        x0 = x1;
        y0 = y1;
    }
    return area / p;  // not reached: the last vertex has x = 1 >= p
}

double pauc(std::span<const ScoredClip> clips, double p) {
    std::vector<double> n, a;
    split_scores(clips, n, a);
    return pauc(n, a, p);
}

MetricsReport evaluate_metrics(std::span<const ScoredClip> clips, double p) {
    std::map<data::MachineKey, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& c : clips) {
        if (!std::isfinite(c.score)) throw NonFiniteError("non-finite score for " + data::to_string(c.machine));
        auto& g = groups[c.machine];
        (c.condition == data::Condition::kNormal ? g.first : g.second).push_back(c.score);
    }
    MetricsReport r;
    r.p = p;
    std::map<std::string, TypeMetrics> by_type;
    for (const auto& [key, g] : groups) {
        if (g.first.empty() || g.second.empty()) {
            r.warnings.push_back(data::to_string(key) + " skipped: it has " + std::to_string(g.first.size()) +
                                 " normal and " + std::to_string(g.second.size()) + " anomalous clips");
            continue;
        }
        auto& t = by_type[key.type];
        t.type = key.type;
        t.ids.push_back(MachineMetrics{key, auc(g.first, g.second), pauc(g.first, g.second, p), g.first.size(),
                                       g.second.size()});
    }
    if (by_type.empty()) throw Error("no machine has both normal and anomalous clips; nothing to evaluate");
    for (auto& [name, t] : by_type) {
        double sa = 0.0, sp = 0.0, mn = 1.0;
        for (const auto& m : t.ids) {
            sa += m.auc;
            sp += m.pauc;
            mn = std::min(mn, m.auc);
        }
        t.auc = sa / static_cast<double>(t.ids.size());
        t.pauc = sp / static_cast<double>(t.ids.size());
        t.mauc = mn;
        r.types.push_back(t);
    }
    for (const auto& t : r.types) {
        r.average_auc += t.auc;
        r.average_pauc += t.pauc;
        r.average_mauc += t.mauc;
    }
    const double nt = static_cast<double>(r.types.size());
    r.average_auc /= nt;
    r.average_pauc /= nt;
    r.average_mauc /= nt;
    return r;
}

std::map<std::string, double> mauc(std::span<const ScoredClip> clips) {
    std::map<std::string, double> out;
    for (const auto& t : evaluate_metrics(clips).types) out[t.type] = t.mauc;
    return out;
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json types = nlohmann::json::object();
    for (const auto& t : r.types) {
        nlohmann::json ids = nlohmann::json::object();
        for (const auto& m : t.ids) {
            ids[std::to_string(m.machine.id)] = {
                {"auc", m.auc}, {"pauc", m.pauc}, {"normal_clips", m.normals}, {"anomaly_clips", m.anomalies}};
        }
        types[t.type] = {{"auc", t.auc}, {"pauc", t.pauc}, {"mauc", t.mauc}, {"ids", ids}};
    }
    return {{"p", r.p},
            {"per_type", types},
            {"average", {{"auc", r.average_auc}, {"pauc", r.average_pauc}, {"mauc", r.average_mauc}}},
            {"warnings", r.warnings}};
}

void write_report(const MetricsReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << to_json(r).dump(2) << '\n';
    if (!out) throw Error("failed writing report '" + path.string() + "'");
}

void write_scores(std::span<const ScoredClip> clips, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << "machine_type,machine_id,condition,score\n";
    for (const auto& c : clips) {
        out << c.machine.type << ',' << c.machine.id << ',' << data::to_string(c.condition) << ','
            << format_double(c.score) << '\n';
    }
    if (!out) throw Error("failed writing scores '" + path.string() + "'");
}

}  // namespace asd::eval
