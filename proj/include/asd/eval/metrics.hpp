#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "asd/data/manifest.hpp"
#include "json.hpp"

namespace asd::eval {

struct ScoredClip {
    data::MachineKey machine;
    data::Condition condition = data::Condition::kNormal;
    double score = 0.0;  // higher = more anomalous
};

// Mann-Whitney: fraction of (anomaly, normal) pairs ranked correctly, ties 0.5.
// Throws Error unless both conditions are present.
double auc(std::span<const ScoredClip> clips);
double auc(std::span<const double> normal, std::span<const double> anomaly);

// ROC area over FPR in [0, p] from exact vertices (tied scores form one
// diagonal segment), interpolated at FPR = p, divided by p. p in (0, 1].
double pauc(std::span<const ScoredClip> clips, double p = 0.1);
double pauc(std::span<const double> normal, std::span<const double> anomaly, double p = 0.1);

struct MachineMetrics {
    data::MachineKey machine;
    double auc = 0.0;
    double pauc = 0.0;
    std::size_t normals = 0;
    std::size_t anomalies = 0;
};

struct TypeMetrics {
    std::string type;
    double auc = 0.0;   // mean over IDs
    double pauc = 0.0;  // mean over IDs
    double mauc = 0.0;  // min over IDs
    std::vector<MachineMetrics> ids;
};

struct MetricsReport {
    double p = 0.1;
    std::vector<TypeMetrics> types;  // sorted by type name
    double average_auc = 0.0;        // means over machine types
    double average_pauc = 0.0;
    double average_mauc = 0.0;
    std::vector<std::string> warnings;  // groups excluded for lacking a condition
};

// Groups by (type, id). Groups holding a single condition are skipped with a
// warning; if every group is skipped an Error is thrown.
MetricsReport evaluate_metrics(std::span<const ScoredClip> clips, double p = 0.1);

// Per machine type: min over IDs of the per-ID AUC.
std::map<std::string, double> mauc(std::span<const ScoredClip> clips);

nlohmann::json to_json(const MetricsReport& r);
void write_report(const MetricsReport& r, const std::filesystem::path& path);

// CSV `machine_type,machine_id,condition,score`.
void write_scores(std::span<const ScoredClip> clips, const std::filesystem::path& path);

}  // namespace asd::eval
