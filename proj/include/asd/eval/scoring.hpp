#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "asd/data/manifest.hpp"
#include "asd/eval/metrics.hpp"
#include "asd/losses/losses.hpp"
#include "asd/train/checkpoint.hpp"

namespace asd::eval {

struct ScoreOptions {
    // Margin on the true class at inference (ablation only; off by default).
    bool margin_at_inference = false;
    std::size_t batch_size = 16;
};

// Sum of softmax(s * cos)_k over k != true_class; equals 1 - p_true but keeps
// precision when p_true is close to 1.
double anomaly_score(std::span<const double> cos_theta, std::size_t true_class, const losses::LossConfig& cfg,
                     bool margin_at_inference = false);

double anomaly_score(const train::Checkpoint& ckpt, const dsp::Waveform& clip, const data::MachineKey& machine,
                     const ScoreOptions& opt = {});

struct ClipAnalysis {
    std::size_t record = 0;  // index into Manifest::records
    data::MachineKey machine;
    data::Condition condition = data::Condition::kNormal;
    double score = 0.0;
    double theta_true = 0.0;  // angle to the true class centre, radians
};

// Embeds every record of the given split. Unseen (type, id) pairs raise
// ClassMapError before any audio is read.
std::vector<ClipAnalysis> analyse_split(const train::Checkpoint& ckpt, const data::Manifest& manifest,
                                        data::Split split, const ScoreOptions& opt = {});

std::vector<ScoredClip> to_scored(std::span<const ClipAnalysis> clips);

struct AngleRecord {
    double theta_true = 0.0;
    data::Condition condition = data::Condition::kNormal;
};

struct AngleHistogram {
    std::vector<double> edges;  // bins + 1 values from 0 to pi
    std::vector<std::size_t> normal;
    std::vector<std::size_t> anomaly;
};

// Fixed-width bins over [0, pi]; theta = pi lands in the last bin.
AngleHistogram angle_histogram(std::span<const AngleRecord> records, std::size_t bins);
std::vector<AngleRecord> to_angles(std::span<const ClipAnalysis> clips);

// CSV `bin_low,bin_high,count_normal,count_anomaly`.
void write_angle_histogram(const AngleHistogram& h, const std::filesystem::path& path);

// Median theta_true over records of one condition; Error if there are none.
double median_angle(std::span<const AngleRecord> records, data::Condition condition);

}  // namespace asd::eval
