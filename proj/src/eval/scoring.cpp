#include "asd/eval/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "asd/error.hpp"
#include "asd/model/forward.hpp"

namespace asd::eval {

double anomaly_score(std::span<const double> cos_theta, std::size_t true_class, const losses::LossConfig& cfg,
                     bool margin_at_inference) {
    if (true_class >= cos_theta.size()) throw ClassMapError("true class index out of range");
    std::vector<double> logits;
    if (margin_at_inference) {
        logits = losses::margin_logits(cos_theta, true_class, cfg);
    } else {
        for (double c : cos_theta) logits.push_back(cfg.scale * c);
    }
    const auto p = losses::softmax(logits);
    double others = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        if (k != true_class) others += p[k];
    }
    return others;
}

double anomaly_score(const train::Checkpoint& ckpt, const dsp::Waveform& clip, const data::MachineKey& machine,
                     const ScoreOptions& opt) {
    const std::size_t y = ckpt.class_map.index_of(machine);
    const auto mel = dsp::log_mel(clip, ckpt.config.mel).values;
    const dsp::Waveform* w = &clip;
    const ad::Tensor* m = &mel;
    const auto h = model::embed(ckpt.params, model::make_clip_batch({&w, 1}, {&m, 1}));
    const auto cl = model::cosine_logits(h.reshaped({h.dim(1)}), ckpt.params.head);
    return anomaly_score(cl.cos, y, ckpt.config.loss, opt.margin_at_inference);
}

std::vector<ClipAnalysis> analyse_split(const train::Checkpoint& ckpt, const data::Manifest& manifest,
                                        data::Split split, const ScoreOptions& opt) {
    const auto idx = manifest.indices(split);
    std::vector<ClipAnalysis> out;
    for (auto i : idx) {
        const auto& r = manifest.records[i];
        out.push_back(ClipAnalysis{i, r.machine, r.condition, 0.0, 0.0});
        ckpt.class_map.index_of(r.machine);  // fail fast on unseen machines
    }
    const std::size_t bs = std::max<std::size_t>(1, opt.batch_size);
    const std::size_t d = ckpt.params.head.embedding_dim();
    for (std::size_t start = 0; start < out.size(); start += bs) {
        const std::size_t end = std::min(out.size(), start + bs);
        std::vector<dsp::Waveform> waves;
        std::vector<ad::Tensor> mels;
        for (std::size_t k = start; k < end; ++k) {
            waves.push_back(dsp::read_wav(manifest.resolve(manifest.records[out[k].record])));
            mels.push_back(dsp::log_mel(waves.back(), ckpt.config.mel).values);
        }
        std::vector<const dsp::Waveform*> wp;
        std::vector<const ad::Tensor*> mp;
        for (std::size_t k = 0; k < waves.size(); ++k) {
            wp.push_back(&waves[k]);
            mp.push_back(&mels[k]);
        }
        const auto h = model::embed(ckpt.params, model::make_clip_batch(wp, mp));
        for (std::size_t k = start; k < end; ++k) {
            const std::size_t row = k - start;
            ad::Tensor hk({d}, std::vector<double>(h.raw() + row * d, h.raw() + (row + 1) * d));
            const auto cl = model::cosine_logits(hk, ckpt.params.head);
            const std::size_t y = ckpt.class_map.index_of(out[k].machine);
            out[k].score = anomaly_score(cl.cos, y, ckpt.config.loss, opt.margin_at_inference);
            out[k].theta_true = cl.theta[y];
        }
    }
    return out;
}

std::vector<ScoredClip> to_scored(std::span<const ClipAnalysis> clips) {
    std::vector<ScoredClip> out;
    for (const auto& c : clips) out.push_back(ScoredClip{c.machine, c.condition, c.score});
    return out;
}

std::vector<AngleRecord> to_angles(std::span<const ClipAnalysis> clips) {
    std::vector<AngleRecord> out;
    for (const auto& c : clips) out.push_back(AngleRecord{c.theta_true, c.condition});
    return out;
}

AngleHistogram angle_histogram(std::span<const AngleRecord> records, std::size_t bins) {
    if (bins == 0) throw ConfigError("angle histogram needs at least one bin");
    AngleHistogram h;
    const double width = std::numbers::pi / static_cast<double>(bins);
    for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(b == bins ? std::numbers::pi : width * static_cast<double>(b));
    h.normal.assign(bins, 0);
    h.anomaly.assign(bins, 0);
    for (const auto& r : records) {
        if (!(r.theta_true >= 0.0 && r.theta_true <= std::numbers::pi)) {
            throw Error("angle " + std::to_string(r.theta_true) + " outside [0, pi]");
        }
        const auto b = std::min(bins - 1, static_cast<std::size_t>(r.theta_true / width));
        ++(r.condition == data::Condition::kNormal ? h.normal : h.anomaly)[b];
    }
    return h;
}

void write_angle_histogram(const AngleHistogram& h, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << "bin_low,bin_high,count_normal,count_anomaly\n";
    char buf[96];
    for (std::size_t b = 0; b < h.normal.size(); ++b) {
        std::snprintf(buf, sizeof buf, "%.9f,%.9f,", h.edges[b], h.edges[b + 1]);
        out << buf << h.normal[b] << ',' << h.anomaly[b] << '\n';
    }
    if (!out) throw Error("failed writing angle histogram '" + path.string() + "'");
}

double median_angle(std::span<const AngleRecord> records, data::Condition condition) {
    std::vector<double> v;
    for (const auto& r : records) {
        if (r.condition == condition) v.push_back(r.theta_true);
    }
    if (v.empty()) throw Error("no " + std::string(data::to_string(condition)) + " clips to take a median over");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace asd::eval
