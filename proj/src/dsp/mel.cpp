#include "asd/dsp/mel.hpp"

#include <fftw3.h>

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "asd/error.hpp"

namespace asd::dsp {
namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// FFTW's planner is not re-entrant; execution on a finished plan is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n) {
        in_ = fftw_alloc_real(n);
        out_ = fftw_alloc_complex(n / 2 + 1);
        std::lock_guard lock(planner_mutex());
        plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
    }
    ~RealFft() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan_);
        fftw_free(in_);
        fftw_free(out_);
    }
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    double* input() { return in_; }
    void power(double* dst) {
        fftw_execute(plan_);
        for (std::size_t k = 0; k <= n_ / 2; ++k) dst[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }

private:
    std::size_t n_;
    double* in_;
    fftw_complex* out_;
    fftw_plan plan_;
};

}  // namespace

void MelConfig::validate() const {
    if (sample_rate <= 0) throw ConfigError("sample_rate must be positive");
    if (n_fft < 2) throw ConfigError("n_fft must be at least 2");
    if (hop == 0 || hop > n_fft) throw ConfigError("hop must satisfy 0 < hop <= n_fft");
    if (n_mels == 0) throw ConfigError("n_mels must be at least 1");
    if (!(fmin >= 0.0) || !(fmin < fmax) || !(fmax <= sample_rate / 2.0)) {
        throw ConfigError("mel band must satisfy 0 <= fmin < fmax <= sample_rate / 2");
    }
    if (!(log_floor > 0.0)) throw ConfigError("log_floor must be positive");
}

void to_json(nlohmann::json& j, const MelConfig& c) {
    j = nlohmann::json{{"sample_rate", c.sample_rate}, {"n_fft", c.n_fft}, {"hop", c.hop}, {"n_mels", c.n_mels},
                       {"fmin", c.fmin},          {"fmax", c.fmax},   {"log_floor", c.log_floor}};
}

void from_json(const nlohmann::json& j, MelConfig& c) {
    j.at("sample_rate").get_to(c.sample_rate);
    j.at("n_fft").get_to(c.n_fft);
    j.at("hop").get_to(c.hop);
    j.at("n_mels").get_to(c.n_mels);
    j.at("fmin").get_to(c.fmin);
    j.at("fmax").get_to(c.fmax);
    j.at("log_floor").get_to(c.log_floor);
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

ad::Tensor mel_filterbank(const MelConfig& cfg, int sample_rate) {
    cfg.validate();
    if (sample_rate != cfg.sample_rate) {
        throw ConfigError("filterbank sample rate " + std::to_string(sample_rate) + " differs from config " +
                          std::to_string(cfg.sample_rate));
    }
    const std::size_t bins = cfg.n_fft / 2 + 1;
    const double mel_lo = hz_to_mel(cfg.fmin);
    const double mel_hi = hz_to_mel(cfg.fmax);
    std::vector<double> edges(cfg.n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
    }

    ad::Tensor fb({cfg.n_mels, bins});
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
        const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
        const double area_norm = 2.0 / (right - left);
        double row_sum = 0.0;
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / static_cast<double>(cfg.n_fft);
            const double rising = (f - left) / (centre - left);
            const double falling = (right - f) / (right - centre);
            const double w = std::max(0.0, std::min(rising, falling)) * area_norm;
            fb[m * bins + k] = w;
            row_sum += w;
        }
        if (!(row_sum > 0.0)) {
            throw ConfigError("mel filter " + std::to_string(m) + " is empty: n_mels=" + std::to_string(cfg.n_mels) +
                              " too large for n_fft=" + std::to_string(cfg.n_fft));
        }
    }
    return fb;
}

Spectrogram log_mel(const Waveform& wave, const MelConfig& cfg) {
    cfg.validate();
    if (wave.sample_rate != cfg.sample_rate) {
        throw ConfigError("waveform sample rate " + std::to_string(wave.sample_rate) + " Hz is not the configured " +
                          std::to_string(cfg.sample_rate) + " Hz (resampling is not supported)");
    }
    const std::size_t n = wave.samples.size();
    if (n < cfg.n_fft) {
        throw ConfigError("waveform has " + std::to_string(n) + " samples, fewer than n_fft=" + std::to_string(cfg.n_fft));
    }
    for (double s : wave.samples) {
        if (!std::isfinite(s)) throw NonFiniteError("waveform contains non-finite samples");
    }

    const std::size_t pad = cfg.n_fft / 2;
    std::vector<double> padded(n + 2 * pad);
    for (std::size_t i = 0; i < padded.size(); ++i) {
        // numpy-style reflect: mirror without repeating the edge sample.
        auto j = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(pad);
        if (j < 0) j = -j;
        if (j >= static_cast<std::ptrdiff_t>(n)) j = 2 * static_cast<std::ptrdiff_t>(n - 1) - j;
        padded[i] = wave.samples[static_cast<std::size_t>(j)];
    }

    std::vector<double> window(cfg.n_fft);
    for (std::size_t i = 0; i < cfg.n_fft; ++i) {
        window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(cfg.n_fft));
    }

    const std::size_t frames = cfg.frame_count(n);
    const std::size_t bins = cfg.n_fft / 2 + 1;
    MatR power(bins, frames);
    std::vector<double> column(bins);
    RealFft fft(cfg.n_fft);
    for (std::size_t t = 0; t < frames; ++t) {
        const double* src = padded.data() + t * cfg.hop;
        for (std::size_t i = 0; i < cfg.n_fft; ++i) fft.input()[i] = src[i] * window[i];
        fft.power(column.data());
        for (std::size_t k = 0; k < bins; ++k) power(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = column[k];
    }

    const ad::Tensor fb = mel_filterbank(cfg, wave.sample_rate);
    Eigen::Map<const MatR> fbm(fb.raw(), static_cast<Eigen::Index>(cfg.n_mels), static_cast<Eigen::Index>(bins));
    Spectrogram spec{ad::Tensor({cfg.n_mels, frames}), cfg};
    Eigen::Map<MatR> out(spec.values.raw(), static_cast<Eigen::Index>(cfg.n_mels), static_cast<Eigen::Index>(frames));
    out.noalias() = fbm * power;
    for (auto& v : spec.values.data()) v = std::log(v + cfg.log_floor);
    return spec;
}

void export_spectrogram(const Spectrogram& spec, const std::filesystem::path& raw_path) {
    std::ofstream raw(raw_path, std::ios::binary);
    if (!raw) throw Error("cannot write " + raw_path.string());
    for (double v : spec.values.data()) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
        raw.write(reinterpret_cast<const char*>(b), 4);
    }
    nlohmann::json side{{"shape", {spec.mels(), spec.frames()}}, {"dtype", "float32-le"}, {"layout", "row-major mel x frame"},
                        {"mel_config", spec.config}};
    std::ofstream meta(raw_path.string() + ".json");
    if (!meta) throw Error("cannot write sidecar for " + raw_path.string());
    meta << side.dump(2) << "\n";
}

}  // namespace asd::dsp
