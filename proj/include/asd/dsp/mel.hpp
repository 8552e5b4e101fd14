#pragma once

#include <cstddef>
#include <filesystem>

#include "asd/autodiff/tensor.hpp"
#include "asd/dsp/wav.hpp"
#include "json.hpp"

namespace asd::dsp {

// Defaults give 128 x 313 for a 10-s, 16-kHz clip.
struct MelConfig {
    int sample_rate = 16000;
    std::size_t n_fft = 1024;
    std::size_t hop = 512;
    std::size_t n_mels = 128;
    double fmin = 0.0;
    double fmax = 8000.0;
    double log_floor = 1e-10;

    // Throws ConfigError on any violated invariant.
    void validate() const;
    // Frames produced under centre padding: floor(samples / hop) + 1.
    std::size_t frame_count(std::size_t samples) const { return samples / hop + 1; }

    friend bool operator==(const MelConfig&, const MelConfig&) = default;
};

void to_json(nlohmann::json& j, const MelConfig& c);
void from_json(const nlohmann::json& j, MelConfig& c);

struct Spectrogram {
    ad::Tensor values;  // [n_mels, frames]
    MelConfig config;

    std::size_t mels() const { return values.dim(0); }
    std::size_t frames() const { return values.dim(1); }
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular HTK-mel filters, each scaled to unit area: [n_mels, n_fft/2 + 1].
// Throws ConfigError when a filter falls between FFT bins and ends up empty.
ad::Tensor mel_filterbank(const MelConfig& cfg, int sample_rate);

// Hann-windowed power STFT with centre reflect padding, mel projection, then
// log(power + log_floor). Rejects waveforms whose rate differs from the config.
Spectrogram log_mel(const Waveform& wave, const MelConfig& cfg);

// Writes little-endian float32 values to raw_path and a JSON sidecar
// (shape + config) to raw_path + ".json".
void export_spectrogram(const Spectrogram& spec, const std::filesystem::path& raw_path);

}  // namespace asd::dsp
