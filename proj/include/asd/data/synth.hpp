#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asd/data/manifest.hpp"
#include "asd/dsp/wav.hpp"

namespace asd::data {

enum class AnomalyKind { kNone, kDetunedHarmonic, kTransientBursts, kBandNoise };

std::string to_string(AnomalyKind kind);

// Recipe for one synthetic machine clip. A normal clip and its anomalous
// counterpart differ only in `anomaly` / `anomaly_strength`; the perturbation
// draws from its own random stream so the normal part stays bit-identical.
struct SynthSpec {
    std::vector<double> partials_hz;    // base frequencies of the machine
    std::vector<double> partial_gains;  // relative amplitude per partial
    double amplitude = 0.25;
    double modulation_depth = 0.3;
    double modulation_hz = 4.0;
    double noise_level = 0.02;
    double frequency_jitter = 0.005;  // per-clip relative detuning of all partials
    AnomalyKind anomaly = AnomalyKind::kNone;
    double anomaly_strength = 0.0;
    double duration_s = 2.0;
    int sample_rate = 16000;
    std::uint64_t seed = 0;

    void validate() const;
};

// Deterministic given the spec; peak magnitude is at most 0.9.
dsp::Waveform synth_clip(const SynthSpec& spec);

inline const std::vector<std::string>& machine_type_names() {
    static const std::vector<std::string> names{"fan", "pump", "slider", "valve", "toycar", "toyconveyor"};
    return names;
}

// Normal-condition recipe for machine `id` of machine type number `type_index`.
SynthSpec machine_spec(std::size_t type_index, int id, double duration_s, std::uint64_t seed);

struct CorpusConfig {
    std::size_t machine_types = 4;
    std::size_t ids_per_type = 2;
    std::size_t train_clips = 100;  // normal train clips per machine
    std::size_t test_clips = 25;    // normal and anomalous test clips per machine (each)
    double duration_s = 2.0;
    double anomaly_strength = 1.0;
    std::uint64_t seed = 0;
};

// Writes WAV files under out_dir/{train,test}/ plus out_dir/manifest.csv and
// returns the parsed manifest.
Manifest write_synthetic_corpus(const CorpusConfig& config, const std::filesystem::path& out_dir);

}  // namespace asd::data
