#include "asd/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "asd/error.hpp"

namespace asd::data {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::vector<std::uint32_t> words;
    for (auto p : parts) {
        words.push_back(static_cast<std::uint32_t>(p));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

void add_detuned_harmonics(std::vector<double>& x, const SynthSpec& s, double detune, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);
    const double f0 = s.partials_hz.front() * detune;
    for (int k = 1; k <= 3; ++k) {
        const double f = f0 * (k + 0.5);
        if (f >= s.sample_rate / 2.0) break;
        const double a = s.anomaly_strength * s.amplitude * s.partial_gains[std::min(static_cast<std::size_t>(k - 1), s.partial_gains.size() - 1)];
        const double ph = phase(rng);
        for (std::size_t n = 0; n < x.size(); ++n) x[n] += a * std::sin(kTwoPi * f * n / s.sample_rate + ph);
    }
}

void add_transient_bursts(std::vector<double>& x, const SynthSpec& s, std::mt19937_64& rng) {
    const auto burst_len = static_cast<std::size_t>(0.025 * s.sample_rate);
    const auto bursts = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(3.0 * s.duration_s)));
    if (x.size() <= burst_len) return;
    std::uniform_int_distribution<std::size_t> where(0, x.size() - burst_len - 1);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    for (std::size_t b = 0; b < bursts; ++b) {
        const std::size_t start = where(rng);
        for (std::size_t i = 0; i < burst_len; ++i) {
            const double env = 0.5 - 0.5 * std::cos(kTwoPi * i / (burst_len - 1));
            x[start + i] += 2.0 * s.anomaly_strength * s.amplitude * env * noise(rng);
        }
    }
}

void add_band_noise(std::vector<double>& x, const SynthSpec& s, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> centre(1000.0, std::min(5000.0, 0.4 * s.sample_rate));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double fc = centre(rng);
    constexpr int kComponents = 24;
    const double a = s.anomaly_strength * s.amplitude / std::sqrt(static_cast<double>(kComponents)) * 1.5;
    for (int c = 0; c < kComponents; ++c) {
        const double f = fc + 400.0 * (unit(rng) - 0.5);
        const double ph = kTwoPi * unit(rng);
        for (std::size_t n = 0; n < x.size(); ++n) x[n] += a * std::sin(kTwoPi * f * n / s.sample_rate + ph);
    }
}

}  // namespace

std::string to_string(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::kNone: return "none";
        case AnomalyKind::kDetunedHarmonic: return "detuned_harmonic";
        case AnomalyKind::kTransientBursts: return "transient_bursts";
        case AnomalyKind::kBandNoise: return "band_noise";
    }
    return "unknown";
}

void SynthSpec::validate() const {
    if (partials_hz.empty()) throw ConfigError("synth spec needs at least one partial");
    if (partial_gains.size() != partials_hz.size()) throw ConfigError("synth spec needs one gain per partial");
    for (double f : partials_hz) {
        if (!(f > 0.0) || !(f < sample_rate / 2.0)) throw ConfigError("partial frequency outside (0, Nyquist)");
    }
    if (sample_rate <= 0) throw ConfigError("sample rate must be positive");
    if (!(duration_s > 0.0)) throw ConfigError("duration must be positive");
    if (!(amplitude >= 0.0) || !(noise_level >= 0.0) || !(anomaly_strength >= 0.0)) {
        throw ConfigError("amplitude, noise level and anomaly strength must be non-negative");
    }
    if (!(modulation_depth >= 0.0 && modulation_depth <= 1.0)) throw ConfigError("modulation depth must lie in [0, 1]");
    if (!(frequency_jitter >= 0.0 && frequency_jitter < 0.5)) throw ConfigError("frequency jitter must lie in [0, 0.5)");
}

dsp::Waveform synth_clip(const SynthSpec& s) {
    s.validate();
    const auto n = static_cast<std::size_t>(std::llround(s.duration_s * s.sample_rate));
    std::vector<double> x(n, 0.0);

    std::mt19937_64 rng(derive_seed({s.seed, 0}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double detune = 1.0 + s.frequency_jitter * (2.0 * unit(rng) - 1.0);
    const double mod_phase = kTwoPi * unit(rng);
    for (std::size_t k = 0; k < s.partials_hz.size(); ++k) {
        const double f = s.partials_hz[k] * detune;
        const double ph = kTwoPi * unit(rng);
        const double a = s.amplitude * s.partial_gains[k];
        if (f >= s.sample_rate / 2.0) continue;
        for (std::size_t i = 0; i < n; ++i) x[i] += a * std::sin(kTwoPi * f * i / s.sample_rate + ph);
    }
    if (s.modulation_depth > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            x[i] *= 1.0 + s.modulation_depth * std::sin(kTwoPi * s.modulation_hz * i / s.sample_rate + mod_phase);
        }
    }
    if (s.noise_level > 0.0) {
        std::normal_distribution<double> noise(0.0, s.noise_level);
        for (auto& v : x) v += noise(rng);
    }

    if (s.anomaly != AnomalyKind::kNone && s.anomaly_strength > 0.0) {
        std::mt19937_64 prng(derive_seed({s.seed, 1}));
        switch (s.anomaly) {
            case AnomalyKind::kDetunedHarmonic: add_detuned_harmonics(x, s, detune, prng); break;
            case AnomalyKind::kTransientBursts: add_transient_bursts(x, s, prng); break;
            case AnomalyKind::kBandNoise: add_band_noise(x, s, prng); break;
            case AnomalyKind::kNone: break;
        }
    }

    double peak = 0.0;
    for (double v : x) peak = std::max(peak, std::abs(v));
    if (peak > 0.9) {
        const double g = 0.9 / peak;
        for (auto& v : x) v *= g;
    }
    return dsp::Waveform{std::move(x), s.sample_rate};
}

SynthSpec machine_spec(std::size_t type_index, int id, double duration_s, std::uint64_t seed) {
    static constexpr double kTypeBase[] = {110.0, 170.0, 260.0, 390.0, 580.0, 870.0};
    const double base = type_index < std::size(kTypeBase) ? kTypeBase[type_index]
                                                          : 110.0 * std::pow(1.5, static_cast<double>(type_index));
    const double f0 = base * (1.0 + 0.06 * id);
    SynthSpec s;
    s.duration_s = duration_s;
    s.seed = seed;
    s.modulation_hz = 2.0 + static_cast<double>(type_index) + 0.5 * id;
    for (int k = 1; k <= 6; ++k) {
        const double f = f0 * k;
        if (f >= s.sample_rate / 2.0) break;
        s.partials_hz.push_back(f);
        // Odd/even balance differs between IDs of the same type.
        const double tilt = (k % 2 == id % 2) ? 1.0 : 0.6;
        s.partial_gains.push_back(tilt / k);
    }
    return s;
}

Manifest write_synthetic_corpus(const CorpusConfig& c, const std::filesystem::path& out_dir) {
    if (c.machine_types == 0 || c.ids_per_type == 0 || c.train_clips == 0) {
        throw ConfigError("corpus needs at least one machine type, one ID and one train clip");
    }
    if (c.machine_types * c.ids_per_type < 2) throw ConfigError("corpus needs at least two machines (classes)");
    std::filesystem::create_directories(out_dir / "train");
    std::filesystem::create_directories(out_dir / "test");

    const auto& names = machine_type_names();
    std::vector<ClipRecord> records;
    constexpr AnomalyKind kKinds[] = {AnomalyKind::kDetunedHarmonic, AnomalyKind::kTransientBursts,
                                      AnomalyKind::kBandNoise};

    for (std::size_t t = 0; t < c.machine_types; ++t) {
        const std::string type = t < names.size() ? names[t] : "type" + std::to_string(t);
        for (std::size_t i = 0; i < c.ids_per_type; ++i) {
            const int id = static_cast<int>(i);
            const auto emit = [&](Split split, Condition cond, std::size_t n, AnomalyKind kind) {
                const auto seed = derive_seed({c.seed, t, i, static_cast<std::uint64_t>(split),
                                               static_cast<std::uint64_t>(cond), n});
                auto spec = machine_spec(t, id, c.duration_s, seed);
                if (cond == Condition::kAnomaly) {
                    spec.anomaly = kind;
                    spec.anomaly_strength = c.anomaly_strength;
                }
                const std::string file = std::string(to_string(cond)) + "_" + type + "_id_" + std::to_string(id) + "_" +
                                         std::to_string(n) + ".wav";
                const auto rel = std::filesystem::path(std::string(to_string(split))) / file;
                dsp::write_wav(out_dir / rel, synth_clip(spec));
                records.push_back(ClipRecord{rel, MachineKey{type, id}, split, cond, 0});
            };
            for (std::size_t n = 0; n < c.train_clips; ++n) emit(Split::kTrain, Condition::kNormal, n, AnomalyKind::kNone);
            for (std::size_t n = 0; n < c.test_clips; ++n) emit(Split::kTest, Condition::kNormal, n, AnomalyKind::kNone);
            for (std::size_t n = 0; n < c.test_clips; ++n) {
                emit(Split::kTest, Condition::kAnomaly, n, kKinds[n % std::size(kKinds)]);
            }
        }
    }
    write_manifest(out_dir / "manifest.csv", records);
    return parse_manifest(out_dir / "manifest.csv");
}

}  // namespace asd::data
