#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace asd::dsp {

// Mono clip with samples in [-1, 1].
struct Waveform {
    std::vector<double> samples;
    int sample_rate = 16000;
};

// Reads a RIFF/WAVE file holding 16-bit PCM. Multi-channel audio is averaged
// to mono; samples are scaled by 1/32768. Failures throw FormatError with the
// byte offset of the offending field.
Waveform read_wav(const std::filesystem::path& path);
Waveform parse_wav(std::span<const unsigned char> bytes);

// Writes 16-bit mono PCM, clipping to the representable range.
void write_wav(const std::filesystem::path& path, const Waveform& wave);
std::vector<unsigned char> encode_wav(const Waveform& wave);

}  // namespace asd::dsp
