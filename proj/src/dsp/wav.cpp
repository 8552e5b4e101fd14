#include "asd/dsp/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "asd/error.hpp"

namespace asd::dsp {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class Reader {
public:
    explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::size_t n, const char* what) const {
        if (remaining() < n) throw FormatError(std::string("truncated file while reading ") + what, pos_);
    }

    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
        pos_ += 4;
        return v;
    }

    std::uint16_t u16(const char* what) {
        need(2, what);
        const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
        pos_ += 2;
        return v;
    }

    std::string tag(const char* what) {
        need(4, what);
        std::string t(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
        pos_ += 4;
        return t;
    }

    void skip(std::size_t n, const char* what) {
        need(n, what);
        pos_ += n;
    }

    std::span<const unsigned char> take(std::size_t n, const char* what) {
        need(n, what);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::span<const unsigned char> bytes_;
    std::size_t pos_ = 0;
};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_tag(std::vector<unsigned char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

}  // namespace

Waveform parse_wav(std::span<const unsigned char> bytes) {
    Reader r(bytes);
    if (r.tag("RIFF tag") != "RIFF") throw FormatError("missing RIFF tag", 0);
    r.u32("RIFF size");
    if (r.tag("WAVE tag") != "WAVE") throw FormatError("missing WAVE tag", 8);

    bool have_fmt = false;
    std::uint16_t channels = 0, bits = 0;
    std::uint32_t rate = 0;
    while (true) {
        const std::size_t chunk_at = r.offset();
        if (r.remaining() == 0) throw FormatError("no data chunk", chunk_at);
        const std::string id = r.tag("chunk id");
        const std::uint32_t size = r.u32("chunk size");
        if (id == "fmt ") {
            const std::size_t fmt_at = r.offset();
            if (size < 16) throw FormatError("fmt chunk too small", fmt_at);
            r.need(size, "fmt chunk");
            std::uint16_t format = r.u16("audio format");
            channels = r.u16("channel count");
            rate = r.u32("sample rate");
            r.u32("byte rate");
            r.u16("block align");
            bits = r.u16("bits per sample");
            std::size_t consumed = 16;
            if (format == kFormatExtensible && size >= 40) {
                r.u16("extension size");
                r.u16("valid bits");
                r.u32("channel mask");
                format = r.u16("sub-format");
                r.skip(14, "sub-format guid");
                consumed = 40;
            }
            if (format != kFormatPcm) {
                throw FormatError("unsupported codec " + std::to_string(format) + " (only PCM is read)", fmt_at);
            }
            if (bits != 16) {
                throw FormatError("unsupported sample width " + std::to_string(bits) + " bits (need 16)", fmt_at + 14);
            }
            if (channels == 0) throw FormatError("zero channels", fmt_at + 2);
            if (rate == 0) throw FormatError("zero sample rate", fmt_at + 4);
            r.skip(size - consumed + (size & 1u), "fmt chunk padding");
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw FormatError("data chunk before fmt chunk", chunk_at);
            const std::size_t frame_bytes = 2u * channels;
            if (size % frame_bytes != 0) throw FormatError("data size is not a whole number of frames", chunk_at + 4);
            const auto data = r.take(size, "sample data");
            const std::size_t frames = size / frame_bytes;
            if (frames == 0) throw FormatError("empty data chunk", chunk_at);
            Waveform w;
            w.sample_rate = static_cast<int>(rate);
            w.samples.resize(frames);
            for (std::size_t f = 0; f < frames; ++f) {
                double acc = 0.0;
                for (std::size_t c = 0; c < channels; ++c) {
                    const std::size_t at = (f * channels + c) * 2;
                    const auto raw = static_cast<std::int16_t>(data[at] | (data[at + 1] << 8));
                    acc += static_cast<double>(raw) / 32768.0;
                }
                w.samples[f] = acc / channels;
            }
            return w;
        } else {
            r.skip(size + (size & 1u), "chunk body");
        }
    }
}

Waveform read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open wav file " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_wav(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what(), e.offset());
    }
}

std::vector<unsigned char> encode_wav(const Waveform& wave) {
    const auto frames = static_cast<std::uint32_t>(wave.samples.size());
    const std::uint32_t data_bytes = frames * 2;
    std::vector<unsigned char> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, kFormatPcm);
    put_u16(out, 1);
    put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
    put_u32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    put_tag(out, "data");
    put_u32(out, data_bytes);
    for (double s : wave.samples) {
        const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
        const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
        put_u16(out, static_cast<std::uint16_t>(v));
    }
    return out;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave) {
    const auto bytes = encode_wav(wave);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write wav file " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing wav file " + path.string());
}

}  // namespace asd::dsp
