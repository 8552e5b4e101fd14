#include "asd/train/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "asd/error.hpp"

namespace asd::train {
namespace {

constexpr unsigned char kMagic[8] = {'A', 'S', 'D', 'C', 'K', 'P', 'T', 0};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

nlohmann::json tgram_meta(const features::TgramParams& t) {
    return {{"channels", t.channels()},
            {"kernel", t.kernel},
            {"stride", t.stride},
            {"padding", t.padding},
            {"blocks", t.blocks.size()}};
}

}  // namespace

void round_to_float32(model::ModelParams& p) {
    p.visit([](const std::string&, ad::Tensor& t) {
        for (auto& v : t.data()) v = static_cast<double>(static_cast<float>(v));
    });
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
    if (c.config.model.num_classes != c.class_map.size() || c.params.head.classes() != c.class_map.size()) {
        throw ShapeError("checkpoint class map has " + std::to_string(c.class_map.size()) +
                         " entries but the model has " + std::to_string(c.params.head.classes()) + " classes");
    }
    nlohmann::json tensors = nlohmann::json::array();
    c.params.visit([&](const std::string& name, const ad::Tensor& t) {
        tensors.push_back({{"name", name}, {"shape", t.shape()}});
    });
    nlohmann::json header{{"format", "asdkit-checkpoint"},
                          {"version", kCheckpointVersion},
                          {"dims", c.config.model},
                          {"mel", c.config.mel},
                          {"tgram", tgram_meta(c.params.tgram)},
                          {"loss", c.config.loss},
                          {"train", c.config},
                          {"class_map", c.class_map},
                          {"rng_digest", c.rng_digest},
                          {"tensors", tensors}};
    const std::string text = header.dump();

    std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
    const std::uint64_t len = text.size();
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(len >> (8 * i)));
    out.insert(out.end(), text.begin(), text.end());
    c.params.visit([&](const std::string& name, const ad::Tensor& t) {
        for (double v : t.data()) {
            const float f = static_cast<float>(v);
            if (!std::isfinite(f)) throw NonFiniteError("parameter '" + name + "' is not finite in float32");
            put_u32(out, std::bit_cast<std::uint32_t>(f));
        }
    });
    return out;
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
    if (bytes.size() < 16) throw FormatError("checkpoint truncated before the header length", bytes.size());
    if (std::memcmp(bytes.data(), kMagic, 8) != 0) throw FormatError("not a checkpoint file (bad magic)", 0);
    const std::uint64_t len = get_u64(bytes.data() + 8);
    if (len > bytes.size() - 16) throw FormatError("checkpoint truncated inside the JSON header", bytes.size());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed checkpoint header: ") + e.what(), 16);
    }

    Checkpoint c;
    try {
        if (header.at("format") != "asdkit-checkpoint") throw FormatError("unknown checkpoint format", 16);
        const int version = header.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                                  std::to_string(kCheckpointVersion) + ")",
                              16);
        }
        c.config = header.at("train").get<TrainConfig>();
        c.config.model = header.at("dims").get<model::ModelDims>();
        c.config.mel = header.at("mel").get<dsp::MelConfig>();
        c.config.loss = header.at("loss").get<losses::LossConfig>();
        c.class_map = header.at("class_map").get<data::ClassMap>();
        c.rng_digest = header.at("rng_digest").get<std::string>();
        c.config.model.validate();
        c.config.mel.validate();
        if (c.class_map.size() != c.config.model.num_classes) {
            throw FormatError("class map size disagrees with the model dimensions", 16);
        }
        c.params = model::init_params(0, c.config.model, c.config.mel);
        if (header.at("tgram") != tgram_meta(c.params.tgram)) {
            throw FormatError("Tgram geometry in the header does not match the mel config", 16);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint header is missing fields: ") + e.what(), 16);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint header holds an invalid config: ") + e.what(), 16);
    }

    const auto& listed = header.at("tensors");
    std::size_t pos = 16 + len;
    std::size_t index = 0;
    c.params.visit([&](const std::string& name, ad::Tensor& t) {
        if (index >= listed.size() || listed[index].at("name") != name ||
            listed[index].at("shape").get<ad::Shape>() != t.shape()) {
            throw FormatError("tensor list in the header does not match the model layout at '" + name + "'", 16);
        }
        ++index;
        const std::size_t need = 4 * t.size();
        if (bytes.size() - pos < need) {
            throw FormatError("blob for '" + name + "' is truncated: need " + std::to_string(need) + " bytes, have " +
                                  std::to_string(bytes.size() - pos),
                              pos);
        }
        for (std::size_t i = 0; i < t.size(); ++i) {
            t[i] = std::bit_cast<float>(get_u32(bytes.data() + pos + 4 * i));
        }
        pos += need;
    });
    if (index != listed.size()) throw FormatError("header lists more tensors than the model has", 16);
    if (pos != bytes.size()) {
        throw FormatError(std::to_string(bytes.size() - pos) + " trailing bytes after the last blob", pos);
    }
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(c);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace asd::train
