#include "asd/model/params.hpp"

#include <cmath>
#include <random>

#include "asd/error.hpp"

namespace asd::model {

void ModelDims::validate() const {
    if (num_classes < 2) throw ConfigError("model needs at least 2 classes");
    if (embedding_dim == 0) throw ConfigError("embedding dimension must be positive");
    if (backbone_channels.empty()) throw ConfigError("backbone needs at least one block");
    for (auto c : backbone_channels) {
        if (c == 0) throw ConfigError("backbone block width must be positive");
    }
}

void to_json(nlohmann::json& j, const ModelDims& d) {
    j = nlohmann::json{{"num_classes", d.num_classes},
                       {"embedding_dim", d.embedding_dim},
                       {"backbone_channels", d.backbone_channels},
                       {"tgram_blocks", d.tgram_blocks}};
}

void from_json(const nlohmann::json& j, ModelDims& d) {
    j.at("num_classes").get_to(d.num_classes);
    j.at("embedding_dim").get_to(d.embedding_dim);
    j.at("backbone_channels").get_to(d.backbone_channels);
    j.at("tgram_blocks").get_to(d.tgram_blocks);
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const ad::Tensor& t) { n += t.size(); });
    return n;
}

namespace {

void glorot(ad::Tensor& w, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-a, a);
    for (auto& v : w.data()) v = u(rng);
}

}  // namespace

ModelParams init_params(std::uint64_t seed, const ModelDims& dims, const dsp::MelConfig& mel) {
    dims.validate();
    ModelParams p;
    p.tgram = features::make_tgram_params(mel, dims.tgram_blocks);
    p.backbone = make_backbone(3, dims.backbone_channels, dims.embedding_dim);
    p.head.weight = ad::Tensor({dims.num_classes, dims.embedding_dim});

    std::mt19937_64 rng(seed);
    // Tgram front conv: single input channel.
    glorot(p.tgram.front_weight, p.tgram.kernel, p.tgram.channels() * p.tgram.kernel, rng);
    for (auto& b : p.tgram.blocks) {
        const auto c = b.conv_weight.dim(0);
        glorot(b.conv_weight, c * 3, c * 3, rng);
    }
    for (auto& b : p.backbone.blocks) {
        const auto& s = b.conv_weight.shape();
        glorot(b.conv_weight, s[1] * s[2] * s[3], s[0] * s[2] * s[3], rng);
    }
    glorot(p.backbone.fc_weight, p.backbone.fc_weight.dim(0), p.backbone.fc_weight.dim(1), rng);

    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t d = dims.embedding_dim;
    for (std::size_t k = 0; k < dims.num_classes; ++k) {
        double* row = p.head.weight.raw() + k * d;
        double n2 = 0.0;
        do {
            n2 = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                row[i] = gauss(rng);
                n2 += row[i] * row[i];
            }
        } while (n2 == 0.0);
        const double n = std::sqrt(n2);
        for (std::size_t i = 0; i < d; ++i) row[i] /= n;
    }
    return p;
}

ad::ParamBinding bind_params(ad::Graph& g, const ModelParams& p, bool trainable) {
    ad::ParamBinding nodes;
    p.visit([&](const std::string& name, const ad::Tensor& t) { nodes.bind(g, name, t, trainable); });
    return nodes;
}

}  // namespace asd::model
