#include "asd/features/tgram.hpp"

#include "asd/autodiff/ops.hpp"
#include "asd/error.hpp"

namespace asd::features {

TgramParams make_tgram_params(const dsp::MelConfig& mel, std::size_t blocks) {
    mel.validate();
    const std::size_t c = mel.n_mels;
    TgramParams p;
    p.kernel = mel.n_fft;
    p.stride = mel.hop;
    p.padding = mel.n_fft / 2;
    p.front_weight = ad::Tensor({c, 1, p.kernel});
    p.front_bias = ad::Tensor({c});
    for (std::size_t i = 0; i < blocks; ++i) {
        p.blocks.push_back({ad::Tensor({c}, 1.0), ad::Tensor({c}), ad::Tensor({c, c, 3}), ad::Tensor({c})});
    }
    return p;
}

void check_tgram_geometry(const TgramParams& p, const dsp::MelConfig& mel) {
    if (p.front_weight.rank() != 3 || p.front_weight.dim(1) != 1) {
        throw ShapeError("tgram front weight must be [C, 1, K], got " + ad::to_string(p.front_weight.shape()));
    }
    if (p.channels() != mel.n_mels) {
        throw ShapeError("tgram has " + std::to_string(p.channels()) + " channels but the log-Mel has " +
                         std::to_string(mel.n_mels) + " bins");
    }
    if (p.kernel != mel.n_fft || p.stride != mel.hop || p.padding != mel.n_fft / 2 ||
        p.front_weight.dim(2) != p.kernel) {
        throw ShapeError("tgram kernel/stride/padding (" + std::to_string(p.kernel) + "/" + std::to_string(p.stride) + "/" +
                         std::to_string(p.padding) + ") do not match n_fft/hop (" + std::to_string(mel.n_fft) + "/" +
                         std::to_string(mel.hop) + ")");
    }
}

ad::NodeId tgram(ad::Graph& g, ad::NodeId wave, const TgramParams& p, const ad::ParamBinding& nodes) {
    auto x = ad::conv1d(g, wave, nodes(p.front_weight), nodes(p.front_bias), p.stride, p.padding);
    for (const auto& b : p.blocks) {
        x = ad::channel_norm(g, x, nodes(b.norm_gamma), nodes(b.norm_beta));
        x = ad::leaky_relu(g, x, kLeakySlope);
        x = ad::conv1d(g, x, nodes(b.conv_weight), nodes(b.conv_bias), 1, 1);
    }
    return x;
}

ad::Tensor tgram(const dsp::Waveform& wave, const TgramParams& p, const dsp::MelConfig& mel) {
    check_tgram_geometry(p, mel);
    if (wave.sample_rate != mel.sample_rate) {
        throw ShapeError("waveform rate " + std::to_string(wave.sample_rate) + " Hz does not match the mel config");
    }
    ad::Graph g;
    ad::ParamBinding nodes;
    p.visit([&](const std::string& name, const ad::Tensor& t) { nodes.bind(g, name, t, false); });
    const auto w = g.input("wave", ad::Tensor({1, 1, wave.samples.size()}, wave.samples));
    const auto out = tgram(g, w, p, nodes);
    const auto& v = g.value(out);
    if (v.dim(2) != mel.frame_count(wave.samples.size())) {
        throw ShapeError("tgram produced " + std::to_string(v.dim(2)) + " frames, log-Mel expects " +
                         std::to_string(mel.frame_count(wave.samples.size())));
    }
    return v.reshaped({v.dim(1), v.dim(2)});
}

}  // namespace asd::features
