#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "asd/autodiff/binding.hpp"
#include "asd/autodiff/graph.hpp"
#include "asd/dsp/mel.hpp"

namespace asd::features {

inline constexpr double kLeakySlope = 0.01;

// Learned temporal front end on the raw waveform: a large-kernel conv whose
// kernel/stride mirror the STFT window/hop (so its frames line up with the
// log-Mel frames), then blocks of channel norm -> leaky ReLU -> conv(k=3).
struct TgramParams {
    struct Block {
        ad::Tensor norm_gamma;   // [C]
        ad::Tensor norm_beta;    // [C]
        ad::Tensor conv_weight;  // [C, C, 3]
        ad::Tensor conv_bias;    // [C]
    };

    std::size_t kernel = 1024;
    std::size_t stride = 512;
    std::size_t padding = 512;
    ad::Tensor front_weight;  // [C, 1, kernel]
    ad::Tensor front_bias;    // [C]
    std::vector<Block> blocks;

    std::size_t channels() const { return front_weight.dim(0); }

    template <class F>
    void visit(F&& f) {
        f("tgram.front.weight", front_weight);
        f("tgram.front.bias", front_bias);
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::string p = "tgram.block" + std::to_string(i) + ".";
            f(p + "norm.gamma", blocks[i].norm_gamma);
            f(p + "norm.beta", blocks[i].norm_beta);
            f(p + "conv.weight", blocks[i].conv_weight);
            f(p + "conv.bias", blocks[i].conv_bias);
        }
    }
    template <class F>
    void visit(F&& f) const {
        const_cast<TgramParams*>(this)->visit([&](const std::string& n, const ad::Tensor& t) { f(n, t); });
    }
};

// Zero-initialised parameters whose geometry matches the mel config:
// channels = n_mels, kernel = n_fft, stride = hop, padding = n_fft / 2.
TgramParams make_tgram_params(const dsp::MelConfig& mel, std::size_t blocks = 3);

// Throws ShapeError if the parameters cannot produce frames aligned with `mel`.
void check_tgram_geometry(const TgramParams& p, const dsp::MelConfig& mel);

// wave: [B, 1, D] -> [B, C, floor(D / stride) + 1]
ad::NodeId tgram(ad::Graph& g, ad::NodeId wave, const TgramParams& p, const ad::ParamBinding& nodes);

// Single-clip convenience: [n_mels, frames].
ad::Tensor tgram(const dsp::Waveform& wave, const TgramParams& p, const dsp::MelConfig& mel);

}  // namespace asd::features
