#include "asd/model/forward.hpp"

#include <algorithm>

#include "asd/error.hpp"
#include "asd/features/attention.hpp"

namespace asd::model {

ClipBatch make_clip_batch(std::span<const dsp::Waveform* const> waves, std::span<const ad::Tensor* const> mels) {
    if (waves.empty() || waves.size() != mels.size()) throw ShapeError("clip batch needs one spectrogram per waveform");
    const std::size_t b = waves.size();
    const std::size_t d = waves[0]->samples.size();
    const auto& ms = mels[0]->shape();
    if (ms.size() != 2) throw ShapeError("spectrogram must be [F, T], got " + ad::to_string(ms));
    const std::size_t n = ms[0] * ms[1];
    std::vector<double> w(b * d), m(b * n);
    for (std::size_t i = 0; i < b; ++i) {
        if (waves[i]->samples.size() != d) {
            throw ShapeError("clips in a batch must share a length: " + std::to_string(waves[i]->samples.size()) +
                             " vs " + std::to_string(d) + " samples");
        }
        if (mels[i]->shape() != ms) throw ShapeError("spectrograms in a batch must share a shape");
        std::copy(waves[i]->samples.begin(), waves[i]->samples.end(), w.begin() + i * d);
        std::copy(mels[i]->raw(), mels[i]->raw() + n, m.begin() + i * n);
    }
    return ClipBatch{ad::Tensor({b, 1, d}, std::move(w)), ad::Tensor({b, ms[0], ms[1]}, std::move(m))};
}

ad::NodeId feature_stack(ad::Graph& g, const ModelParams& p, const ad::ParamBinding& nodes, const ClipBatch& batch) {
    const auto wave = g.input("wave", batch.waves);
    const auto mel = g.input("log_mel", batch.mels);
    const auto x_t = features::tgram(g, wave, p.tgram, nodes);
    if (g.value(x_t).shape() != batch.mels.shape()) {
        throw ShapeError("Tgram shape " + ad::to_string(g.value(x_t).shape()) + " differs from Sgram shape " +
                         ad::to_string(batch.mels.shape()));
    }
    const auto att = features::temporal_attention(g, mel);
    return features::stack_features(g, att.attended, mel, x_t);
}

ad::Tensor embed(const ModelParams& p, const ClipBatch& batch) {
    ad::Graph g;
    const auto nodes = bind_params(g, p, false);
    const auto h = backbone_forward(g, feature_stack(g, p, nodes, batch), p.backbone, nodes);
    return g.value(h);
}

}  // namespace asd::model
