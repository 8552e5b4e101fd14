#pragma once

#include <span>

#include "asd/model/params.hpp"

namespace asd::model {

// Raw waveforms and their (parameter-free) log-Mel spectrograms for one batch.
struct ClipBatch {
    ad::Tensor waves;  // [B, 1, D]
    ad::Tensor mels;   // [B, F, T]

    std::size_t size() const { return waves.dim(0); }
};

// All waveforms must share a length; each spectrogram must be [F, T] for it.
ClipBatch make_clip_batch(std::span<const dsp::Waveform* const> waves, std::span<const ad::Tensor* const> mels);

// TASTgram stack [B, 3, F, T]: (temporal attention of the Sgram, Sgram, Tgram).
ad::NodeId feature_stack(ad::Graph& g, const ModelParams& p, const ad::ParamBinding& nodes, const ClipBatch& batch);

// Unnormalised embeddings [B, d], no gradients recorded.
ad::Tensor embed(const ModelParams& p, const ClipBatch& batch);

}  // namespace asd::model
