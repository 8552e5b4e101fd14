#pragma once

#include "asd/autodiff/graph.hpp"
#include "asd/dsp/mel.hpp"

namespace asd::features {

struct TemporalAttention {
    ad::Tensor weights;   // [T], each in (0, 1)
    ad::Tensor attended;  // [F, T]
};

// Parameter-free gate: w[t] = sigmoid(mean_f x[f,t] + max_f x[f,t]),
// x_TA[f,t] = w[t] * x[f,t].
TemporalAttention temporal_attention(const dsp::Spectrogram& x_mel);
TemporalAttention temporal_attention(const ad::Tensor& x_mel);

struct AttentionNodes {
    ad::NodeId weights;   // [B, T]
    ad::NodeId attended;  // [B, F, T]
};

// x_mel: [B, F, T]
AttentionNodes temporal_attention(ad::Graph& g, ad::NodeId x_mel);

// Channel order is (TAgram, Sgram, Tgram).
struct FeatureStack {
    ad::Tensor channels;  // [3, F, T]

    std::size_t mels() const { return channels.dim(1); }
    std::size_t frames() const { return channels.dim(2); }
};

// Each input [F, T]; shapes must agree.
FeatureStack stack_features(const ad::Tensor& x_ta, const ad::Tensor& x_mel, const ad::Tensor& x_t);

// Each input [B, F, T] -> [B, 3, F, T].
ad::NodeId stack_features(ad::Graph& g, ad::NodeId x_ta, ad::NodeId x_mel, ad::NodeId x_t);

}  // namespace asd::features
