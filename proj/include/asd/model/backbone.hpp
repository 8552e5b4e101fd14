#pragma once

#include <string>
#include <vector>

#include "asd/autodiff/binding.hpp"
#include "asd/features/attention.hpp"

namespace asd::model {

// Small conv classifier standing in for a full MobileFaceNet. Each block is
// conv 3x3 stride 2 -> channel norm -> leaky ReLU; then global average pool
// and a linear map to the embedding.
struct Backbone {
    struct Block {
        ad::Tensor conv_weight;  // [Cout, Cin, 3, 3]
        ad::Tensor conv_bias;    // [Cout]
        ad::Tensor norm_gamma;   // [Cout]
        ad::Tensor norm_beta;    // [Cout]
    };

    std::vector<Block> blocks;
    ad::Tensor fc_weight;  // [C_last, d]
    ad::Tensor fc_bias;    // [d]

    std::size_t in_channels() const { return blocks.front().conv_weight.dim(1); }
    std::size_t embedding_dim() const { return fc_weight.dim(1); }

    template <class F>
    void visit(F&& f) {
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const std::string p = "backbone.block" + std::to_string(i) + ".";
            f(p + "conv.weight", blocks[i].conv_weight);
            f(p + "conv.bias", blocks[i].conv_bias);
            f(p + "norm.gamma", blocks[i].norm_gamma);
            f(p + "norm.beta", blocks[i].norm_beta);
        }
        f("backbone.fc.weight", fc_weight);
        f("backbone.fc.bias", fc_bias);
    }
    template <class F>
    void visit(F&& f) const {
        const_cast<Backbone*>(this)->visit([&](const std::string& n, const ad::Tensor& t) { f(n, t); });
    }
};

// Zero weights, unit gammas. `channels` lists conv output widths.
Backbone make_backbone(std::size_t in_channels, const std::vector<std::size_t>& channels, std::size_t embedding_dim);

// x: [B, 3, F, T] -> [B, d]
ad::NodeId backbone_forward(ad::Graph& g, ad::NodeId x, const Backbone& b, const ad::ParamBinding& nodes);

// Unnormalised embedding of a single stack: [d].
ad::Tensor backbone_forward(const features::FeatureStack& stack, const Backbone& b);

}  // namespace asd::model
