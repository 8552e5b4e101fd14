#include "asd/model/backbone.hpp"

#include "asd/autodiff/ops.hpp"
#include "asd/error.hpp"
#include "asd/features/tgram.hpp"

namespace asd::model {

Backbone make_backbone(std::size_t in_channels, const std::vector<std::size_t>& channels, std::size_t embedding_dim) {
    if (in_channels == 0 || channels.empty() || embedding_dim == 0) {
        throw ConfigError("backbone needs input channels, at least one block and a positive embedding size");
    }
    Backbone b;
    std::size_t cin = in_channels;
    for (std::size_t c : channels) {
        if (c == 0) throw ConfigError("backbone block width must be positive");
        b.blocks.push_back({ad::Tensor({c, cin, 3, 3}), ad::Tensor({c}), ad::Tensor({c}, 1.0), ad::Tensor({c})});
        cin = c;
    }
    b.fc_weight = ad::Tensor({cin, embedding_dim});
    b.fc_bias = ad::Tensor({embedding_dim});
    return b;
}

ad::NodeId backbone_forward(ad::Graph& g, ad::NodeId x, const Backbone& b, const ad::ParamBinding& nodes) {
    const auto& s = g.value(x).shape();
    if (s.size() != 4 || s[1] != b.in_channels()) {
        throw ShapeError("backbone expects [B, " + std::to_string(b.in_channels()) + ", F, T], got " + ad::to_string(s));
    }
    const std::size_t batch = s[0];
    auto y = x;
    for (const auto& blk : b.blocks) {
        y = ad::conv2d(g, y, nodes(blk.conv_weight), nodes(blk.conv_bias), 2, 1);
        y = ad::channel_norm(g, y, nodes(blk.norm_gamma), nodes(blk.norm_beta));
        y = ad::leaky_relu(g, y, features::kLeakySlope);
    }
    const auto& ys = g.value(y).shape();
    const auto pooled = ad::mean(g, ad::reshape(g, y, {ys[0], ys[1], ys[2] * ys[3]}), 2);  // [B, C]
    const auto h = ad::matmul(g, pooled, nodes(b.fc_weight));
    return ad::add(g, h, ad::expand(g, nodes(b.fc_bias), 0, batch));
}

ad::Tensor backbone_forward(const features::FeatureStack& stack, const Backbone& b) {
    const auto& c = stack.channels;
    if (c.rank() != 3) throw ShapeError("feature stack must be [3, F, T], got " + ad::to_string(c.shape()));
    ad::Graph g;
    ad::ParamBinding nodes;
    b.visit([&](const std::string& name, const ad::Tensor& t) { nodes.bind(g, name, t, false); });
    const auto x = g.input("stack", c.reshaped({1, c.dim(0), c.dim(1), c.dim(2)}));
    const auto h = backbone_forward(g, x, b, nodes);
    return g.value(h).reshaped({b.embedding_dim()});
}

}  // namespace asd::model
