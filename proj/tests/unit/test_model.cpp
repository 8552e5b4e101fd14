#include <cmath>
#include <numbers>

#include "asd/autodiff/gradcheck.hpp"
#include "asd/autodiff/ops.hpp"
#include "asd/error.hpp"
#include "asd/model/forward.hpp"
#include "asd/model/params.hpp"
#include "doctest.h"
#include "support/helpers.hpp"

using namespace asd;
using namespace asd::model;
using asd::testing::random_tensor;

namespace {

ModelDims small_dims(std::size_t k = 3) {
    ModelDims d;
    d.num_classes = k;
    d.embedding_dim = 6;
    d.backbone_channels = {4, 5};
    d.tgram_blocks = 1;
    return d;
}

dsp::MelConfig small_mel() {
    dsp::MelConfig m;
    m.n_mels = 16;
    return m;
}

ProjectionHead head_of(std::vector<std::vector<double>> rows) {
    ProjectionHead h;
    std::vector<double> flat;
    for (auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    h.weight = ad::Tensor({rows.size(), rows[0].size()}, flat);
    return h;
}

}  // namespace

TEST_CASE("backbone: zero input and zero biases give a zero embedding") {
    auto b = make_backbone(3, {4, 8}, 5);
    std::mt19937_64 rng(31);
    for (auto& blk : b.blocks) blk.conv_weight = random_tensor(blk.conv_weight.shape(), rng);
    b.fc_weight = random_tensor(b.fc_weight.shape(), rng);
    const auto h = backbone_forward(features::FeatureStack{ad::Tensor({3, 16, 12})}, b);
    CHECK(h.shape() == ad::Shape{5});
    for (double v : h.data()) CHECK(v == 0.0);
}

TEST_CASE("backbone: embedding size does not depend on F x T, wrong channel count rejected") {
    std::mt19937_64 rng(32);
    const auto b = asd::testing::small_backbone(rng);
    for (auto [f, t] : {std::pair<std::size_t, std::size_t>{8, 8}, {13, 5}, {32, 63}}) {
        const auto h = backbone_forward(features::FeatureStack{random_tensor({3, f, t}, rng)}, b);
        CHECK(h.size() == 5);
    }
    CHECK_THROWS_AS(backbone_forward(features::FeatureStack{ad::Tensor({2, 8, 8})}, b), ShapeError);
}

TEST_CASE("init_params: deterministic, seed sensitive, Glorot bounds, unit head rows") {
    const auto a = init_params(7, small_dims(), small_mel());
    const auto b = init_params(7, small_dims(), small_mel());
    const auto c = init_params(8, small_dims(), small_mel());
    bool same = true, differs = false;
    std::vector<ad::Tensor> ta, tb, tc;
    a.visit([&](const std::string&, const ad::Tensor& t) { ta.push_back(t); });
    b.visit([&](const std::string&, const ad::Tensor& t) { tb.push_back(t); });
    c.visit([&](const std::string&, const ad::Tensor& t) { tc.push_back(t); });
    for (std::size_t i = 0; i < ta.size(); ++i) {
        same = same && ta[i] == tb[i];
        differs = differs || ta[i] != tc[i];
    }
    CHECK(same);
    CHECK(differs);
    for (std::size_t k = 0; k < a.head.classes(); ++k) {
        double n = 0.0;
        for (std::size_t i = 0; i < a.head.embedding_dim(); ++i) n += std::pow(a.head.weight[k * 6 + i], 2);
        CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
    }
    const auto& w = a.backbone.blocks[0].conv_weight;
    const double bound = std::sqrt(6.0 / (3 * 9 + 4 * 9));
    for (double v : w.data()) CHECK(std::abs(v) <= bound);
    for (double v : a.backbone.blocks[0].conv_bias.data()) CHECK(v == 0.0);
    for (double v : a.backbone.blocks[0].norm_gamma.data()) CHECK(v == 1.0);
    CHECK_THROWS_AS(init_params(0, small_dims(1), small_mel()), ConfigError);
}

TEST_CASE("cosine_logits closed forms") {
    SUBCASE("aligned with w_1, orthogonal to w_2") {
        const auto head = head_of({{1, 0}, {0, 1}});
        const auto r = cosine_logits(ad::Tensor({2}, std::vector<double>{3.0, 0.0}), head);
        CHECK(r.cos[0] == 1.0 - ad::kArccosEpsilon);
        CHECK(r.theta[0] <= std::sqrt(2 * ad::kArccosEpsilon) * (1 + 1e-6));
        CHECK(r.cos[1] == 0.0);
        CHECK(r.theta[1] == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
    }
    SUBCASE("h = [0.6, 0.8], w = [1, 0]") {
        const auto r = cosine_logits(ad::Tensor({2}, std::vector<double>{0.6, 0.8}), head_of({{1, 0}, {0, 1}}));
        CHECK(r.cos[0] == doctest::Approx(0.6).epsilon(1e-15));
        CHECK(r.theta[0] == doctest::Approx(0.927295).epsilon(1e-6));
    }
    SUBCASE("zero embedding is an error") {
        CHECK_THROWS_AS(cosine_logits(ad::Tensor({2}), head_of({{1, 0}, {0, 1}})), Error);
    }
}

TEST_CASE("cosine_logits: cos(theta) consistency and scale invariance") {
    std::mt19937_64 rng(33);
    ProjectionHead head{random_tensor({5, 7}, rng)};
    for (int i = 0; i < 50; ++i) {
        const auto h = random_tensor({7}, rng);
        const auto r = cosine_logits(h, head);
        ad::Tensor scaled = h;
        for (auto& v : scaled.data()) v *= 3.7;
        const auto rs = cosine_logits(scaled, head);
        for (std::size_t k = 0; k < 5; ++k) {
            CHECK(std::abs(std::cos(r.theta[k]) - r.cos[k]) <= 1e-12);
            CHECK(std::abs(rs.theta[k] - r.theta[k]) <= 1e-6);
            CHECK(r.theta[k] > 0.0);
            CHECK(r.theta[k] < std::numbers::pi);
        }
    }
}

TEST_CASE("graph cosine logits agree with the plain version") {
    std::mt19937_64 rng(34);
    ProjectionHead head{random_tensor({4, 6}, rng)};
    const auto h = random_tensor({3, 6}, rng);
    ad::Graph g;
    const auto c = g.value(cosine_logits(g, g.input("h", h), g.input("w", head.weight)));
    for (std::size_t b = 0; b < 3; ++b) {
        ad::Tensor row({6}, std::vector<double>(h.raw() + b * 6, h.raw() + b * 6 + 6));
        const auto r = cosine_logits(row, head);
        for (std::size_t k = 0; k < 4; ++k) CHECK(c[b * 4 + k] == doctest::Approx(r.cos[k]).epsilon(1e-14));
    }
}

TEST_CASE("backbone: fixed seed and input give bit-identical embeddings") {
    const auto p = init_params(3, small_dims(), small_mel());
    std::mt19937_64 rng(35);
    const features::FeatureStack s{random_tensor({3, 16, 10}, rng)};
    CHECK(backbone_forward(s, p.backbone) == backbone_forward(s, p.backbone));
    const auto q = init_params(3, small_dims(), small_mel());
    CHECK(backbone_forward(s, q.backbone) == backbone_forward(s, p.backbone));
}

TEST_CASE("backbone: gradient of sum(embedding) matches finite differences") {
    std::mt19937_64 rng(36);
    double worst = 0.0;
    int accepted = 0;
    while (accepted < 10) {
        const auto b = asd::testing::small_backbone(rng);
        const auto x = random_tensor({2, 3, 8, 7}, rng);
        std::map<std::string, ad::Tensor> inputs{{"x", x}};
        b.visit([&](const std::string& name, const ad::Tensor& t) {
            if (name.find("conv.bias") == std::string::npos) inputs[name] = t;
        });
        const ad::GraphBuilder build = [&](ad::Graph& g, const ad::NodeMap& n) {
            ad::ParamBinding nodes;
            b.visit([&](const std::string& name, const ad::Tensor& t) {
                if (n.count(name)) nodes.alias(t, n.at(name));
                else nodes.bind(g, name, t, false);
            });
            return ad::sum_all(g, backbone_forward(g, n.at("x"), b, nodes));
        };
        const auto r = ad::check_gradients(build, inputs, {1e-5, 15, static_cast<std::uint64_t>(accepted)});
        if (r.kink_margin < 1e-3) continue;
        worst = std::max(worst, r.max_relative_error);
        ++accepted;
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("full pipeline embeds a batch of clips") {
    const auto p = init_params(1, small_dims(), small_mel());
    std::mt19937_64 rng(37);
    std::vector<dsp::Waveform> waves(2);
    std::vector<ad::Tensor> mels;
    for (auto& w : waves) {
        const auto r = random_tensor({4096}, rng, -0.3, 0.3);
        w.samples.assign(r.data().begin(), r.data().end());
        mels.push_back(dsp::log_mel(w, small_mel()).values);
    }
    const std::vector<const dsp::Waveform*> wp{&waves[0], &waves[1]};
    const std::vector<const ad::Tensor*> mp{&mels[0], &mels[1]};
    const auto h = embed(p, make_clip_batch(wp, mp));
    CHECK(h.shape() == ad::Shape{2, 6});
    // Samples are independent: embedding one clip alone gives the same row.
    const auto h0 = embed(p, make_clip_batch(std::span(wp).first(1), std::span(mp).first(1)));
    for (std::size_t i = 0; i < 6; ++i) CHECK(h0[i] == doctest::Approx(h[i]).epsilon(1e-12));
    waves[1].samples.pop_back();
    CHECK_THROWS_AS(make_clip_batch(wp, mp), ShapeError);
}
