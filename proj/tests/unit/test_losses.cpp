#include <cmath>
#include <numeric>

#include "asd/autodiff/gradcheck.hpp"
#include "asd/autodiff/ops.hpp"
#include "asd/error.hpp"
#include "asd/losses/losses.hpp"
#include "asd/losses/mixup.hpp"
#include "doctest.h"
#include "support/helpers.hpp"

using namespace asd;
using namespace asd::losses;
using asd::testing::random_tensor;

namespace {

LossConfig cfg(double m, double s) {
    LossConfig c;
    c.margin = m;
    c.scale = s;
    return c;
}

const std::vector<double> kOneZero{1.0, 0.0};

}  // namespace

TEST_CASE("cross entropy closed forms") {
    CHECK(cross_entropy(std::vector<double>(4, 0.7), 2) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    const double big = cross_entropy(std::vector<double>{1000.0, 0.0}, 0);
    CHECK(std::isfinite(big));
    CHECK(big == doctest::Approx(0.0));
    CHECK(cross_entropy(kOneZero, 0) == doctest::Approx(0.313262).epsilon(1e-6));
    CHECK(cross_entropy(kOneZero, std::vector<double>{1.0, 0.0}) == cross_entropy(kOneZero, 0));
    CHECK_THROWS(cross_entropy(kOneZero, 2));
}

TEST_CASE("arcface closed forms") {
    CHECK(arcface_loss(kOneZero, 0, cfg(0.0, 1.0)) == doctest::Approx(0.313262).epsilon(1e-6));
    const auto logits = margin_logits(kOneZero, 0, cfg(0.7, 30.0));
    CHECK(logits[0] == doctest::Approx(22.945251).epsilon(1e-6));
    CHECK(logits[1] == 0.0);
    CHECK(arcface_loss(kOneZero, 0, cfg(0.7, 30.0)) == doctest::Approx(1.08e-10).epsilon(0.01));
}

TEST_CASE("arcface with m = 0 equals cross entropy on s * cos exactly") {
    std::mt19937_64 rng(41);
    for (int i = 0; i < 100; ++i) {
        const auto c = random_tensor({5}, rng, -0.99, 0.99);
        std::vector<double> cs(c.data().begin(), c.data().end());
        std::vector<double> scaled;
        for (double v : cs) scaled.push_back(30.0 * v);
        const std::size_t y = static_cast<std::size_t>(i) % 5;
        CHECK(arcface_loss(cs, y, cfg(0.0, 30.0)) == cross_entropy(scaled, y));
    }
}

TEST_CASE("arcmix closed forms and degenerate cases") {
    const auto c = cfg(0.7, 30.0);
    CHECK(arcmix_loss(kOneZero, 0, 1, 0.3, c) == doctest::Approx(34.528571432).epsilon(1e-10));
    CHECK(arcface_loss(kOneZero, 1, c) == doctest::Approx(49.326530617).epsilon(1e-10));
    std::mt19937_64 rng(42);
    const auto r = random_tensor({4}, rng, -0.9, 0.9);
    const std::vector<double> cs(r.data().begin(), r.data().end());
    CHECK(arcmix_loss(cs, 2, 1, 1.0, c) == arcface_loss(cs, 2, c));
    for (double lam : {0.0, 0.2, 0.9}) CHECK(arcmix_loss(cs, 3, 3, lam, c) == doctest::Approx(arcface_loss(cs, 3, c)).epsilon(1e-14));
}

TEST_CASE("noisy arcmix closed forms and identities") {
    const auto c = cfg(0.7, 30.0);
    CHECK(noisy_arcmix_loss(kOneZero, 0, 1, 0.0, c) == doctest::Approx(22.945265619).epsilon(1e-10));
    CHECK(noisy_arcmix_loss(kOneZero, 0, 1, 0.5, c) == doctest::Approx(11.472632809).epsilon(1e-10));
    std::mt19937_64 rng(43);
    for (int i = 0; i < 100; ++i) {
        const auto r = random_tensor({6}, rng, -0.99, 0.99);
        const std::vector<double> cs(r.data().begin(), r.data().end());
        const std::size_t yi = static_cast<std::size_t>(i) % 6, yj = static_cast<std::size_t>(i * 7 + 1) % 6;
        const double lam = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        CHECK(std::abs(noisy_arcmix_loss(cs, yi, yj, 1.0, c) - arcface_loss(cs, yi, c)) <= 1e-12);
        // Soft-label linearity over identical logits.
        const auto logits = margin_logits(cs, yi, c);
        const double lin = lam * cross_entropy(logits, yi) + (1 - lam) * cross_entropy(logits, yj);
        CHECK(std::abs(noisy_arcmix_loss(cs, yi, yj, lam, c) - lin) <= 1e-12);
    }
}

TEST_CASE("arcmix and noisy arcmix differ when labels differ and m > 0") {
    const auto c = cfg(0.7, 30.0);
    std::mt19937_64 rng(44);
    const auto r = random_tensor({4}, rng, -0.9, 0.9);
    const std::vector<double> cs(r.data().begin(), r.data().end());
    CHECK(arcmix_loss(cs, 0, 1, 0.4, c) != noisy_arcmix_loss(cs, 0, 1, 0.4, c));
}

TEST_CASE("arcface is non-decreasing in the margin while theta + m <= pi") {
    std::mt19937_64 rng(45);
    for (int i = 0; i < 50; ++i) {
        const auto r = random_tensor({5}, rng, -0.99, 0.99);
        const std::vector<double> cs(r.data().begin(), r.data().end());
        const std::size_t y = static_cast<std::size_t>(i) % 5;
        if (std::acos(cs[y]) + 0.7 > 3.141592653589793) continue;
        double prev = -1.0;
        for (int k = 0; k <= 7; ++k) {
            const double l = arcface_loss(cs, y, cfg(0.1 * k, 30.0));
            CHECK(l >= prev);
            prev = l;
        }
    }
}

TEST_CASE("losses are non-negative; softmax sums to one; soft labels are distributions") {
    std::mt19937_64 rng(46);
    const auto c = cfg(0.7, 30.0);
    for (int i = 0; i < 100; ++i) {
        const auto r = random_tensor({5}, rng, -0.99, 0.99);
        const std::vector<double> cs(r.data().begin(), r.data().end());
        const double lam = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        const std::size_t yi = static_cast<std::size_t>(i) % 5, yj = static_cast<std::size_t>(i / 5) % 5;
        CHECK(arcface_loss(cs, yi, c) >= 0.0);
        CHECK(arcmix_loss(cs, yi, yj, lam, c) >= 0.0);
        CHECK(noisy_arcmix_loss(cs, yi, yj, lam, c) >= 0.0);
        const auto p = softmax(margin_logits(cs, yi, c));
        CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-9);
        const auto y = soft_label(5, yi, yj, lam);
        CHECK(std::abs(std::accumulate(y.begin(), y.end(), 0.0) - 1.0) <= 1e-9);
        for (double v : y) CHECK(v >= 0.0);
    }
}

TEST_CASE("graph losses agree with the plain ones") {
    std::mt19937_64 rng(47);
    const auto c = cfg(0.7, 30.0);
    const auto cos = random_tensor({3, 4}, rng, -0.95, 0.95);
    const std::vector<std::size_t> yi{0, 3, 1}, yj{2, 3, 0};
    const double lam = 0.35;
    const auto row = [&](std::size_t b) {
        return std::vector<double>(cos.raw() + b * 4, cos.raw() + b * 4 + 4);
    };
    ad::Graph g;
    const auto cn = g.input("cos", cos);
    const auto na = g.value(soft_cross_entropy(g, margin_logits(g, cn, yi, c), [&] {
                         auto t = one_hot(yi, 4);
                         for (std::size_t b = 0; b < 3; ++b) {
                             t[b * 4 + yi[b]] = lam;
                             t[b * 4 + yj[b]] += 1 - lam;
                         }
                         return t;
                     }())).item();
    double expect = 0.0;
    for (std::size_t b = 0; b < 3; ++b) expect += noisy_arcmix_loss(row(b), yi[b], yj[b], lam, c) / 3.0;
    CHECK(na == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("loss gradients w.r.t. cos theta match finite differences at 100 points") {
    std::mt19937_64 rng(48);
    const auto c = cfg(0.7, 30.0);
    for (auto variant : {LossVariant::kArcFace, LossVariant::kArcMix, LossVariant::kNoisyArcMix}) {
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto cos = random_tensor({2, 4}, rng, -0.99, 0.99);
            const std::vector<std::size_t> yi{static_cast<std::size_t>(i) % 4, 1}, yj{2, static_cast<std::size_t>(i / 4) % 4};
            const double lam = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            const ad::GraphBuilder build = [&](ad::Graph& g, const ad::NodeMap& n) {
                const auto x = n.at("cos");
                switch (variant) {
                    case LossVariant::kArcFace: return soft_cross_entropy(g, margin_logits(g, x, yi, c), one_hot(yi, 4));
                    case LossVariant::kArcMix:
                        return ad::add(g, ad::affine(g, soft_cross_entropy(g, margin_logits(g, x, yi, c), one_hot(yi, 4)), lam),
                                       ad::affine(g, soft_cross_entropy(g, margin_logits(g, x, yj, c), one_hot(yj, 4)), 1 - lam));
                    default: {
                        auto t = one_hot(yi, 4);
                        for (std::size_t b = 0; b < 2; ++b) {
                            t[b * 4 + yi[b]] = lam;
                            t[b * 4 + yj[b]] += 1 - lam;
                        }
                        return soft_cross_entropy(g, margin_logits(g, x, yi, c), t);
                    }
                }
            };
            worst = std::max(worst, ad::check_gradients(build, {{"cos", cos}}).max_relative_error);
        }
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("sample_lambda: golden value, Monte Carlo mean, gamma swap symmetry") {
    std::mt19937_64 rng(42);
    const double golden = sample_lambda(0.5, rng);
    CHECK(golden > 0.0);
    CHECK(golden < 1.0);
    // Frozen from the first run (libstdc++ gamma_distribution on mt19937_64).
    CHECK(golden == doctest::Approx(0.58028732825850693).epsilon(1e-12));

    std::mt19937_64 mc(7);
    double s = 0.0;
    for (int i = 0; i < 100000; ++i) s += sample_lambda(0.5, mc);
    CHECK(std::abs(s / 100000 - 0.5) < 0.01);

    CHECK(beta_from_gammas(0.3, 1.2) == doctest::Approx(1.0 - beta_from_gammas(1.2, 0.3)).epsilon(1e-15));
    CHECK_THROWS_AS(sample_lambda(0.0, rng), ConfigError);
}

TEST_CASE("mixup") {
    const ad::Tensor a({1}, 4.0), b({1}, 0.0);
    CHECK(mixup(a, b, 1.0) == a);
    CHECK(mixup(a, b, 0.0) == b);
    CHECK(mixup(a, b, 0.25)[0] == 1.0);
    CHECK_THROWS_AS(mixup(a, ad::Tensor({2}), 0.5), ShapeError);
    CHECK_THROWS_AS(mixup(a, b, 1.5), ConfigError);

    std::mt19937_64 rng(49);
    const auto d = draw_mixup(16, 0.5, rng);
    auto sorted = d.partner;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 16; ++i) CHECK(sorted[i] == i);
    CHECK(std::isfinite(d.lambda));
}

TEST_CASE("loss config validation and parsing") {
    LossConfig c;
    CHECK(c.margin == 0.7);
    CHECK(c.scale == 30.0);
    CHECK(c.alpha == 0.5);
    c.margin = 2.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = LossConfig{};
    c.scale = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(parse_loss_variant("noisy-arcmix") == LossVariant::kNoisyArcMix);
    CHECK(parse_loss_variant("noisy_arcmix") == LossVariant::kNoisyArcMix);
    CHECK_THROWS_AS(parse_loss_variant("cosface"), ConfigError);
    const nlohmann::json j = LossConfig{};
    CHECK(j.get<LossConfig>() == LossConfig{});
}
