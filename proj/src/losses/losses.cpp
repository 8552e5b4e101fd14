#include "asd/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "asd/autodiff/ops.hpp"
#include "asd/error.hpp"
#include "asd/model/head.hpp"

namespace asd::losses {

std::string to_string(LossVariant v) {
    switch (v) {
        case LossVariant::kCrossEntropy: return "ce";
        case LossVariant::kArcFace: return "arcface";
        case LossVariant::kArcMix: return "arcmix";
        case LossVariant::kNoisyArcMix: return "noisy-arcmix";
    }
    return "unknown";
}

LossVariant parse_loss_variant(const std::string& s) {
    if (s == "ce") return LossVariant::kCrossEntropy;
    if (s == "arcface") return LossVariant::kArcFace;
    if (s == "arcmix") return LossVariant::kArcMix;
    if (s == "noisy-arcmix" || s == "noisy_arcmix") return LossVariant::kNoisyArcMix;
    throw ConfigError("unknown loss variant '" + s + "' (expected ce, arcface, arcmix or noisy-arcmix)");
}

void LossConfig::validate() const {
    if (!(margin >= 0.0 && margin <= std::numbers::pi / 2)) throw ConfigError("margin must lie in [0, pi/2]");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("scale must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
}

void to_json(nlohmann::json& j, const LossConfig& c) {
    j = nlohmann::json{{"margin", c.margin}, {"scale", c.scale}, {"alpha", c.alpha}, {"variant", to_string(c.variant)}};
}

void from_json(const nlohmann::json& j, LossConfig& c) {
    j.at("margin").get_to(c.margin);
    j.at("scale").get_to(c.scale);
    j.at("alpha").get_to(c.alpha);
    c.variant = parse_loss_variant(j.at("variant").get<std::string>());
}

namespace {

double log_sum_exp(std::span<const double> x) {
    if (x.empty()) throw ShapeError("empty logit vector");
    const double m = *std::max_element(x.begin(), x.end());
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

void check_label(std::size_t y, std::size_t classes) {
    if (y >= classes) {
        throw Error("label " + std::to_string(y) + " out of range for " + std::to_string(classes) + " classes");
    }
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
    const double lse = log_sum_exp(logits);
    std::vector<double> p(logits.size());
    for (std::size_t k = 0; k < p.size(); ++k) p[k] = std::exp(logits[k] - lse);
    return p;
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
    check_label(label, logits.size());
    return log_sum_exp(logits) - logits[label];
}

double cross_entropy(std::span<const double> logits, std::span<const double> soft_label) {
    if (soft_label.size() != logits.size()) throw ShapeError("soft label and logits differ in length");
    const double lse = log_sum_exp(logits);
    double loss = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        if (soft_label[k] != 0.0) loss += soft_label[k] * (lse - logits[k]);
    }
    return loss;
}

std::vector<double> soft_label(std::size_t classes, std::size_t yi, std::size_t yj, double lambda) {
    check_label(yi, classes);
    check_label(yj, classes);
    std::vector<double> y(classes, 0.0);
    y[yi] += lambda;
    y[yj] += 1.0 - lambda;
    return y;
}

std::vector<double> margin_logits(std::span<const double> cos_theta, std::size_t y, const LossConfig& cfg) {
    check_label(y, cos_theta.size());
    std::vector<double> logits(cos_theta.size());
    for (std::size_t k = 0; k < logits.size(); ++k) logits[k] = cfg.scale * cos_theta[k];
    const double c = cos_theta[y];
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    logits[y] = cfg.scale * (c * std::cos(cfg.margin) - s * std::sin(cfg.margin));
    return logits;
}

double arcface_loss(std::span<const double> cos_theta, std::size_t y, const LossConfig& cfg) {
    return cross_entropy(margin_logits(cos_theta, y, cfg), y);
}

double arcmix_loss(std::span<const double> cos_theta, std::size_t yi, std::size_t yj, double lambda,
                   const LossConfig& cfg) {
    return lambda * arcface_loss(cos_theta, yi, cfg) + (1.0 - lambda) * arcface_loss(cos_theta, yj, cfg);
}

double noisy_arcmix_loss(std::span<const double> cos_theta, std::size_t yi, std::size_t yj, double lambda,
                         const LossConfig& cfg) {
    return cross_entropy(margin_logits(cos_theta, yi, cfg), soft_label(cos_theta.size(), yi, yj, lambda));
}

ad::Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes) {
    ad::Tensor t({labels.size(), classes});
    for (std::size_t b = 0; b < labels.size(); ++b) {
        check_label(labels[b], classes);
        t[b * classes + labels[b]] = 1.0;
    }
    return t;
}

ad::NodeId margin_logits(ad::Graph& g, ad::NodeId cos, std::span<const std::size_t> margin_class,
                         const LossConfig& cfg) {
    const auto& v = g.value(cos);
    if (v.rank() != 2 || v.dim(0) != margin_class.size()) {
        throw ShapeError("margin logits expect [B, K] cosines with B labels, got " + ad::to_string(v.shape()));
    }
    const auto mask = g.constant(one_hot(margin_class, v.dim(1)));
    const auto sin = ad::sqrt(g, ad::affine(g, ad::mul(g, cos, cos), -1.0, 1.0));
    const auto shifted = ad::sub(g, ad::affine(g, cos, std::cos(cfg.margin)), ad::affine(g, sin, std::sin(cfg.margin)));
    const auto mixed = ad::add(g, cos, ad::mul(g, mask, ad::sub(g, shifted, cos)));
    return ad::affine(g, mixed, cfg.scale);
}

ad::NodeId soft_cross_entropy(ad::Graph& g, ad::NodeId logits, const ad::Tensor& targets) {
    const auto& v = g.value(logits);
    if (v.shape() != targets.shape()) {
        throw ShapeError("targets " + ad::to_string(targets.shape()) + " do not match logits " + ad::to_string(v.shape()));
    }
    const auto ls = ad::log_softmax(g, logits);
    const auto weighted = ad::sum_all(g, ad::mul(g, g.constant(targets), ls));
    return ad::affine(g, weighted, -1.0 / static_cast<double>(v.dim(0)));
}

ad::NodeId batch_loss(ad::Graph& g, ad::NodeId h, ad::NodeId weight, const BatchTargets& t, const LossConfig& cfg) {
    const std::size_t k = g.value(weight).dim(0);
    if (t.yi.size() != g.value(h).dim(0) || t.yj.size() != t.yi.size()) {
        throw ShapeError("batch targets do not match the batch size");
    }
    switch (cfg.variant) {
        case LossVariant::kCrossEntropy: {
            const auto logits = ad::matmul(g, h, ad::transpose(g, weight));
            return soft_cross_entropy(g, logits, one_hot(t.yi, k));
        }
        case LossVariant::kArcFace: {
            const auto cos = model::cosine_logits(g, h, weight);
            return soft_cross_entropy(g, margin_logits(g, cos, t.yi, cfg), one_hot(t.yi, k));
        }
        case LossVariant::kArcMix: {
            const auto cos = model::cosine_logits(g, h, weight);
            const auto li = soft_cross_entropy(g, margin_logits(g, cos, t.yi, cfg), one_hot(t.yi, k));
            const auto lj = soft_cross_entropy(g, margin_logits(g, cos, t.yj, cfg), one_hot(t.yj, k));
            return ad::add(g, ad::affine(g, li, t.lambda), ad::affine(g, lj, 1.0 - t.lambda));
        }
        case LossVariant::kNoisyArcMix: {
            const auto cos = model::cosine_logits(g, h, weight);
            auto targets = one_hot(t.yi, k);
            for (std::size_t b = 0; b < t.yi.size(); ++b) {
                targets[b * k + t.yi[b]] = t.lambda;
                targets[b * k + t.yj[b]] += 1.0 - t.lambda;
            }
            return soft_cross_entropy(g, margin_logits(g, cos, t.yi, cfg), targets);
        }
    }
    throw ConfigError("unhandled loss variant");
}

}  // namespace asd::losses
