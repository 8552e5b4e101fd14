#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "asd/autodiff/graph.hpp"
#include "json.hpp"

namespace asd::losses {

enum class LossVariant { kCrossEntropy, kArcFace, kArcMix, kNoisyArcMix };

// "ce", "arcface", "arcmix", "noisy-arcmix" ("noisy_arcmix" also accepted by parse).
std::string to_string(LossVariant v);
LossVariant parse_loss_variant(const std::string& s);

struct LossConfig {
    double margin = 0.7;  // radians
    double scale = 30.0;
    double alpha = 0.5;   // Beta(alpha, alpha) concentration for mixup
    LossVariant variant = LossVariant::kNoisyArcMix;

    void validate() const;
    bool mixes() const { return variant == LossVariant::kArcMix || variant == LossVariant::kNoisyArcMix; }
    friend bool operator==(const LossConfig&, const LossConfig&) = default;
};

void to_json(nlohmann::json& j, const LossConfig& c);
void from_json(const nlohmann::json& j, LossConfig& c);

std::vector<double> softmax(std::span<const double> logits);

// -sum_k y_k log softmax(logits)_k, via log-sum-exp.
double cross_entropy(std::span<const double> logits, std::size_t label);
double cross_entropy(std::span<const double> logits, std::span<const double> soft_label);

// lambda * onehot(yi) + (1 - lambda) * onehot(yj)
std::vector<double> soft_label(std::size_t classes, std::size_t yi, std::size_t yj, double lambda);

// s * cos(theta_k + m [k == y]); cos(theta + m) = cos * cos m - sin * sin m with
// sin = sqrt(1 - cos^2). No correction when theta + m exceeds pi.
std::vector<double> margin_logits(std::span<const double> cos_theta, std::size_t y, const LossConfig& cfg);

double arcface_loss(std::span<const double> cos_theta, std::size_t y, const LossConfig& cfg);
double arcmix_loss(std::span<const double> cos_theta, std::size_t yi, std::size_t yj, double lambda,
                   const LossConfig& cfg);
// Margin on yi only, soft label between yi and yj.
double noisy_arcmix_loss(std::span<const double> cos_theta, std::size_t yi, std::size_t yj, double lambda,
                         const LossConfig& cfg);

// Graph versions over a batch. cos: [B, K] -> scaled logits [B, K] with the
// margin on column margin_class[b] of row b.
ad::NodeId margin_logits(ad::Graph& g, ad::NodeId cos, std::span<const std::size_t> margin_class,
                         const LossConfig& cfg);

// Mean over the batch of -sum_k targets[b,k] log softmax(logits[b])_k.
ad::NodeId soft_cross_entropy(ad::Graph& g, ad::NodeId logits, const ad::Tensor& targets);

// One-hot rows [B, K].
ad::Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes);

struct BatchTargets {
    std::vector<std::size_t> yi;  // labels of the batch in order
    std::vector<std::size_t> yj;  // labels of the mixing partners (equal to yi when not mixing)
    double lambda = 1.0;
};

// Batch-mean training loss for cfg.variant.
//  ce:           softmax CE on the plain linear logits h W^T
//  arcface:      CE on margin logits for yi
//  arcmix:       lambda * AF(yi) + (1 - lambda) * AF(yj)
//  noisy-arcmix: soft-label CE on margin logits for yi
// h: [B, d] embeddings, weight: [K, d] class centres.
ad::NodeId batch_loss(ad::Graph& g, ad::NodeId h, ad::NodeId weight, const BatchTargets& t, const LossConfig& cfg);

}  // namespace asd::losses
