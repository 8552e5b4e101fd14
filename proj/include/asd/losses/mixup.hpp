#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "asd/autodiff/graph.hpp"

namespace asd::losses {

// Beta(alpha, alpha) sample as g1 / (g1 + g2) with g1, g2 ~ Gamma(alpha, 1).
double sample_lambda(double alpha, std::mt19937_64& rng);
double beta_from_gammas(double g1, double g2);

struct MixupDraw {
    double lambda = 1.0;
    std::vector<std::size_t> partner;  // permutation of 0..B-1; fixed points allowed
};

// lambda first, then a uniform shuffle of the batch indices.
MixupDraw draw_mixup(std::size_t batch, double alpha, std::mt19937_64& rng);

// lambda * xi + (1 - lambda) * xj
ad::Tensor mixup(const ad::Tensor& xi, const ad::Tensor& xj, double lambda);

// Rows of x mixed with rows partner[b] of x: [B, ...] -> [B, ...].
ad::NodeId mixup(ad::Graph& g, ad::NodeId x, std::span<const std::size_t> partner, double lambda);

}  // namespace asd::losses
