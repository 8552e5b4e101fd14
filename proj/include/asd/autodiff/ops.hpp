#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "asd/autodiff/graph.hpp"

// Differentiable primitives. Binary elementwise ops accept equal shapes or a
// single-element operand; any other expansion goes through expand().
namespace asd::ad {

inline constexpr double kArccosEpsilon = 1e-7;

NodeId add(Graph& g, NodeId a, NodeId b);
NodeId sub(Graph& g, NodeId a, NodeId b);
NodeId mul(Graph& g, NodeId a, NodeId b);
// scale * a + shift
NodeId affine(Graph& g, NodeId a, double scale, double shift = 0.0);

NodeId exp(Graph& g, NodeId a);
NodeId log(Graph& g, NodeId a);
NodeId sqrt(Graph& g, NodeId a);
NodeId sigmoid(Graph& g, NodeId a);
// Input clamped to [-1 + kArccosEpsilon, 1 - kArccosEpsilon] first.
NodeId arccos(Graph& g, NodeId a);
NodeId clamp(Graph& g, NodeId a, double lo, double hi);
NodeId leaky_relu(Graph& g, NodeId a, double slope);

// 2-D only.
NodeId matmul(Graph& g, NodeId a, NodeId b);
NodeId transpose(Graph& g, NodeId a);

NodeId reshape(Graph& g, NodeId a, Shape shape);
NodeId concat(Graph& g, std::span<const NodeId> parts, std::size_t axis);
// Inserts a new axis of length n at position axis, repeating the input.
NodeId expand(Graph& g, NodeId a, std::size_t axis, std::size_t n);
// Rows of a (axis 0) picked by index; repeated indices accumulate in backward.
NodeId gather(Graph& g, NodeId a, std::span<const std::size_t> indices);

// Reductions drop the reduced axis; rank-1 inputs reduce to shape [1].
NodeId sum(Graph& g, NodeId a, std::size_t axis);
NodeId mean(Graph& g, NodeId a, std::size_t axis);
NodeId max(Graph& g, NodeId a, std::size_t axis);
NodeId sum_all(Graph& g, NodeId a);
NodeId mean_all(Graph& g, NodeId a);

// x - logsumexp(x) along the last axis.
NodeId log_softmax(Graph& g, NodeId a);
// Each row of a 2-D tensor divided by its L2 norm. Zero rows are an error.
NodeId normalize_rows(Graph& g, NodeId a);

// x: [B, Cin, L], weight: [Cout, Cin, K], bias: [Cout] -> [B, Cout, Lout]
NodeId conv1d(Graph& g, NodeId x, NodeId weight, NodeId bias, std::size_t stride, std::size_t padding);
// x: [B, Cin, H, W], weight: [Cout, Cin, KH, KW], bias: [Cout] -> [B, Cout, Hout, Wout]
NodeId conv2d(Graph& g, NodeId x, NodeId weight, NodeId bias, std::size_t stride, std::size_t padding);
// Per-sample, per-channel standardisation over all trailing axes followed by an
// affine map. x: [B, C, ...], gamma/beta: [C].
NodeId channel_norm(Graph& g, NodeId x, NodeId gamma, NodeId beta, double eps = 1e-5);

}  // namespace asd::ad
