#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "asd/autodiff/graph.hpp"

namespace asd::ad {

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
// Throws NonFiniteError naming the coordinate if a probe is not finite.
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

// ||a - b|| / max(||a||, ||b||), or 0 when both are exactly zero.
double relative_error(const Tensor& a, const Tensor& b);

using NodeMap = std::map<std::string, NodeId>;
// Builds a scalar output from the named inputs (registered as parameters).
using GraphBuilder = std::function<NodeId(Graph&, const NodeMap&)>;

struct GradCheckOptions {
    double step = 1e-5;
    // Coordinates probed per input; 0 probes all of them. The subset is drawn
    // with `seed`, so the check is reproducible.
    std::size_t max_coordinates = 0;
    std::uint64_t seed = 0;
};

struct GradCheckResult {
    double max_relative_error = 0.0;  // worst input, over the probed coordinates
    std::string worst_input;
    double kink_margin = 0.0;  // closest non-smooth point seen in the forward pass
};

// Compares reverse-mode gradients against central differences for every input.
// Callers should discard points whose kink_margin is not comfortably above the
// step, since differences straddling a kink are meaningless.
GradCheckResult check_gradients(const GraphBuilder& build, const std::map<std::string, Tensor>& inputs,
                                const GradCheckOptions& options = {});

}  // namespace asd::ad
