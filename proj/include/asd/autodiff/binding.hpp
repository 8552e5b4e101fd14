#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "asd/autodiff/graph.hpp"

namespace asd::ad {

// Maps parameter tensors owned by a model struct to the graph nodes holding
// them, so builders can look nodes up by the tensor they came from.
class ParamBinding {
public:
    // Trainable tensors become named parameters; frozen ones become named inputs.
    NodeId bind(Graph& g, std::string name, const Tensor& t, bool trainable) {
        const NodeId id = trainable ? g.parameter(std::move(name), t) : g.input(std::move(name), t);
        nodes_[&t] = id;
        return id;
    }

    // Uses an existing node for `t` (e.g. one created by a gradient checker).
    void alias(const Tensor& t, NodeId id) { nodes_[&t] = id; }

    NodeId operator()(const Tensor& t) const {
        const auto it = nodes_.find(&t);
        if (it == nodes_.end()) throw std::out_of_range("tensor is not bound to the graph");
        return it->second;
    }

private:
    std::map<const Tensor*, NodeId> nodes_;
};

}  // namespace asd::ad
