#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "asd/autodiff/tensor.hpp"

namespace asd::ad {

struct NodeId {
    std::size_t index = 0;
    friend bool operator==(NodeId, NodeId) = default;
};

class Graph;

// View handed to a node's backward function. grad(i) returns the accumulator for
// operand i, or nullptr when that operand does not need a gradient.
class BackwardContext {
public:
    BackwardContext(const Graph& graph, std::size_t node, const Tensor& grad_out,
                    std::vector<Tensor>& grads);

    const Tensor& operand(std::size_t i) const;
    const Tensor& output() const;
    const Tensor& grad_output() const noexcept { return grad_out_; }
    Tensor* grad(std::size_t i) const;

private:
    const Graph& graph_;
    std::size_t node_;
    const Tensor& grad_out_;
    std::vector<Tensor>& grads_;
};

using BackwardFn = std::function<void(const BackwardContext&)>;

// Define-by-run tape. Nodes are appended in evaluation order, so operand indices
// always precede the node that consumes them.
class Graph {
public:
    // Named differentiable input.
    NodeId parameter(std::string name, Tensor value);
    // Named input that receives no gradient.
    NodeId input(std::string name, Tensor value);
    NodeId constant(Tensor value);

    // Appends an op node. Throws NonFiniteError if the value contains NaN/Inf.
    NodeId record(std::string op, std::vector<NodeId> operands, Tensor value, BackwardFn backward);

    const Tensor& value(NodeId id) const;
    const std::string& op(NodeId id) const;
    const std::vector<NodeId>& operands(NodeId id) const;
    bool requires_grad(NodeId id) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    // Index the next recorded node will receive; used in error messages.
    std::size_t next_index() const noexcept { return nodes_.size(); }

    // Smallest distance of any non-smooth op input (leaky_relu, max, clamp) to
    // its kink observed so far. Gradient checks reject points closer than h.
    void note_kink_distance(double distance) noexcept;
    double kink_margin() const noexcept { return kink_margin_; }

    // Reverse accumulation from a scalar output. One entry per parameter.
    std::map<std::string, Tensor> gradients(NodeId output) const;

private:
    friend class BackwardContext;

    struct Node {
        std::string op;
        std::vector<NodeId> operands;
        Tensor value;
        BackwardFn backward;
        std::string name;
        bool is_parameter = false;
        bool requires_grad = false;
    };

    NodeId add_leaf(std::string op, std::string name, Tensor value, bool is_parameter);
    const Node& node(NodeId id) const;

    std::deque<Node> nodes_;  // deque: value() references survive later records
    std::map<std::string, std::size_t> names_;
    double kink_margin_ = std::numeric_limits<double>::infinity();
};

struct Evaluation {
    Tensor value;
    std::map<std::string, Tensor> gradients;
};

// Value of a scalar output node together with gradients for every parameter.
Evaluation evaluate_with_gradients(const Graph& graph, NodeId output);

}  // namespace asd::ad
