#include "asd/autodiff/graph.hpp"

#include <algorithm>
#include <utility>

#include "asd/error.hpp"

namespace asd::ad {

BackwardContext::BackwardContext(const Graph& graph, std::size_t node, const Tensor& grad_out,
                                 std::vector<Tensor>& grads)
    : graph_(graph), node_(node), grad_out_(grad_out), grads_(grads) {}

const Tensor& BackwardContext::operand(std::size_t i) const {
    return graph_.nodes_[graph_.nodes_[node_].operands.at(i).index].value;
}

const Tensor& BackwardContext::output() const { return graph_.nodes_[node_].value; }

Tensor* BackwardContext::grad(std::size_t i) const {
    const auto id = graph_.nodes_[node_].operands.at(i);
    const auto& target = graph_.nodes_[id.index];
    if (!target.requires_grad) return nullptr;
    auto& slot = grads_[id.index];
    if (slot.empty()) slot = Tensor(target.value.shape(), 0.0);
    return &slot;
}

NodeId Graph::add_leaf(std::string op, std::string name, Tensor value, bool is_parameter) {
    if (value.empty()) throw ShapeError("node #" + std::to_string(nodes_.size()) + " (" + op + "): empty tensor");
    if (!value.all_finite()) {
        throw NonFiniteError("node #" + std::to_string(nodes_.size()) + " (" + op + " '" + name +
                             "'): non-finite input value");
    }
    if (!name.empty()) {
        if (names_.contains(name)) throw Error("duplicate graph input name '" + name + "'");
        names_[name] = nodes_.size();
    }
    Node n;
    n.op = std::move(op);
    n.value = std::move(value);
    n.name = std::move(name);
    n.is_parameter = is_parameter;
    n.requires_grad = is_parameter;
    nodes_.push_back(std::move(n));
    return NodeId{nodes_.size() - 1};
}

NodeId Graph::parameter(std::string name, Tensor value) {
    if (name.empty()) throw Error("parameters must be named");
    return add_leaf("parameter", std::move(name), std::move(value), true);
}

NodeId Graph::input(std::string name, Tensor value) {
    if (name.empty()) throw Error("inputs must be named");
    return add_leaf("input", std::move(name), std::move(value), false);
}

NodeId Graph::constant(Tensor value) { return add_leaf("constant", {}, std::move(value), false); }

NodeId Graph::record(std::string op, std::vector<NodeId> operands, Tensor value, BackwardFn backward) {
    const std::size_t index = nodes_.size();
    bool needs_grad = false;
    for (auto id : operands) {
        if (id.index >= index) {
            throw Error("node #" + std::to_string(index) + " (" + op + "): operand #" +
                        std::to_string(id.index) + " does not precede it");
        }
        needs_grad = needs_grad || nodes_[id.index].requires_grad;
    }
    if (!value.all_finite()) {
        throw NonFiniteError("node #" + std::to_string(index) + " (" + op + "): non-finite output");
    }
    Node n;
    n.op = std::move(op);
    n.operands = std::move(operands);
    n.value = std::move(value);
    n.requires_grad = needs_grad;
    if (needs_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return NodeId{index};
}

const Graph::Node& Graph::node(NodeId id) const {
    if (id.index >= nodes_.size()) throw Error("unknown node #" + std::to_string(id.index));
    return nodes_[id.index];
}

const Tensor& Graph::value(NodeId id) const { return node(id).value; }
const std::string& Graph::op(NodeId id) const { return node(id).op; }
const std::vector<NodeId>& Graph::operands(NodeId id) const { return node(id).operands; }
bool Graph::requires_grad(NodeId id) const { return node(id).requires_grad; }

void Graph::note_kink_distance(double distance) noexcept { kink_margin_ = std::min(kink_margin_, distance); }

std::map<std::string, Tensor> Graph::gradients(NodeId output) const {
    const auto& out = node(output);
    if (out.value.size() != 1) {
        throw ShapeError("node #" + std::to_string(output.index) + " (" + out.op +
                         "): gradient requested for non-scalar output of shape " + to_string(out.value.shape()));
    }
    std::vector<Tensor> grads(nodes_.size());
    if (out.requires_grad) grads[output.index] = Tensor(out.value.shape(), 1.0);

    for (std::size_t i = output.index + 1; i-- > 0;) {
        const auto& n = nodes_[i];
        if (!n.backward || grads[i].empty()) continue;
        BackwardContext ctx(*this, i, grads[i], grads);
        n.backward(ctx);
        grads[i] = Tensor();
    }

    std::map<std::string, Tensor> result;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        if (!n.is_parameter) continue;
        result[n.name] = grads[i].empty() ? Tensor(n.value.shape(), 0.0) : std::move(grads[i]);
    }
    return result;
}

Evaluation evaluate_with_gradients(const Graph& graph, NodeId output) {
    auto grads = graph.gradients(output);
    return Evaluation{graph.value(output), std::move(grads)};
}

}  // namespace asd::ad
