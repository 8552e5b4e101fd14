#pragma once

#include "asd/autodiff/binding.hpp"

namespace asd::model {

// Class centres. Rows are normalised on use, never in storage: the optimiser
// owns W and would denormalise it every step anyway.
struct ProjectionHead {
    ad::Tensor weight;  // [K, d]

    std::size_t classes() const { return weight.dim(0); }
    std::size_t embedding_dim() const { return weight.dim(1); }

    template <class F>
    void visit(F&& f) {
        f("head.weight", weight);
    }
    template <class F>
    void visit(F&& f) const {
        f("head.weight", weight);
    }
};

struct CosineLogits {
    std::vector<double> cos;    // clamped to [-1 + eps, 1 - eps]
    std::vector<double> theta;  // arccos(cos), in (0, pi)
};

// h: [d]. Both h and the rows of W are normalised here; zero norms raise Error.
CosineLogits cosine_logits(const ad::Tensor& h, const ProjectionHead& head);

// h: [B, d], weight: [K, d] -> clamped cosines [B, K].
ad::NodeId cosine_logits(ad::Graph& g, ad::NodeId h, ad::NodeId weight);

}  // namespace asd::model
