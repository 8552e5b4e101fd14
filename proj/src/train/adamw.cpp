#include "asd/train/adamw.hpp"

#include <cmath>

#include "asd/error.hpp"

namespace asd::train {

void adamw_step(const NamedParams& params, const std::map<std::string, ad::Tensor>& grads, AdamWState& state,
                const AdamWHyper& h) {
    for (const auto& [name, p] : params) {
        const auto it = grads.find(name);
        if (it == grads.end()) throw Error("no gradient for parameter '" + name + "'");
        if (it->second.shape() != p->shape()) {
            throw ShapeError("gradient for '" + name + "' has shape " + ad::to_string(it->second.shape()) +
                             ", parameter has " + ad::to_string(p->shape()));
        }
        if (!it->second.all_finite()) throw NonFiniteError("non-finite gradient for parameter '" + name + "'");
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(h.beta1, t);
    const double c2 = 1.0 - std::pow(h.beta2, t);
    for (const auto& [name, p] : params) {
        const auto& g = grads.at(name);
        auto& m = state.m.try_emplace(name, p->shape()).first->second;
        auto& v = state.v.try_emplace(name, p->shape()).first->second;
        if (m.shape() != p->shape() || v.shape() != p->shape()) {
            throw ShapeError("optimiser state for '" + name + "' does not match the parameter shape");
        }
        for (std::size_t i = 0; i < p->size(); ++i) {
            double& w = (*p)[i];
            w -= h.lr * h.weight_decay * w;
            m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
            v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
        }
    }
}

}  // namespace asd::train
