#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "asd/autodiff/tensor.hpp"

namespace asd::train {

struct AdamWHyper {
    double lr = 1e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamWState {
    std::size_t step = 0;
    std::map<std::string, ad::Tensor> m;
    std::map<std::string, ad::Tensor> v;
};

using NamedParams = std::vector<std::pair<std::string, ad::Tensor*>>;

// Decoupled decay p <- p - lr * wd * p, then the bias-corrected Adam update.
// Every parameter needs a gradient of matching shape; a non-finite gradient
// raises NonFiniteError naming the tensor before anything is modified.
void adamw_step(const NamedParams& params, const std::map<std::string, ad::Tensor>& grads, AdamWState& state,
                const AdamWHyper& hyper);

}  // namespace asd::train
