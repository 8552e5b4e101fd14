#pragma once

#include <cstdint>
#include <vector>

#include "asd/features/tgram.hpp"
#include "asd/model/backbone.hpp"
#include "asd/model/head.hpp"

namespace asd::model {

struct ModelDims {
    std::size_t num_classes = 2;
    std::size_t embedding_dim = 128;
    std::vector<std::size_t> backbone_channels{32, 64, 128, 128};
    std::size_t tgram_blocks = 3;

    void validate() const;
    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

void to_json(nlohmann::json& j, const ModelDims& d);
void from_json(const nlohmann::json& j, ModelDims& d);

struct ModelParams {
    features::TgramParams tgram;
    Backbone backbone;
    ProjectionHead head;

    // Fixed order: tgram, backbone, head. Checkpoints rely on it.
    template <class F>
    void visit(F&& f) {
        tgram.visit(f);
        backbone.visit(f);
        head.visit(f);
    }
    template <class F>
    void visit(F&& f) const {
        tgram.visit(f);
        backbone.visit(f);
        head.visit(f);
    }

    std::size_t parameter_count() const;
};

// Conv and linear weights ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)); biases
// and betas 0, gammas 1; head rows Gaussian then normalised (uniform on the
// sphere). Deterministic in the seed.
ModelParams init_params(std::uint64_t seed, const ModelDims& dims, const dsp::MelConfig& mel);

// Registers every tensor on the graph (as parameters if trainable).
ad::ParamBinding bind_params(ad::Graph& g, const ModelParams& p, bool trainable);

}  // namespace asd::model
