#pragma once

#include <cstddef>
#include <cstdint>

#include "asd/dsp/mel.hpp"
#include "asd/losses/losses.hpp"
#include "asd/model/params.hpp"

namespace asd::train {

// Defaults are the full-scale recipe (300 epochs, batch 64, lr 1e-4); the
// desk-scale runs override epochs and lr. model.num_classes is taken from the
// manifest at train time.
struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t batch_size = 64;
    double learning_rate = 1e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 0;
    losses::LossConfig loss;
    dsp::MelConfig mel;
    model::ModelDims model;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Serialises everything except loss/mel/model, which checkpoints store under
// their own keys; resolved_config_json() gives the full picture.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
nlohmann::json resolved_config_json(const TrainConfig& c);

}  // namespace asd::train
