#include "asd/train/config.hpp"

#include <cmath>

#include "asd/error.hpp"

namespace asd::train {

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size < 2) throw ConfigError("batch size must be at least 2");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be non-negative");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight decay must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("Adam epsilon must be positive");
    loss.validate();
    mel.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"learning_rate", c.learning_rate},
                       {"weight_decay", c.weight_decay},
                       {"beta1", c.beta1},
                       {"beta2", c.beta2},
                       {"eps", c.eps},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    j.at("epochs").get_to(c.epochs);
    j.at("batch_size").get_to(c.batch_size);
    j.at("learning_rate").get_to(c.learning_rate);
    j.at("weight_decay").get_to(c.weight_decay);
    j.at("beta1").get_to(c.beta1);
    j.at("beta2").get_to(c.beta2);
    j.at("eps").get_to(c.eps);
    j.at("seed").get_to(c.seed);
}

nlohmann::json resolved_config_json(const TrainConfig& c) {
    nlohmann::json j = c;
    j["loss"] = c.loss;
    j["mel"] = c.mel;
    j["model"] = c.model;
    return j;
}

}  // namespace asd::train
