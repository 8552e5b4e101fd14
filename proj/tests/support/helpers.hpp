#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "asd/autodiff/tensor.hpp"
#include "asd/features/tgram.hpp"
#include "asd/model/backbone.hpp"

namespace asd::testing {

inline ad::Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    ad::Tensor t(std::move(shape));
    for (auto& v : t.data()) v = u(rng);
    return t;
}

// Tgram with tiny geometry (kernel 8, stride 4, 4 channels) for fast checks.
inline features::TgramParams small_tgram(std::mt19937_64& rng, std::size_t channels = 4, std::size_t blocks = 2) {
    features::TgramParams p;
    p.kernel = 8;
    p.stride = 4;
    p.padding = 4;
    p.front_weight = random_tensor({channels, 1, p.kernel}, rng, -0.5, 0.5);
    p.front_bias = random_tensor({channels}, rng, -0.1, 0.1);
    for (std::size_t i = 0; i < blocks; ++i) {
        p.blocks.push_back({random_tensor({channels}, rng, 0.5, 1.5), random_tensor({channels}, rng, -0.2, 0.2),
                            random_tensor({channels, channels, 3}, rng, -0.5, 0.5),
                            random_tensor({channels}, rng, -0.1, 0.1)});
    }
    return p;
}

inline model::Backbone small_backbone(std::mt19937_64& rng, std::size_t d = 5) {
    auto b = model::make_backbone(3, {4, 6}, d);
    b.visit([&](const std::string& name, ad::Tensor& t) {
        const bool gamma = name.find("gamma") != std::string::npos;
        t = random_tensor(t.shape(), rng, gamma ? 0.5 : -0.5, gamma ? 1.5 : 0.5);
    });
    return b;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
    const auto dir = std::filesystem::temp_directory_path() / ("asdkit_test_" + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace asd::testing
