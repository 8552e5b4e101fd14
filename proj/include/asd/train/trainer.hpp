#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "asd/data/manifest.hpp"
#include "asd/train/checkpoint.hpp"

namespace asd::train {

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double mean_loss = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<EpochStats> epochs;
    std::vector<double> lambdas;  // one per batch, in order (mixing variants only)
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Deterministic: the result is a pure function of (manifest, config). Clips
// are decoded and their log-Mel spectrograms computed once up front.
// A non-finite loss or gradient aborts with the epoch and batch index.
TrainResult train(const data::Manifest& manifest, const TrainConfig& config, const EpochCallback& on_epoch = {});

// CSV with header `epoch,mean_loss`.
void write_loss_log(const std::vector<EpochStats>& epochs, const std::filesystem::path& path);

}  // namespace asd::train
