#include "asd/data/batching.hpp"

#include <algorithm>
#include <random>

#include "asd/error.hpp"

namespace asd::data {

std::vector<Batch> make_batches(const Manifest& manifest, std::size_t batch_size, std::uint64_t epoch_seed) {
    if (batch_size < 2) throw ConfigError("batch size must be at least 2");
    auto order = manifest.indices(Split::kTrain);
    std::mt19937_64 rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<Batch> batches;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        Batch b;
        const std::size_t end = std::min(order.size(), start + batch_size);
        for (std::size_t i = start; i < end; ++i) {
            b.records.push_back(order[i]);
            b.labels.push_back(manifest.class_map.index_of(manifest.records[order[i]].machine));
        }
        batches.push_back(std::move(b));
    }
    return batches;
}

std::uint64_t epoch_seed(std::uint64_t run_seed, std::size_t epoch) {
    std::seed_seq seq{static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x65706f63u};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace asd::data
