#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "asd/data/manifest.hpp"

namespace asd::data {

struct Batch {
    std::vector<std::size_t> records;  // indices into Manifest::records
    std::vector<std::size_t> labels;   // class index per record
};

// One pass over the train records in a seeded permutation. The final short
// batch is kept. batch_size must be at least 2 (mixup needs a partner).
std::vector<Batch> make_batches(const Manifest& manifest, std::size_t batch_size, std::uint64_t epoch_seed);

// Per-epoch seed derived from the run seed.
std::uint64_t epoch_seed(std::uint64_t run_seed, std::size_t epoch);

}  // namespace asd::data
