#include "asd/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "asd/data/batching.hpp"
#include "asd/error.hpp"
#include "asd/losses/mixup.hpp"
#include "asd/model/forward.hpp"
#include "asd/train/adamw.hpp"

namespace asd::train {
namespace {

std::string digest(const std::mt19937_64& rng) {
    std::ostringstream s;
    s << rng;
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s.str()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::mt19937_64 mixup_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6d697875u};
    return std::mt19937_64(seq);
}

}  // namespace

TrainResult train(const data::Manifest& manifest, const TrainConfig& config_in, const EpochCallback& on_epoch) {
    TrainConfig config = config_in;
    config.model.num_classes = manifest.class_map.size();
    config.validate();
    config.model.validate();
    const auto train_idx = manifest.indices(data::Split::kTrain);
    if (train_idx.empty()) throw ConfigError("manifest has no train records");

    // Decode every train clip once; the Sgram has no parameters, so cache it too.
    std::vector<dsp::Waveform> waves(manifest.records.size());
    std::vector<ad::Tensor> mels(manifest.records.size());
    for (auto i : train_idx) {
        waves[i] = dsp::read_wav(manifest.resolve(manifest.records[i]));
        mels[i] = dsp::log_mel(waves[i], config.mel).values;
    }

    auto params = model::init_params(config.seed, config.model, config.mel);
    features::check_tgram_geometry(params.tgram, config.mel);
    NamedParams named;
    params.visit([&](const std::string& name, ad::Tensor& t) { named.emplace_back(name, &t); });
    AdamWState state;
    const AdamWHyper hyper{config.learning_rate, config.weight_decay, config.beta1, config.beta2, config.eps};
    auto rng = mixup_rng(config.seed);

    TrainResult result;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto start = std::chrono::steady_clock::now();
        const auto batches = data::make_batches(manifest, config.batch_size, data::epoch_seed(config.seed, epoch));
        double total = 0.0;
        std::size_t seen = 0;
        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            const auto& batch = batches[bi];
            const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi);
            std::vector<const dsp::Waveform*> wp;
            std::vector<const ad::Tensor*> mp;
            for (auto r : batch.records) {
                wp.push_back(&waves[r]);
                mp.push_back(&mels[r]);
            }
            const auto clips = model::make_clip_batch(wp, mp);

            losses::BatchTargets targets{batch.labels, batch.labels, 1.0};
            std::vector<std::size_t> partner;
            if (config.loss.mixes()) {
                auto draw = losses::draw_mixup(batch.labels.size(), config.loss.alpha, rng);
                targets.lambda = draw.lambda;
                partner = std::move(draw.partner);
                for (std::size_t b = 0; b < partner.size(); ++b) targets.yj[b] = batch.labels[partner[b]];
                result.lambdas.push_back(targets.lambda);
            }

            double value = 0.0;
            std::map<std::string, ad::Tensor> grads;
            try {
                ad::Graph g;
                const auto nodes = model::bind_params(g, params, true);
                auto x = model::feature_stack(g, params, nodes, clips);
                if (!partner.empty()) x = losses::mixup(g, x, partner, targets.lambda);
                const auto h = model::backbone_forward(g, x, params.backbone, nodes);
                const auto loss = losses::batch_loss(g, h, nodes(params.head.weight), targets, config.loss);
                value = g.value(loss).item();
                if (!std::isfinite(value)) throw NonFiniteError("loss is not finite");
                grads = g.gradients(loss);
                adamw_step(named, grads, state, hyper);
            } catch (const NonFiniteError& e) {
                throw NonFiniteError(where + ": " + e.what());
            }
            total += value * static_cast<double>(batch.labels.size());
            seen += batch.labels.size();
        }
        EpochStats stats{epoch, total / static_cast<double>(seen),
                         std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
        result.epochs.push_back(stats);
        if (on_epoch) on_epoch(stats);
    }

    round_to_float32(params);
    result.checkpoint = Checkpoint{config, manifest.class_map, digest(rng), std::move(params)};
    return result;
}

void write_loss_log(const std::vector<EpochStats>& epochs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << "epoch,mean_loss\n";
    char buf[64];
    for (const auto& e : epochs) {
        std::snprintf(buf, sizeof buf, "%.17g", e.mean_loss);
        out << e.epoch << ',' << buf << '\n';
    }
    if (!out) throw Error("failed writing loss log '" + path.string() + "'");
}

}  // namespace asd::train
