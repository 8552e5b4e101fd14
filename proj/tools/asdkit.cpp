// asdkit command-line entry point: synth | train | eval | angles.
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "asd/data/synth.hpp"
#include "asd/error.hpp"
#include "asd/eval/scoring.hpp"
#include "asd/train/trainer.hpp"

namespace {

enum class Level { kQuiet = 0, kInfo = 1, kDebug = 2 };

Level log_level() {
    const char* v = std::getenv("ASD_LOG_LEVEL");
    if (!v) return Level::kInfo;
    const std::string s(v);
    if (s == "quiet" || s == "0") return Level::kQuiet;
    if (s == "debug" || s == "2") return Level::kDebug;
    return Level::kInfo;
}

void log(Level at, const std::string& msg) {
    if (static_cast<int>(log_level()) >= static_cast<int>(at)) std::cerr << msg << '\n';
}

void print_config(const std::string& command, nlohmann::json cfg) {
    cfg["command"] = command;
    std::cout << cfg.dump(2) << std::endl;
}

struct SynthArgs {
    std::string out;
    asd::data::CorpusConfig corpus;
};

struct TrainArgs {
    std::string manifest, out, loss_log, loss = "noisy-arcmix";
    asd::train::TrainConfig config;
};

struct EvalArgs {
    std::string checkpoint, manifest, report, scores;
    double p = 0.1;
    bool margin_at_inference = false;
};

struct AnglesArgs {
    std::string checkpoint, manifest, out, split = "test";
    std::size_t bins = 36;
};

int run_synth(const SynthArgs& a) {
    const auto& c = a.corpus;
    print_config("synth", {{"out", a.out},
                           {"types", c.machine_types},
                           {"ids", c.ids_per_type},
                           {"clips", c.train_clips},
                           {"test_clips", c.test_clips},
                           {"duration", c.duration_s},
                           {"anomaly_strength", c.anomaly_strength},
                           {"seed", c.seed}});
    const auto m = asd::data::write_synthetic_corpus(c, a.out);
    log(Level::kInfo, "wrote " + std::to_string(m.records.size()) + " clips for " + std::to_string(m.class_map.size()) +
                          " machines to " + a.out);
    return 0;
}

int run_train(TrainArgs a) {
    a.config.loss.variant = asd::losses::parse_loss_variant(a.loss);
    const auto manifest = asd::data::parse_manifest(a.manifest);
    a.config.model.num_classes = manifest.class_map.size();
    a.config.validate();
    if (a.loss_log.empty()) a.loss_log = a.out + ".loss.csv";
    auto cfg = asd::train::resolved_config_json(a.config);
    cfg["manifest"] = a.manifest;
    cfg["out"] = a.out;
    cfg["loss_log"] = a.loss_log;
    print_config("train", cfg);

    const auto result = asd::train::train(manifest, a.config, [](const asd::train::EpochStats& e) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "epoch %zu  mean_loss %.6f  (%.1fs)", e.epoch, e.mean_loss, e.seconds);
        log(Level::kInfo, buf);
    });
    asd::train::save_checkpoint(result.checkpoint, a.out);
    asd::train::write_loss_log(result.epochs, a.loss_log);
    if (log_level() == Level::kDebug) {
        for (std::size_t i = 0; i < result.lambdas.size(); ++i) {
            log(Level::kDebug, "lambda[" + std::to_string(i) + "] = " + std::to_string(result.lambdas[i]));
        }
    }
    log(Level::kInfo, "checkpoint written to " + a.out);
    return 0;
}

int run_eval(const EvalArgs& a) {
    print_config("eval", {{"checkpoint", a.checkpoint},
                          {"manifest", a.manifest},
                          {"report", a.report},
                          {"scores", a.scores},
                          {"p", a.p},
                          {"margin_at_inference", a.margin_at_inference}});
    const auto ckpt = asd::train::load_checkpoint(a.checkpoint);
    const auto manifest = asd::data::parse_manifest(a.manifest);
    asd::eval::ScoreOptions opt;
    opt.margin_at_inference = a.margin_at_inference;
    const auto clips = asd::eval::analyse_split(ckpt, manifest, asd::data::Split::kTest, opt);
    const auto scored = asd::eval::to_scored(clips);
    const auto report = asd::eval::evaluate_metrics(scored, a.p);
    for (const auto& w : report.warnings) log(Level::kInfo, "warning: " + w);
    asd::eval::write_scores(scored, a.scores);
    asd::eval::write_report(report, a.report);
    char buf[128];
    std::snprintf(buf, sizeof buf, "average AUC %.4f  pAUC %.4f  mAUC %.4f", report.average_auc, report.average_pauc,
                  report.average_mauc);
    log(Level::kInfo, buf);
    return 0;
}

int run_angles(const AnglesArgs& a) {
    print_config("angles", {{"checkpoint", a.checkpoint},
                            {"manifest", a.manifest},
                            {"bins", a.bins},
                            {"out", a.out},
                            {"split", a.split}});
    const auto ckpt = asd::train::load_checkpoint(a.checkpoint);
    const auto manifest = asd::data::parse_manifest(a.manifest);
    const auto split = a.split == "train" ? asd::data::Split::kTrain : asd::data::Split::kTest;
    const auto angles = asd::eval::to_angles(asd::eval::analyse_split(ckpt, manifest, split));
    asd::eval::write_angle_histogram(asd::eval::angle_histogram(angles, a.bins), a.out);
    char buf[96];
    std::snprintf(buf, sizeof buf, "median normal angle %.4f rad", asd::eval::median_angle(angles, asd::data::Condition::kNormal));
    log(Level::kInfo, buf);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Anomalous sound detection toolkit: synthetic corpora, training, evaluation"};
    app.set_config("--config", "", "TOML/INI config file; command-line flags take precedence");
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Write a synthetic machine-sound corpus and manifest");
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--types", sa.corpus.machine_types, "Machine types")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--ids", sa.corpus.ids_per_type, "Machine IDs per type")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--clips", sa.corpus.train_clips, "Normal train clips per machine")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--test-clips", sa.corpus.test_clips, "Normal and anomalous test clips per machine (each)")->capture_default_str();
    synth->add_option("--duration", sa.corpus.duration_s, "Clip length in seconds")->capture_default_str()->check(CLI::PositiveNumber);
    synth->add_option("--anomaly-strength", sa.corpus.anomaly_strength, "Anomaly amplitude relative to the machine")->capture_default_str();
    synth->add_option("--seed", sa.corpus.seed, "Random seed")->capture_default_str();

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Train a model on the train split of a manifest");
    train->add_option("--manifest", ta.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--out", ta.out, "Checkpoint path")->required();
    train->add_option("--loss", ta.loss, "Training objective")
        ->capture_default_str()
        ->check(CLI::IsMember({"ce", "arcface", "arcmix", "noisy-arcmix"}));
    train->add_option("--margin", ta.config.loss.margin, "Angular margin m (radians)")->capture_default_str();
    train->add_option("--scale", ta.config.loss.scale, "Logit scale s")->capture_default_str();
    train->add_option("--alpha", ta.config.loss.alpha, "Mixup Beta(alpha, alpha) concentration")->capture_default_str();
    train->add_option("--epochs", ta.config.epochs, "Epochs")->capture_default_str();
    train->add_option("--batch-size", ta.config.batch_size, "Minibatch size")->capture_default_str();
    train->add_option("--lr", ta.config.learning_rate, "AdamW learning rate")->capture_default_str();
    train->add_option("--weight-decay", ta.config.weight_decay, "AdamW decoupled weight decay")->capture_default_str();
    train->add_option("--seed", ta.config.seed, "Random seed")->capture_default_str();
    train->add_option("--loss-log", ta.loss_log, "Per-epoch loss CSV (default: <out>.loss.csv)");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Score the test split and report AUC / pAUC / mAUC");
    eval->add_option("--checkpoint", ea.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    eval->add_option("--manifest", ea.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
    eval->add_option("--report", ea.report, "Metrics JSON output")->required();
    eval->add_option("--scores", ea.scores, "Per-clip scores CSV output")->required();
    eval->add_option("--p", ea.p, "pAUC false-positive range")->capture_default_str();
    eval->add_flag("--margin-at-inference", ea.margin_at_inference, "Apply the training margin when scoring");

    AnglesArgs aa;
    auto* angles = app.add_subcommand("angles", "Histogram of angles to the true class centre");
    angles->add_option("--checkpoint", aa.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
    angles->add_option("--manifest", aa.manifest, "Manifest CSV")->required()->check(CLI::ExistingFile);
    angles->add_option("--bins", aa.bins, "Histogram bins over [0, pi]")->capture_default_str()->check(CLI::PositiveNumber);
    angles->add_option("--out", aa.out, "Histogram CSV output")->required();
    angles->add_option("--split", aa.split, "Split to analyse")->capture_default_str()->check(CLI::IsMember({"train", "test"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*synth) return run_synth(sa);
        if (*train) return run_train(ta);
        if (*eval) return run_eval(ea);
        if (*angles) return run_angles(aa);
    } catch (const asd::ClassMapError& e) {
        std::cerr << "class-map error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 1;
}
