// Acceptance gate. Prints one PASS/FAIL line per criterion and exits non-zero
// if any fails. Progress goes to stderr.
//
//   acceptance [work_dir]
//
// work_dir holds the synthetic corpus and checkpoints of the end-to-end run
// (default: <tmp>/asdkit_acceptance).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "asd/autodiff/gradcheck.hpp"
#include "asd/autodiff/ops.hpp"
#include "asd/data/synth.hpp"
#include "asd/dsp/mel.hpp"
#include "asd/eval/metrics.hpp"
#include "asd/eval/scoring.hpp"
#include "asd/features/attention.hpp"
#include "asd/features/tgram.hpp"
#include "asd/losses/losses.hpp"
#include "asd/losses/mixup.hpp"
#include "asd/model/backbone.hpp"
#include "asd/model/head.hpp"
#include "asd/model/params.hpp"
#include "asd/train/checkpoint.hpp"
#include "asd/train/trainer.hpp"

using namespace asd;

namespace {

// ---- pinned tolerances -----------------------------------------------------
constexpr double kGradTolerance = 1e-4;
constexpr int kGradPoints = 100;
constexpr double kKinkMargin = 1e-3;  // resample points this close to a kink
constexpr double kGradCpuBudget = 120.0;
constexpr double kIdentityTolerance = 1e-12;
constexpr double kClosedFormTolerance = 1e-6;
constexpr int kMetricInstances = 1000;
constexpr double kPaucTolerance = 1e-12;
constexpr double kAucThreshold = 0.85;

// Desk-scale run settings.
constexpr std::uint64_t kCorpusSeed = 1;
constexpr std::uint64_t kTrainSeed = 0;
constexpr std::size_t kEpochs = 10;
constexpr std::size_t kBatch = 32;
constexpr double kLearningRate = 1e-3;

struct Outcome {
    bool pass = false;
    std::string detail;
};

void report(int n, const Outcome& o, bool& all) {
    std::printf("CRITERION %d %s  %s\n", n, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

ad::Tensor random_tensor(ad::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    ad::Tensor t(std::move(shape));
    for (auto& v : t.data()) v = u(rng);
    return t;
}

// ---- 1: gradients ----------------------------------------------------------

// Runs `point(seed)` until kGradPoints points clear the kink margin; returns the
// worst relative error.
double sweep(const std::function<ad::GradCheckResult(std::uint64_t)>& point, int& rejected) {
    double worst = 0.0;
    int accepted = 0;
    for (std::uint64_t seed = 0; accepted < kGradPoints; ++seed) {
        const auto r = point(seed);
        if (r.kink_margin < kKinkMargin) {
            ++rejected;
            continue;
        }
        worst = std::max(worst, r.max_relative_error);
        ++accepted;
    }
    return worst;
}

ad::GradCheckResult loss_point(losses::LossVariant v, std::uint64_t seed) {
    std::mt19937_64 rng(1000 + seed);
    constexpr std::size_t kB = 3, kK = 4, kD = 6;
    std::map<std::string, ad::Tensor> inputs{{"h", random_tensor({kB, kD}, rng)}, {"w", random_tensor({kK, kD}, rng)}};
    losses::BatchTargets t;
    for (std::size_t b = 0; b < kB; ++b) {
        t.yi.push_back(rng() % kK);
        t.yj.push_back(rng() % kK);
    }
    t.lambda = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    losses::LossConfig cfg;
    cfg.variant = v;
    const ad::GraphBuilder build = [&](ad::Graph& g, const ad::NodeMap& n) {
        return losses::batch_loss(g, n.at("h"), n.at("w"), t, cfg);
    };
    return ad::check_gradients(build, inputs, {1e-5, 0, seed});
}

ad::GradCheckResult attention_point(std::uint64_t seed) {
    std::mt19937_64 rng(2000 + seed);
    std::map<std::string, ad::Tensor> inputs{{"x", random_tensor({2, 5, 6}, rng, -2.0, 2.0)}};
    const auto w = random_tensor({2, 5, 6}, rng);
    const ad::GraphBuilder build = [&](ad::Graph& g, const ad::NodeMap& n) {
        const auto a = features::temporal_attention(g, n.at("x"));
        return ad::sum_all(g, ad::mul(g, a.attended, g.constant(w)));
    };
    return ad::check_gradients(build, inputs, {1e-5, 0, seed});
}

// Biases feeding a channel norm have an identically zero gradient; they are
// held fixed in the check (finite differences there are pure rounding noise).
bool feeds_norm(const std::string& name) {
    return name == "tgram.front.bias" ||
           (name.find("conv.bias") != std::string::npos && name.rfind("backbone.", 0) == 0) ||
           (name.rfind("tgram.block", 0) == 0 && name.find("conv.bias") != std::string::npos &&
            name != "tgram.block1.conv.bias");
}

ad::GradCheckResult tgram_point(std::uint64_t seed) {
    std::mt19937_64 rng(3000 + seed);
    features::TgramParams p;
    p.kernel = 8;
    p.stride = 4;
    p.padding = 4;
    constexpr std::size_t kC = 4;
    p.front_weight = random_tensor({kC, 1, p.kernel}, rng, -0.5, 0.5);
    p.front_bias = random_tensor({kC}, rng, -0.1, 0.1);
    for (int i = 0; i < 2; ++i) {
        p.blocks.push_back({random_tensor({kC}, rng, 0.5, 1.5), random_tensor({kC}, rng, -0.2, 0.2),
                            random_tensor({kC, kC, 3}, rng, -0.5, 0.5), random_tensor({kC}, rng, -0.1, 0.1)});
    }
    const auto wave = random_tensor({2, 1, 40}, rng);
    const auto w = random_tensor({2, kC, 11}, rng);
    std::map<std::string, ad::Tensor> inputs{{"wave", wave}};
    p.visit([&](const std::string& name, const ad::Tensor& t) {
        if (!feeds_norm(name)) inputs[name] = t;
    });
    const ad::GraphBuilder build = [&](ad::Graph& g, const ad::NodeMap& n) {
        ad::ParamBinding nodes;
        p.visit([&](const std::string& name, const ad::Tensor& t) {
            if (n.count(name)) nodes.alias(t, n.at(name));
            else nodes.bind(g, name, t, false);
        });
        return ad::sum_all(g, ad::mul(g, features::tgram(g, n.at("wave"), p, nodes), g.constant(w)));
    };
    return ad::check_gradients(build, inputs, {1e-5, 12, seed});
}

ad::GradCheckResult backbone_point(std::uint64_t seed) {
    std::mt19937_64 rng(4000 + seed);
    auto b = model::make_backbone(3, {4, 6}, 5);
    b.visit([&](const std::string& name, ad::Tensor& t) {
        const bool gamma = name.find("gamma") != std::string::npos;
        t = random_tensor(t.shape(), rng, gamma ? 0.5 : -0.5, gamma ? 1.5 : 0.5);
    });
    const auto w = random_tensor({2, 5}, rng);
    std::map<std::string, ad::Tensor> inputs{{"x", random_tensor({2, 3, 8, 7}, rng)}};
    b.visit([&](const std::string& name, const ad::Tensor& t) {
        if (!feeds_norm(name)) inputs[name] = t;
    });
    const ad::GraphBuilder build = [&](ad::Graph& g, const ad::NodeMap& n) {
        ad::ParamBinding nodes;
        b.visit([&](const std::string& name, const ad::Tensor& t) {
            if (n.count(name)) nodes.alias(t, n.at(name));
            else nodes.bind(g, name, t, false);
        });
        return ad::sum_all(g, ad::mul(g, model::backbone_forward(g, n.at("x"), b, nodes), g.constant(w)));
    };
    return ad::check_gradients(build, inputs, {1e-5, 12, seed});
}

Outcome criterion_gradients() {
    const std::clock_t start = std::clock();
    std::ostringstream detail;
    bool pass = true;
    int rejected = 0;
    const auto run = [&](const std::string& name, const std::function<ad::GradCheckResult(std::uint64_t)>& f) {
        const double worst = sweep(f, rejected);
        detail << name << "=" << fmt("%.1e", worst) << " ";
        pass = pass && worst < kGradTolerance;
        std::fprintf(stderr, "  gradients %-13s worst rel err %.2e\n", name.c_str(), worst);
    };
    using losses::LossVariant;
    run("arcface", [](std::uint64_t s) { return loss_point(LossVariant::kArcFace, s); });
    run("arcmix", [](std::uint64_t s) { return loss_point(LossVariant::kArcMix, s); });
    run("noisy-arcmix", [](std::uint64_t s) { return loss_point(LossVariant::kNoisyArcMix, s); });
    run("attention", attention_point);
    run("tgram", tgram_point);
    run("backbone", backbone_point);
    const double cpu = static_cast<double>(std::clock() - start) / CLOCKS_PER_SEC;
    pass = pass && cpu < kGradCpuBudget;
    detail << "(" << kGradPoints << " points each, " << rejected << " resampled near kinks, " << fmt("%.1f", cpu)
           << " s CPU)";
    return {pass, detail.str()};
}

// ---- 2: loss identities ----------------------------------------------------

// Independent long-double oracle: -log softmax(s * cos(theta + m [y]))_target.
long double oracle_arcface(const std::vector<double>& cos, std::size_t y, double m, double s, std::size_t target) {
    std::vector<long double> z(cos.size());
    for (std::size_t k = 0; k < cos.size(); ++k) {
        const long double th = std::acos(static_cast<long double>(cos[k]));
        z[k] = s * (k == y ? std::cos(th + m) : static_cast<long double>(cos[k]));
    }
    const long double mx = *std::max_element(z.begin(), z.end());
    long double sum = 0.0L;
    for (auto v : z) sum += std::exp(v - mx);
    return mx + std::log(sum) - z[target];
}

Outcome criterion_losses() {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-0.99, 0.99), unit(0.0, 1.0);
    double e_ce = 0, e_mix = 0, e_nam1 = 0, e_lin = 0, e_oracle = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t k = 2 + rng() % 6;
        std::vector<double> cos(k);
        for (auto& c : cos) c = u(rng);
        const std::size_t yi = rng() % k, yj = rng() % k;
        const double lam = unit(rng);
        losses::LossConfig c0;
        c0.margin = 0.0;
        std::vector<double> scaled(k);
        for (std::size_t j = 0; j < k; ++j) scaled[j] = 30.0 * cos[j];
        e_ce = std::max(e_ce, std::abs(losses::arcface_loss(cos, yi, c0) - losses::cross_entropy(scaled, yi)));

        const losses::LossConfig c;
        const double afi = static_cast<double>(oracle_arcface(cos, yi, c.margin, c.scale, yi));
        const double afj = static_cast<double>(oracle_arcface(cos, yj, c.margin, c.scale, yj));
        e_oracle = std::max(e_oracle, std::abs(losses::arcface_loss(cos, yi, c) - afi));
        e_mix = std::max(e_mix, std::abs(losses::arcmix_loss(cos, yi, yj, lam, c) - (lam * afi + (1 - lam) * afj)));
        e_nam1 = std::max(e_nam1, std::abs(losses::noisy_arcmix_loss(cos, yi, yj, 1.0, c) - losses::arcface_loss(cos, yi, c)));
        // Soft-label CE is linear in the label; the logits carry the margin on yi only.
        const double to_yi = static_cast<double>(oracle_arcface(cos, yi, c.margin, c.scale, yi));
        const double to_yj = static_cast<double>(oracle_arcface(cos, yi, c.margin, c.scale, yj));
        e_lin = std::max(e_lin, std::abs(losses::noisy_arcmix_loss(cos, yi, yj, lam, c) - (lam * to_yi + (1 - lam) * to_yj)));
    }

    // Closed forms, K=2, cos=[1,0], m=0.7, s=30. Reference values are the exact
    // expressions below (s*cos(0.7) = 22.9452656..., s*(1+sin(0.7)) = 49.3265306...).
    const losses::LossConfig c;
    const std::vector<double> one_zero{1.0, 0.0};
    const double a = 30.0 * std::cos(0.7);
    const double b = 30.0 * (1.0 + std::sin(0.7));
    const double ref_namix0 = a + std::log1p(std::exp(-a));
    const double ref_arcmix = 0.3 * std::log1p(std::exp(-a)) + 0.7 * (b + std::log1p(std::exp(-b)));
    const double ref_namix_half = 0.5 * std::log1p(std::exp(-a)) + 0.5 * ref_namix0;
    const double got_namix0 = losses::noisy_arcmix_loss(one_zero, 0, 1, 0.0, c);
    const double got_arcmix = losses::arcmix_loss(one_zero, 0, 1, 0.3, c);
    const double got_namix_half = losses::noisy_arcmix_loss(one_zero, 0, 1, 0.5, c);
    const double e_closed = std::max({std::abs(got_namix0 - ref_namix0), std::abs(got_arcmix - ref_arcmix),
                                      std::abs(got_namix_half - ref_namix_half)});
    const auto margin = losses::margin_logits(one_zero, 0, c);
    const double e_logit = std::max(std::abs(margin[0] - a), std::abs(margin[1]));

    const bool pass = e_ce <= kIdentityTolerance && e_mix <= kIdentityTolerance && e_nam1 <= kIdentityTolerance &&
                      e_lin <= kIdentityTolerance && e_oracle <= kIdentityTolerance && e_closed <= kClosedFormTolerance &&
                      e_logit <= kClosedFormTolerance;
    std::ostringstream d;
    d << "af(m=0)-ce=" << fmt("%.1e", e_ce) << " arcmix=" << fmt("%.1e", e_mix) << " namix(1)=" << fmt("%.1e", e_nam1)
      << " linearity=" << fmt("%.1e", e_lin) << " closed forms " << fmt("%.6f", got_namix0) << "/"
      << fmt("%.6f", got_arcmix) << "/" << fmt("%.6f", got_namix_half) << " err " << fmt("%.1e", e_closed);
    return {pass, d.str()};
}

// ---- 3: metrics ------------------------------------------------------------

double brute_auc(const std::vector<double>& n, const std::vector<double>& a) {
    std::uint64_t twice = 0;
    for (double x : a)
        for (double y : n) twice += x > y ? 2 : (x == y ? 1 : 0);
    return static_cast<double>(twice) / (2.0 * static_cast<double>(n.size() * a.size()));
}

std::vector<eval::ScoredClip> scored(const std::vector<double>& n, const std::vector<double>& a, data::MachineKey key) {
    std::vector<eval::ScoredClip> out;
    for (double s : n) out.push_back({key, data::Condition::kNormal, s});
    for (double s : a) out.push_back({key, data::Condition::kAnomaly, s});
    return out;
}

Outcome criterion_metrics() {
    std::mt19937_64 rng(91);
    int auc_mismatch = 0;
    double worst_p1 = 0.0;
    for (int inst = 0; inst < kMetricInstances; ++inst) {
        const std::size_t nn = 1 + rng() % 40, na = 1 + rng() % 40;
        const int levels = 2 + static_cast<int>(rng() % 12);
        std::uniform_int_distribution<int> lv(0, levels);
        std::vector<double> n, a;
        for (std::size_t i = 0; i < nn; ++i) n.push_back(lv(rng) / static_cast<double>(levels));
        for (std::size_t i = 0; i < na; ++i) a.push_back(lv(rng) / static_cast<double>(levels));
        if (eval::auc(n, a) != brute_auc(n, a)) ++auc_mismatch;
        worst_p1 = std::max(worst_p1, std::abs(eval::pauc(n, a, 1.0) - eval::auc(n, a)));
    }
    const double half = eval::pauc(std::vector<double>{0.6, 0.1}, std::vector<double>{0.9, 0.4}, 0.5);

    // Two types, two IDs each: fan {1.0, 0.75}, pump {0.5, 1.0}.
    std::vector<eval::ScoredClip> all;
    const auto add = [&](const std::string& t, int id, std::vector<double> n, std::vector<double> a) {
        const auto c = scored(n, a, {t, id});
        all.insert(all.end(), c.begin(), c.end());
    };
    add("fan", 0, {0.1, 0.2}, {0.8, 0.9});
    add("fan", 1, {0.4, 0.1}, {0.9, 0.3});
    add("pump", 0, {0.5}, {0.5});
    add("pump", 1, {0.1}, {0.7});
    const auto r = eval::evaluate_metrics(all);
    const bool layout = r.types.size() == 2 && r.types[0].mauc == 0.75 && r.types[1].mauc == 0.5 &&
                        r.average_mauc == 0.625 && r.types[0].auc == 0.875 && r.types[1].auc == 0.75 &&
                        r.average_auc == 0.8125;

    const bool pass = auc_mismatch == 0 && worst_p1 <= kPaucTolerance && half == 0.5 && layout;
    std::ostringstream d;
    d << "auc vs pair counting " << (kMetricInstances - auc_mismatch) << "/" << kMetricInstances
      << " exact, |pauc(1)-auc|max=" << fmt("%.1e", worst_p1) << ", pauc case=" << fmt("%.17g", half)
      << ", mAUC layout " << (layout ? "ok" : "wrong");
    return {pass, d.str()};
}

// ---- 4: shapes -------------------------------------------------------------

Outcome criterion_shapes() {
    const dsp::MelConfig mel;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.1);
    dsp::Waveform wave{std::vector<double>(10 * 16000), 16000};
    for (auto& v : wave.samples) v = noise(rng);
    const auto sgram = dsp::log_mel(wave, mel);
    const auto params = model::init_params(0, model::ModelDims{}, mel);
    const auto tg = features::tgram(wave, params.tgram, mel);
    const auto ta = features::temporal_attention(sgram);
    const auto stack = features::stack_features(ta.attended, sgram.values, tg);
    const ad::Shape want{128, 313};
    const bool pass = sgram.values.shape() == want && tg.shape() == want && ta.attended.shape() == want &&
                      stack.channels.shape() == ad::Shape{3, 128, 313};
    return {pass, "Sgram " + ad::to_string(sgram.values.shape()) + " Tgram " + ad::to_string(tg.shape()) + " TAgram " +
                      ad::to_string(ta.attended.shape()) + " stack " + ad::to_string(stack.channels.shape())};
}

// ---- 5 and 6: end-to-end ---------------------------------------------------

train::TrainConfig desk_config(losses::LossVariant v) {
    train::TrainConfig c;
    c.epochs = kEpochs;
    c.batch_size = kBatch;
    c.learning_rate = kLearningRate;
    c.seed = kTrainSeed;
    c.loss.variant = v;
    return c;
}

train::TrainResult run_training(const data::Manifest& m, losses::LossVariant v, const char* tag) {
    const auto start = std::chrono::steady_clock::now();
    auto r = train::train(m, desk_config(v), [&](const train::EpochStats& e) {
        std::fprintf(stderr, "  %s epoch %zu loss %.4f (%.1f s)\n", tag, e.epoch, e.mean_loss, e.seconds);
    });
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "  %s done in %.0f s\n", tag, s);
    return r;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void criteria_end_to_end(const std::filesystem::path& work, bool& all) {
    const auto start = std::chrono::steady_clock::now();
    data::CorpusConfig cc;
    cc.machine_types = 4;
    cc.ids_per_type = 2;
    cc.train_clips = 100;
    cc.test_clips = 25;
    cc.duration_s = 2.0;
    cc.seed = kCorpusSeed;
    std::filesystem::remove_all(work / "corpus");
    std::fprintf(stderr, "  synthesising corpus in %s\n", (work / "corpus").c_str());
    const auto manifest = data::write_synthetic_corpus(cc, work / "corpus");

    const auto namix = run_training(manifest, losses::LossVariant::kNoisyArcMix, "noisy-arcmix");
    const auto namix_again = run_training(manifest, losses::LossVariant::kNoisyArcMix, "noisy-arcmix (repeat)");
    const auto ce = run_training(manifest, losses::LossVariant::kCrossEntropy, "ce");

    const auto na = eval::analyse_split(namix.checkpoint, manifest, data::Split::kTest);
    const auto ca = eval::analyse_split(ce.checkpoint, manifest, data::Split::kTest);
    const auto na_scored = eval::to_scored(na);
    const auto rep = eval::evaluate_metrics(na_scored);
    const auto na_angles = eval::to_angles(na);
    const auto ce_angles = eval::to_angles(ca);
    const double med_na = eval::median_angle(na_angles, data::Condition::kNormal);
    const double med_ce = eval::median_angle(ce_angles, data::Condition::kNormal);

    const bool same_run = train::encode_checkpoint(namix.checkpoint) == train::encode_checkpoint(namix_again.checkpoint);
    const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;

    std::ostringstream d5;
    d5 << "(a) noisy-arcmix AUC " << fmt("%.4f", rep.average_auc) << " (>= " << kAucThreshold << "), pAUC "
       << fmt("%.4f", rep.average_pauc) << ", mAUC " << fmt("%.4f", rep.average_mauc) << "; (b) median normal angle "
       << fmt("%.4f", med_na) << " rad vs ce " << fmt("%.4f", med_ce) << "; (c) repeat run "
       << (same_run ? "byte-identical" : "DIFFERS") << "; " << fmt("%.1f", minutes) << " min";
    report(5, {rep.average_auc >= kAucThreshold && med_na < med_ce && same_run, d5.str()}, all);

    // 6: persistence. The loaded checkpoint must also score identically.
    const auto a_path = work / "namix.ckpt";
    const auto b_path = work / "namix_resaved.ckpt";
    train::save_checkpoint(namix.checkpoint, a_path);
    const auto loaded = train::load_checkpoint(a_path);
    train::save_checkpoint(loaded, b_path);
    const bool resave = read_bytes(a_path) == read_bytes(b_path);
    const auto reloaded = eval::analyse_split(loaded, manifest, data::Split::kTest);
    bool same_scores = reloaded.size() == na.size();
    for (std::size_t i = 0; same_scores && i < na.size(); ++i) same_scores = reloaded[i].score == na[i].score;
    std::ostringstream d6;
    d6 << "save->load->save " << (resave ? "byte-identical" : "DIFFERS") << " (" << read_bytes(a_path).size()
       << " bytes); reloaded scores " << (same_scores ? "identical" : "DIFFER") << "; training reproducible: "
       << (same_run ? "yes" : "no");
    report(6, {resave && same_scores && same_run, d6.str()}, all);
}

}  // namespace

int main(int argc, char** argv) {
    const std::filesystem::path work =
        argc > 1 ? std::filesystem::path(argv[1]) : std::filesystem::temp_directory_path() / "asdkit_acceptance";
    std::filesystem::create_directories(work);
    bool all = true;
    try {
        report(1, criterion_gradients(), all);
        report(2, criterion_losses(), all);
        report(3, criterion_metrics(), all);
        report(4, criterion_shapes(), all);
        criteria_end_to_end(work, all);
    } catch (const std::exception& e) {
        std::printf("acceptance aborted: %s\n", e.what());
        return 2;
    }
    std::printf("%s\n", all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL");
    return all ? 0 : 1;
}
