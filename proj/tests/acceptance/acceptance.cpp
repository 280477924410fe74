// Acceptance suite: one pass/fail line per criterion, exit 0 iff every
// executed criterion passed. Each criterion pins its tolerance in code; the
// heavy language-model criterion runs its seeds/modes two at a time.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "corpus.hpp"
#include "crope/checkpoint.hpp"
#include "crope/grad_check.hpp"
#include "crope/train.hpp"
#include "crope/verify.hpp"

#include <malloc.h>

namespace fs = std::filesystem;
using namespace crope;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string g_workdir = "acceptance-out";
std::size_t g_lm_steps = 2000;  // pinned by the criterion; overridable for debugging only

// ---- criterion 1: exact attention-parameter savings and count equalities ----
Outcome criterion1() {
    const std::vector<std::pair<std::size_t, std::size_t>> dims = {{8, 2}, {64, 4}, {1024, 8}};
    const std::vector<std::pair<Mode, double>> want = {{Mode::none, 0.0},
                                                       {Mode::crope_qk, 0.25},
                                                       {Mode::crope_qkv, 0.375},
                                                       {Mode::crope_all, 0.5},
                                                       {Mode::half_rope_qk, 0.25},
                                                       {Mode::half_rope_all, 0.5}};
    std::ostringstream detail;
    for (auto [d, h] : dims) {
        ModelConfig base;
        base.d_model = d;
        base.n_heads = h;
        base.d_ff = d;
        base.vocab_size = 64;
        base.max_seq_len = 8;
        std::map<Mode, ParamAudit> audits;
        for (auto [mode, frac] : want) {
            ModelConfig cfg = base;
            cfg.mode = mode;
            audits[mode] = param_audit(cfg);
            if (audits[mode].attention_savings != frac)
                return {false, "d_model=" + std::to_string(d) + " mode=" + mode_name(mode) + " savings " +
                                   std::to_string(audits[mode].attention_savings) + " != " + std::to_string(frac)};
        }
        if (audits[Mode::crope_qk].total != audits[Mode::half_rope_qk].total)
            return {false, "crope_qk total != half_rope_qk total at d_model=" + std::to_string(d)};
        if (audits[Mode::crope_all].total != audits[Mode::half_rope_all].total)
            return {false, "crope_all total != half_rope_all total at d_model=" + std::to_string(d)};
        detail << "d" << d << " ok; ";
    }
    return {true, detail.str() + "savings exactly {0, 25, 37.5, 50, 25, 50}%, totals match half-width"};
}

// ---- criterion 2: tied forward vs complex-arithmetic oracle ----
Outcome criterion2() {
    auto res = checks::complex_oracle_equivalence(1200);
    std::ostringstream os;
    os << "max |real - complex oracle| = " << res.measured << " over 1200 cases (allowed 1e-12)";
    return {res.pass, os.str()};
}

// ---- criterion 3: real/complex score identity + shift invariance ----
Outcome criterion3() {
    auto ident = checks::real_complex_identity(1200);
    auto shift = checks::rope_shift_invariance(1200);
    std::ostringstream os;
    os << "identity dev " << ident.measured << ", shift dev " << shift.measured << " (allowed 1e-10)";
    return {ident.pass && shift.pass, os.str()};
}

// ---- criterion 4: function-space subset ----
Outcome criterion4() {
    Rng rng(97, 0);
    double worst = 0;
    for (int c = 0; c < 500; ++c) {
        const double a = rng.normal(), b = rng.normal();
        auto coef = pauli_decompose({a, b, -b, a});
        worst = std::max({worst, std::abs(coef[1]), std::abs(coef[3])});
    }
    if (worst != 0.0) return {false, "tied block produced nonzero c1/c3: " + std::to_string(worst)};

    auto [inputs, targets] = reflection_membership_case(32);
    const double refl = crope_membership_check(targets, inputs).residual;
    if (refl < 0.1) return {false, "reflection residual " + std::to_string(refl) + " < 0.1"};

    auto app = checks::membership_shift_construction();
    std::ostringstream os;
    os << "c1=c3=0 exact; reflection residual " << refl << " >= 0.1; construction residual " << app.measured
       << " <= 1e-10";
    return {app.pass, os.str()};
}

// ---- criterion 5: analytic delta-attention ----
Outcome criterion5() {
    auto argmax = checks::shift_construction_argmax();
    std::ostringstream os;
    os << (argmax.pass ? "argmax at m+s for all m in [8,24], s in {1,2}" : "argmax misses");

    // Normalized delta-kernel max off-peak over |delta| in [1, 32] must
    // strictly decrease across D = 16 -> 64 -> 256 (as stated; see the
    // measured values in the detail).
    std::vector<double> maxima;
    for (std::size_t d : {16, 64, 256}) {
        RopeConfig cfg(d, 5000.0);
        double mx = -2;
        for (long long delta = 1; delta <= 32; ++delta) mx = std::max(mx, delta_kernel(cfg, delta));
        maxima.push_back(mx);
    }
    const bool strict = maxima[0] > maxima[1] && maxima[1] > maxima[2];
    os << "; kernel max off-peak D16=" << maxima[0] << " D64=" << maxima[1] << " D256=" << maxima[2]
       << (strict ? " strictly decreasing" : " NOT strictly decreasing");
    return {argmax.pass && strict, os.str()};
}

// ---- criterion 6: finite-difference gradient check per mode ----

// Central differences are checked at a generic parameter point: the tiny
// trained-model init leaves embedding rows with near-zero norm, where the
// pre-norm's curvature inflates the O(h^2) truncation term past the
// tolerance even though the analytic gradient is right.
void randomize_params(Model<double>& model, uint64_t seed) {
    Rng rng(seed, Rng::stream_of("grad-check-point"));
    for (auto& p : model.params()) {
        const bool is_gain = p.name.find("gain") != std::string::npos;
        for (auto& v : p.tensor.value()) v = is_gain ? 1.0 + 0.2 * rng.normal() : 0.25 * rng.normal();
    }
}

Outcome criterion6() {
    std::ostringstream os;
    for (const auto& [mode, name] : mode_table()) {
        ModelConfig cfg;
        cfg.n_layers = 1;
        cfg.n_heads = 2;
        cfg.d_model = 16;
        cfg.d_ff = 32;
        cfg.vocab_size = 11;
        cfg.max_seq_len = 8;
        cfg.mode = mode;
        cfg.seed = 31;
        Model<double> model(cfg);
        randomize_params(model, 1234);
        const std::vector<int32_t> toks = {0, 5, 9, 2, 7, 1, 10, 4};
        const std::vector<int32_t> targets = {5, 9, 2, 7, 1, 10, 4, 8};
        auto f = [&] { return cross_entropy(model.forward(toks, 1, toks.size()), targets); };
        auto rep = grad_check(f, model.params(), 1e-5);
        os << name << "=" << rep.max_rel_err << " ";
        if (rep.max_rel_err > 1e-4)
            return {false, "mode " + name + " rel err " + std::to_string(rep.max_rel_err) + " > 1e-4 at " +
                               rep.worst_param};
    }
    return {true, "max rel err per mode: " + os.str() + "(allowed 1e-4)"};
}

// ---- criterion 7: trained toy task ----
Outcome criterion7() {
    auto attempt = [&](uint64_t seed) {
        ToyTaskSpec spec;
        spec.seed = seed;
        auto res = toy_task_train(Mode::crope_qk, spec, 2000, seed);
        const bool ok = res.accuracy >= 0.95 && res.attention_rate >= 0.90;
        std::ostringstream os;
        os << "seed " << seed << ": accuracy=" << res.accuracy << " attention_rate=" << res.attention_rate;
        return std::pair<bool, std::string>(ok, os.str());
    };
    auto first = attempt(0);
    if (first.first) return {true, first.second + " (thresholds 0.95 / 0.90)"};
    // Stochastic criterion: two backup seeds, 2-of-3 majority.
    auto second = attempt(1);
    auto third = attempt(2);
    const int passes = int(first.first) + int(second.first) + int(third.first);
    return {passes >= 2, first.second + "; " + second.second + "; " + third.second + " (2/3 majority needed)"};
}

// ---- criterion 8: desk-scale LM qualitative ordering ----
struct LmRun {
    Mode mode;
    uint64_t seed;
    std::vector<MetricsRow> metrics;
    double final_val = 0;
    std::string error;
};

Outcome criterion8() {
    const std::string corpus_path = g_workdir + "/corpus.txt";
    fs::create_directories(g_workdir);
    if (!fs::exists(corpus_path)) write_text_file(corpus_path, testing::synthesize_corpus(1 << 20, 42));
    const auto ids = tokenize_bytes(read_text_file(corpus_path));

    std::vector<LmRun> runs;
    for (const auto& [mode, name] : mode_table())
        for (uint64_t seed : {0, 1, 2}) runs.push_back({mode, seed});

    std::atomic<std::size_t> next{0};
    std::mutex io;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= runs.size()) return;
            auto& run = runs[i];
            TrainConfig cfg;
            cfg.model.mode = run.mode;
            cfg.model.seed = run.seed;
            cfg.seed = run.seed;
            cfg.steps = g_lm_steps;
            cfg.eval_every = 500;
            cfg.data_path = corpus_path;
            const std::string dir = g_workdir + "/lm/" + mode_name(run.mode) + "-s" + std::to_string(run.seed);
            try {
                auto res = train(cfg, ids, dir);
                run.metrics = std::move(res.metrics);
                run.final_val = res.final_val_loss;
                std::lock_guard<std::mutex> lock(io);
                std::cout << "  run " << mode_name(run.mode) << " seed " << run.seed
                          << ": final val " << run.final_val << std::endl;
            } catch (const std::exception& e) {
                run.error = e.what();
            }
        }
    };
    std::thread t1(worker), t2(worker);
    t1.join();
    t2.join();

    std::ostringstream os;
    for (auto& run : runs)
        if (!run.error.empty()) return {false, mode_name(run.mode) + " seed " + std::to_string(run.seed) +
                                                   " failed: " + run.error};

    // Stability: EMA train loss strictly decreasing over every 200-step
    // window after warmup.
    for (auto& run : runs) {
        std::vector<double> losses;
        std::vector<std::size_t> steps;
        for (auto& r : run.metrics) {
            losses.push_back(r.train_loss);
            steps.push_back(r.step);
        }
        auto smooth = ema_series(losses, 0.05);
        for (std::size_t i = 0; i + 1 < smooth.size(); ++i) {
            if (steps[i] < 50) continue;
            // find the row exactly 200 steps later
            for (std::size_t j = i + 1; j < smooth.size(); ++j) {
                if (steps[j] == steps[i] + 200) {
                    if (!(smooth[j] < smooth[i]))
                        return {false, mode_name(run.mode) + " seed " + std::to_string(run.seed) +
                                           ": EMA not strictly decreasing over [" + std::to_string(steps[i]) + ", " +
                                           std::to_string(steps[j]) + "]"};
                    break;
                }
            }
        }
    }
    os << "all 18 runs stable; ";

    auto final_of = [&](Mode m, uint64_t s) {
        for (auto& run : runs)
            if (run.mode == m && run.seed == s) return run.final_val;
        return std::nan("");
    };
    int qk_wins = 0, all_wins = 0;
    for (uint64_t s : {0, 1, 2}) {
        qk_wins += final_of(Mode::crope_qk, s) <= final_of(Mode::half_rope_qk, s);
        all_wins += final_of(Mode::crope_all, s) <= final_of(Mode::half_rope_all, s);
    }
    os << "crope_qk<=half_rope_qk in " << qk_wins << "/3, crope_all<=half_rope_all in " << all_wins << "/3 seeds";
    for (uint64_t s : {0, 1, 2})
        os << "; s" << s << ": qk " << final_of(Mode::crope_qk, s) << " vs " << final_of(Mode::half_rope_qk, s)
           << ", all " << final_of(Mode::crope_all, s) << " vs " << final_of(Mode::half_rope_all, s);
    return {qk_wins >= 2 && all_wins >= 2, os.str()};
}

// ---- criterion 9: determinism and persistence ----
Outcome criterion9() {
    fs::create_directories(g_workdir);
    const std::string corpus_path = g_workdir + "/corpus-small.txt";
    if (!fs::exists(corpus_path)) write_text_file(corpus_path, testing::synthesize_corpus(200 * 1024, 7));
    const auto ids = tokenize_bytes(read_text_file(corpus_path));

    TrainConfig cfg;
    cfg.model.n_layers = 1;
    cfg.model.d_model = 64;
    cfg.model.d_ff = 128;
    cfg.model.n_heads = 4;
    cfg.model.max_seq_len = 64;
    cfg.seq_len = 64;
    cfg.batch_size = 8;
    cfg.steps = 300;
    cfg.eval_every = 150;
    cfg.model.mode = Mode::crope_qk;
    cfg.data_path = corpus_path;

    auto r1 = train(cfg, ids, g_workdir + "/det-a");
    auto r2 = train(cfg, ids, g_workdir + "/det-b");

    // Metrics must agree byte-for-byte once the measured wall_ms column is
    // dropped (timings live in the run manifest, not the data contract).
    auto strip_wall = [](const std::string& csv) {
        std::istringstream in(csv);
        std::ostringstream out;
        std::string line;
        while (std::getline(in, line)) {
            const auto last = line.rfind(',');
            out << line.substr(0, last) << "\n";
        }
        return out.str();
    };
    const std::string m1 = strip_wall(read_text_file(r1.metrics_path));
    const std::string m2 = strip_wall(read_text_file(r2.metrics_path));
    if (m1 != m2) return {false, "metrics differ between identical runs"};

    // Checkpoint payloads byte-identical across the two runs.
    if (read_text_file(r1.checkpoint_path) != read_text_file(r2.checkpoint_path))
        return {false, "checkpoints differ between identical runs"};

    // Round trip reproduces logits bitwise at stored precision.
    Model<float> loaded = load_checkpoint(r1.checkpoint_path);
    std::vector<int32_t> toks(ids.begin(), ids.begin() + 64);
    auto a = r1.model.forward(toks, 1, toks.size());
    auto b = loaded.forward(toks, 1, toks.size());
    if (a.value() != b.value()) return {false, "reloaded checkpoint changes logits"};
    return {true, "byte-identical metrics (less wall_ms) and checkpoints; reload reproduces logits bitwise"};
}

}  // namespace

int main(int argc, char** argv) {
    // Training allocates and frees the graph every step; keep the arena.
    mallopt(M_MMAP_THRESHOLD, 1 << 28);
    mallopt(M_TRIM_THRESHOLD, 1 << 28);
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--only" && i + 1 < argc)
            only.push_back(std::stoi(argv[++i]));
        else if (arg == "--workdir" && i + 1 < argc)
            g_workdir = argv[++i];
        else if (arg == "--lm-steps" && i + 1 < argc)
            g_lm_steps = std::stoull(argv[++i]);
        else {
            std::cerr << "usage: acceptance [--only N]... [--workdir DIR] [--lm-steps N]\n";
            return 2;
        }
    }

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"parameter savings and count equalities", criterion1},
        {"complex-oracle equivalence", criterion2},
        {"real/complex score identity and shift invariance", criterion3},
        {"function-space subset", criterion4},
        {"analytic delta-attention", criterion5},
        {"gradient correctness per mode", criterion6},
        {"trained toy task", criterion7},
        {"desk-scale LM qualitative ordering", criterion8},
        {"determinism and persistence", criterion9},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int num = int(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), num) == only.end()) continue;
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("exception: ") + e.what()};
        }
        failures += out.pass ? 0 : 1;
        std::cout << (out.pass ? "[PASS]" : "[FAIL]") << " criterion " << num << ": " << criteria[i].first << " — "
                  << out.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
