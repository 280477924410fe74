// Command-line front end: verification, parameter audit, the analytic toy
// experiments, byte-level LM training and checkpoint evaluation. Quantitative
// output is CSV-first; tables on stdout are derived views.

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crope/checkpoint.hpp"
#include "crope/config.hpp"
#include "crope/train.hpp"
#include "crope/verify.hpp"

#include <malloc.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

long long unix_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

int run_verify(const std::string& filter, bool negative_control) {
    if (negative_control) crope::tying_corruption_hook() = true;
    std::size_t ran = 0, failed = 0;
    for (const auto& check : crope::all_checks()) {
        if (!filter.empty() && check.module != filter) continue;
        ++ran;
        crope::CheckResult res;
        try {
            res = check.fn();
        } catch (const std::exception& e) {
            res = {false, 0.0, 0.0, std::string("exception: ") + e.what()};
        }
        if (!res.pass) ++failed;
        std::cout << (res.pass ? "[PASS] " : "[FAIL] ") << check.module << "/" << check.name
                  << "  measured=" << std::setprecision(6) << res.measured << " allowed=" << res.allowed << "  "
                  << res.note << "\n";
    }
    if (ran == 0) {
        std::cerr << "verify: no checks match filter '" << filter << "'\n";
        return 2;
    }
    std::cout << ran - failed << "/" << ran << " checks passed\n";
    return failed == 0 ? 0 : 1;
}

int run_audit(const crope::ModelConfig& base, const std::string& out_dir) {
    using crope::Mode;
    struct Row {
        std::string name;
        crope::ParamAudit audit;
    };
    std::vector<Row> rows;
    for (const auto& [mode, name] : crope::mode_table()) {
        crope::ModelConfig cfg = base;
        cfg.mode = mode;
        rows.push_back({name, crope::param_audit(cfg)});
    }

    // The audited counts must show the exact savings pattern and the
    // crope <-> half-width equalities before anything is printed.
    const std::vector<double> expect_savings = {0.0, 0.25, 0.375, 0.5, 0.25, 0.5};
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].audit.attention_savings != expect_savings[i]) {
            std::cerr << "audit: mode " << rows[i].name << " has savings " << rows[i].audit.attention_savings
                      << ", expected " << expect_savings[i] << "\n";
            return 1;
        }
        if (rows[i].audit.embedding != rows[0].audit.embedding || rows[i].audit.ffn != rows[0].audit.ffn ||
            rows[i].audit.norms != rows[0].audit.norms) {
            std::cerr << "audit: mode " << rows[i].name << " changes embedding/ffn/norm counts\n";
            return 1;
        }
    }
    if (rows[1].audit.total != rows[4].audit.total || rows[3].audit.total != rows[5].audit.total) {
        std::cerr << "audit: crope totals do not match half-width baselines\n";
        return 1;
    }

    // The tie halves stored parameters, not arithmetic: materialized blocks
    // still multiply densely, so projection MACs/token drop only for the
    // half-width baselines.
    auto proj_macs = [&](crope::Mode m) {
        crope::ModelConfig c = base;
        c.mode = m;
        return c.n_layers * (2 * c.d_model * c.qk_dim() + c.d_model * c.v_dim() + c.v_dim() * c.d_model);
    };
    std::ostringstream csv;
    csv << "mode,embedding,attention,ffn,norms,total,attention_savings_pct,proj_macs_per_token\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        csv << r.name << "," << r.audit.embedding << "," << r.audit.attention << "," << r.audit.ffn << ","
            << r.audit.norms << "," << r.audit.total << "," << r.audit.attention_savings * 100.0 << ","
            << proj_macs(crope::mode_table()[i].first) << "\n";
    }
    fs::create_directories(out_dir);
    crope::write_text_file(out_dir + "/audit.csv", csv.str());

    std::cout << "parameter audit (n_layers=" << base.n_layers << ", d_model=" << base.d_model
              << ", d_ff=" << base.d_ff << ", vocab=" << base.vocab_size << ")\n";
    std::cout << std::left << std::setw(15) << "mode" << std::right << std::setw(12) << "embedding" << std::setw(12)
              << "attention" << std::setw(12) << "ffn" << std::setw(9) << "norms" << std::setw(12) << "total"
              << std::setw(10) << "savings\n";
    for (const auto& r : rows) {
        std::cout << std::left << std::setw(15) << r.name << std::right << std::setw(12) << r.audit.embedding
                  << std::setw(12) << r.audit.attention << std::setw(12) << r.audit.ffn << std::setw(9)
                  << r.audit.norms << std::setw(12) << r.audit.total << std::setw(8)
                  << r.audit.attention_savings * 100.0 << "%\n";
    }
    std::cout << "wrote " << out_dir << "/audit.csv\n";
    return 0;
}

std::string profile_csv(const Eigen::MatrixXd& scores) {
    // Rows are query positions; values are softmax-normalized over the window.
    std::ostringstream os;
    os.precision(17);
    os << "m";
    for (Eigen::Index n = 0; n < scores.cols(); ++n) os << "," << n;
    os << "\n";
    for (Eigen::Index m = 0; m < scores.rows(); ++m) {
        double mx = scores(m, 0);
        for (Eigen::Index n = 1; n < scores.cols(); ++n) mx = std::max(mx, scores(m, n));
        double total = 0;
        for (Eigen::Index n = 0; n < scores.cols(); ++n) total += std::exp(scores(m, n) - mx);
        os << m;
        for (Eigen::Index n = 0; n < scores.cols(); ++n) os << "," << std::exp(scores(m, n) - mx) / total;
        os << "\n";
    }
    return os.str();
}

std::string attention_csv(const crope::Tensor<float>& att) {
    std::ostringstream os;
    os.precision(9);
    os << "m";
    for (std::size_t n = 0; n < att.cols(); ++n) os << "," << n;
    os << "\n";
    for (std::size_t m = 0; m < att.rows(); ++m) {
        os << m;
        for (std::size_t n = 0; n < att.cols(); ++n) os << "," << att.at(m, n);
        os << "\n";
    }
    return os.str();
}

int run_toy(std::size_t head_dim, std::size_t window, const std::string& out_dir, bool do_train,
            const std::string& mode_str, std::size_t steps, uint64_t seed) {
    fs::create_directories(out_dir);
    crope::RopeConfig cfg(head_dim, 5000.0);
    std::vector<double> weights(head_dim / 4, 1.0 / double(head_dim / 4));
    for (int s : {1, 2}) {
        auto sc = crope::build_shift_construction(cfg, s, weights);
        auto profile = crope::shift_attention_profile(cfg, sc, window);
        crope::write_text_file(out_dir + "/analytic_profile_s" + std::to_string(s) + ".csv", profile_csv(profile));
    }

    std::ostringstream kernel;
    kernel.precision(17);
    kernel << "delta,D16,D64,D256\n";
    crope::RopeConfig k16(16, 5000.0), k64(64, 5000.0), k256(256, 5000.0);
    for (long long delta = 0; delta <= 32; ++delta)
        kernel << delta << "," << crope::delta_kernel(k16, delta) << "," << crope::delta_kernel(k64, delta) << ","
               << crope::delta_kernel(k256, delta) << "\n";
    crope::write_text_file(out_dir + "/delta_kernel.csv", kernel.str());
    std::cout << "wrote analytic profiles and delta-kernel curves to " << out_dir << "\n";

    if (do_train) {
        crope::ToyTaskSpec spec;
        spec.seed = seed;
        auto res = crope::toy_task_train(crope::parse_mode(mode_str), spec, steps, seed);
        std::ostringstream csv;
        csv << "mode,seed,steps,d_model,accuracy,attention_rate,final_loss\n";
        csv << mode_str << "," << seed << "," << steps << "," << res.model_config.d_model << "," << res.accuracy
            << "," << res.attention_rate << "," << res.final_loss << "\n";
        crope::write_text_file(out_dir + "/toy_result.csv", csv.str());

        // One trained attention map per marker kind, from held-out samples.
        crope::Rng rng(seed, crope::Rng::stream_of("toy-heldout"));
        auto hb = crope::toy_task_generate(spec, 2, rng);
        for (const auto& s : hb.samples) {
            auto att = res.model.attention_map(s.tokens, 0, 0);
            const char* tag = s.shift == 1 ? "next" : "nextnext";
            crope::write_text_file(out_dir + "/toy_attention_" + tag + ".csv", attention_csv(att));
        }
        std::cout << "toy task (" << mode_str << ", seed " << seed << "): accuracy=" << res.accuracy
                  << " attention_rate=" << res.attention_rate << "\n";
    }
    return 0;
}

int run_train(const crope::TrainConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    if (cfg.data_path.empty()) throw std::invalid_argument("train: data_path is required");
    fs::create_directories(out_dir);
    const long long started = unix_ms();

    json manifest;
    manifest["subcommand"] = "train";
    manifest["version"] = kVersion;
    manifest["resolved_config"] = crope::serialize_config(cfg);
    manifest["design_flags"] = crope::design_flags_json();
    manifest["seed"] = cfg.seed;
    manifest["started_unix_ms"] = started;
    manifest["notes"] = {{"lm_runs", "desk-scale qualitative comparison; soft evidence only, not a large-scale pretraining result"}};

    try {
        auto res = crope::train(cfg, out_dir);
        manifest["completed"] = true;
        manifest["wall_ms_total"] = unix_ms() - started;
        manifest["final_val_loss"] = res.final_val_loss;
        manifest["artifacts"] = {"metrics.csv", "checkpoint.ckpt"};
        crope::write_text_file(out_dir + "/run_manifest.json", manifest.dump(2) + "\n");
        std::cout << "trained " << cfg.steps << " steps (" << crope::mode_name(cfg.model.mode)
                  << "), final val_loss=" << res.final_val_loss << "\n";
        std::cout << "artifacts in " << out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        manifest["completed"] = false;
        manifest["error"] = e.what();
        manifest["wall_ms_total"] = unix_ms() - started;
        crope::write_text_file(out_dir + "/run_manifest.json", manifest.dump(2) + "\n");
        throw;
    }
}

int run_eval(const std::string& checkpoint_path, const std::string& data_path, const std::string& out_dir) {
    auto ck = crope::read_checkpoint(checkpoint_path);
    crope::Model<float> model = crope::load_checkpoint(checkpoint_path);

    crope::TrainConfig tc;
    if (ck.manifest.contains("train_config"))
        tc = crope::parse_config_text(ck.manifest["train_config"].get<std::string>());
    tc.model = ck.config;
    tc.validate();

    auto ids = crope::tokenize_bytes(crope::read_text_file(data_path));
    auto plan = crope::make_batches(ids, tc.seq_len, tc.batch_size, crope::kValSplitFraction, tc.seed);
    const double loss = crope::evaluate(model, plan.val_batches());
    const double ppl = std::exp(loss);

    std::ostringstream csv;
    csv.precision(17);
    csv << "checkpoint,data,val_loss,perplexity\n";
    csv << checkpoint_path << "," << data_path << "," << loss << "," << ppl << "\n";
    fs::create_directories(out_dir);
    crope::write_text_file(out_dir + "/eval.csv", csv.str());

    std::cout.precision(17);
    std::cout << "val_loss=" << loss << "\n";
    std::cout << "perplexity=" << ppl << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    // Training allocates and frees the graph every step; keep the arena.
    mallopt(M_MMAP_THRESHOLD, 1 << 28);
    mallopt(M_TRIM_THRESHOLD, 1 << 28);
    CLI::App app{"rotary / complex-rotary attention laboratory"};
    app.require_subcommand(0, 1);
    int rc = 2;

    auto* verify = app.add_subcommand("verify", "run the registered invariant and property checks");
    std::string filter;
    bool negative_control = false;
    verify->add_option("--filter", filter, "only run checks of one module");
    verify->add_flag("--negative-control", negative_control, "corrupt a tied weight to prove the check trips");
    verify->callback([&] { rc = run_verify(filter, negative_control); });

    crope::TrainConfig cfg;
    std::vector<std::string> overrides;
    std::string config_path, out_dir = "out";

    auto add_cfg_opts = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "key = value config file");
        sub->add_option("--set", overrides, "config override key=value (repeatable)");
        sub->add_option("--out", out_dir, "output directory");
    };
    auto resolve_cfg = [&] {
        crope::TrainConfig c;
        if (!config_path.empty()) c = crope::parse_config_text(crope::read_text_file(config_path));
        crope::apply_overrides(c, overrides);
        return c;
    };

    auto* audit = app.add_subcommand("audit", "parameter table per placement mode");
    add_cfg_opts(audit);
    audit->callback([&] { rc = run_audit(resolve_cfg().model, out_dir); });

    auto* toy = app.add_subcommand("toy", "analytic attention profiles, delta kernel, toy task");
    std::size_t toy_dim = 64, toy_window = 32, toy_steps = 2000;
    uint64_t toy_seed = 0;
    std::string toy_mode = "crope_qk";
    bool toy_train = false;
    toy->add_option("--head-dim", toy_dim, "rotary dimension for the analytic profiles");
    toy->add_option("--window", toy_window, "positions in the emitted profile matrices");
    toy->add_option("--out", out_dir, "output directory");
    toy->add_flag("--train", toy_train, "also train the toy model and emit accuracy + attention maps");
    toy->add_option("--mode", toy_mode, "placement mode for --train");
    toy->add_option("--steps", toy_steps, "training steps for --train");
    toy->add_option("--seed", toy_seed, "seed for --train");
    toy->callback([&] { rc = run_toy(toy_dim, toy_window, out_dir, toy_train, toy_mode, toy_steps, toy_seed); });

    auto* train = app.add_subcommand("train", "train a byte-level LM per the config");
    add_cfg_opts(train);
    train->callback([&] { rc = run_train(resolve_cfg(), out_dir); });

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a text file's validation split");
    std::string ckpt_path, data_path;
    eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
    eval->add_option("--data", data_path, "UTF-8 text file")->required();
    eval->add_option("--out", out_dir, "output directory");
    eval->callback([&] { rc = run_eval(ckpt_path, data_path, out_dir); });

    try {
        app.parse(argc, argv);
        if (app.get_subcommands().empty()) {
            std::cout << app.help();
            return 2;
        }
        return rc;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
