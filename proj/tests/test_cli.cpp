#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include "crope/data.hpp"
#include "crope/train.hpp"
#include "crope/verify.hpp"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code;
    std::string output;
};

CmdResult run_cli(const std::string& args) {
    const std::string cmd = std::string(CROPE_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 4096> buf{};
    std::string out;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return {-1, "popen failed"};
    while (fgets(buf.data(), buf.size(), pipe)) out += buf.data();
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("crope-cli-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p.string();
}

std::string small_corpus_path() {
    static std::string path = [] {
        auto dir = scratch("corpus");
        auto ids = crope::checks::synthetic_ids(40000, 123);
        crope::write_text_file(dir + "/corpus.txt", crope::detokenize_bytes(ids));
        return dir + "/corpus.txt";
    }();
    return path;
}

std::string tiny_train_args(const std::string& out) {
    return "train --set model.n_layers=1 --set model.n_heads=2 --set model.d_model=16 --set model.d_ff=24 "
           "--set model.max_seq_len=16 --set seq_len=16 --set batch_size=4 --set steps=20 --set warmup_steps=4 "
           "--set log_every=5 --set eval_every=10 --set data_path=" +
           small_corpus_path() + " --out " + out;
}

std::string strip_wall_column(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) out << line.substr(0, line.rfind(',')) << "\n";
    return out.str();
}

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) {
    auto res = run_cli("");
    EXPECT_EQ(res.exit_code, 2);
}

TEST(Cli, VerifyFilterRunsOnlyThatModule) {
    auto res = run_cli("verify --filter rope-math");
    EXPECT_EQ(res.exit_code, 0) << res.output;
    EXPECT_NE(res.output.find("rope-math/"), std::string::npos);
    EXPECT_EQ(res.output.find("model/"), std::string::npos);
    EXPECT_EQ(res.output.find("[FAIL]"), std::string::npos);
}

TEST(Cli, VerifyUnknownFilterIsUsageError) {
    auto res = run_cli("verify --filter no-such-module");
    EXPECT_EQ(res.exit_code, 2);
}

TEST(Cli, VerifyNegativeControlTripsTyingInvariant) {
    auto res = run_cli("verify --filter structured-layers --negative-control");
    EXPECT_EQ(res.exit_code, 1);
    EXPECT_NE(res.output.find("[FAIL] structured-layers/tied-structure-after-updates"), std::string::npos)
        << res.output;
}

TEST(Cli, AuditEmitsConsistentCsv) {
    const auto out = scratch("audit");
    auto res = run_cli("audit --out " + out);
    EXPECT_EQ(res.exit_code, 0) << res.output;
    const auto csv = crope::read_text_file(out + "/audit.csv");
    EXPECT_NE(csv.find("mode,embedding,attention,ffn,norms,total,attention_savings_pct"), std::string::npos);
    // The CSV parses back to the same integers the audit computes.
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        std::istringstream ls(line);
        std::string mode_str, field;
        std::getline(ls, mode_str, ',');
        crope::ModelConfig cfg;  // audit defaults
        cfg.mode = crope::parse_mode(mode_str);
        auto audit = crope::param_audit(cfg);
        std::getline(ls, field, ',');
        EXPECT_EQ(std::stoull(field), audit.embedding);
        std::getline(ls, field, ',');
        EXPECT_EQ(std::stoull(field), audit.attention);
    }
    EXPECT_EQ(rows, 6u);
}

TEST(Cli, ToyWritesAnalyticArtifacts) {
    const auto out = scratch("toy");
    auto res = run_cli("toy --out " + out);
    EXPECT_EQ(res.exit_code, 0) << res.output;
    const auto kernel = crope::read_text_file(out + "/delta_kernel.csv");
    EXPECT_NE(kernel.find("delta,D16,D64,D256"), std::string::npos);
    EXPECT_NE(kernel.find("0,1,1,1"), std::string::npos);  // kernel(0) = 1 for every D

    // Analytic profile rows peak one step ahead.
    const auto profile = crope::read_text_file(out + "/analytic_profile_s1.csv");
    std::istringstream in(profile);
    std::string line;
    std::getline(in, line);  // header
    std::vector<std::vector<double>> mat;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string f;
        std::getline(ls, f, ',');
        std::vector<double> row;
        while (std::getline(ls, f, ',')) row.push_back(std::stod(f));
        mat.push_back(row);
    }
    ASSERT_EQ(mat.size(), 32u);
    for (std::size_t m = 8; m <= 24; ++m) {
        std::size_t am = 0;
        for (std::size_t n = 1; n < mat[m].size(); ++n)
            if (mat[m][n] > mat[m][am]) am = n;
        EXPECT_EQ(am, m + 1) << "row " << m;
    }
}

TEST(Cli, TrainSmokeRunAndDeterminism) {
    const auto out1 = scratch("train1");
    const auto out2 = scratch("train2");
    auto r1 = run_cli(tiny_train_args(out1));
    ASSERT_EQ(r1.exit_code, 0) << r1.output;
    EXPECT_TRUE(fs::exists(out1 + "/metrics.csv"));
    EXPECT_TRUE(fs::exists(out1 + "/checkpoint.ckpt"));
    EXPECT_TRUE(fs::exists(out1 + "/run_manifest.json"));
    auto rows = crope::parse_metrics_csv(crope::read_text_file(out1 + "/metrics.csv"));
    ASSERT_EQ(rows.size(), 4u);  // steps 5, 10, 15, 20

    auto r2 = run_cli(tiny_train_args(out2));
    ASSERT_EQ(r2.exit_code, 0) << r2.output;
    EXPECT_EQ(strip_wall_column(crope::read_text_file(out1 + "/metrics.csv")),
              strip_wall_column(crope::read_text_file(out2 + "/metrics.csv")));
    EXPECT_EQ(crope::read_text_file(out1 + "/checkpoint.ckpt"), crope::read_text_file(out2 + "/checkpoint.ckpt"));
}

TEST(Cli, UnknownOverrideKeyIsExitTwo) {
    auto res = run_cli("train --set stepz=10 --out " + scratch("bad"));
    EXPECT_EQ(res.exit_code, 2);
    EXPECT_NE(res.output.find("stepz"), std::string::npos);
}

TEST(Cli, EvalMatchesTrainingValLoss) {
    const auto out = scratch("train-eval");
    auto r1 = run_cli(tiny_train_args(out));
    ASSERT_EQ(r1.exit_code, 0) << r1.output;
    auto rows = crope::parse_metrics_csv(crope::read_text_file(out + "/metrics.csv"));
    ASSERT_TRUE(rows.back().val_loss.has_value());

    auto r2 = run_cli("eval --checkpoint " + out + "/checkpoint.ckpt --data " + small_corpus_path() + " --out " +
                      out);
    ASSERT_EQ(r2.exit_code, 0) << r2.output;
    const auto pos = r2.output.find("val_loss=");
    ASSERT_NE(pos, std::string::npos);
    const double loss = std::stod(r2.output.substr(pos + 9));
    EXPECT_NEAR(loss, *rows.back().val_loss, 1e-6);

    const auto ppos = r2.output.find("perplexity=");
    ASSERT_NE(ppos, std::string::npos);
    const double ppl = std::stod(r2.output.substr(ppos + 11));
    EXPECT_DOUBLE_EQ(ppl, std::exp(loss));
}

TEST(Cli, EvalMissingDataIsUsageError) {
    const auto out = scratch("eval-bad");
    auto res = run_cli("eval --checkpoint /nonexistent.ckpt --data /nonexistent.txt --out " + out);
    EXPECT_EQ(res.exit_code, 2);
}
