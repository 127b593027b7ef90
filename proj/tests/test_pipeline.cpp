// Batch pipeline: config parsing, the staged generate/preprocess/train/
// evaluate/interpret flow on a small dataset, pricer validation (including a
// deliberately tampered pricer), and the artifact report.

#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rhcal/pipeline.hpp"

using namespace rhcal;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

RunConfig small_run(const std::string& outdir) {
    RunConfig cfg;
    cfg.outdir = outdir;
    cfg.box = "narrow";
    cfg.n = 80;
    cfg.gen_seed = 5;
    cfg.strikes = {0.8, 1.0, 1.2};
    cfg.maturities = {0.6, 1.2};
    cfg.test_fraction = 0.15;
    cfg.split_seed = 7;
    cfg.train.epochs = 30;
    cfg.train.batch_size = 16;
    cfg.train.learning_rate = 5e-3;
    cfg.train.seed = 5;
    cfg.n_instances = 10;
    cfg.lime_instances = 3;
    cfg.background_n = 20;
    cfg.mc_paths = 8000;
    cfg.mc_steps = 128;
    return cfg;
}

struct MaxCell {
    std::string strike, maturity, value;
};

// Reads a heat-map CSV ("strike,T..,.." rows "K..,v,v") and returns the
// labels and printed value of its maximum cell.
MaxCell heatmap_argmax(const std::string& path) {
    const auto rows = lines_of(slurp(path));
    REQUIRE(rows.size() >= 2);
    const auto header = split_line(rows[0]);
    MaxCell best;
    double best_v = -1.0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto fields = split_line(rows[r]);
        REQUIRE(fields.size() == header.size());
        for (std::size_t c = 1; c < fields.size(); ++c) {
            const double v = parse_double(fields[c], path);
            if (v > best_v) {
                best_v = v;
                best = {fields[0].substr(1), header[c].substr(1), fields[c]};
            }
        }
    }
    return best;
}

}  // namespace

TEST_CASE("config files parse sections, comments, and key=value lines") {
    const std::string path = "rhcal_test_pipe_config.ini";
    {
        std::ofstream f(path);
        f << "# a comment\n";
        f << "[run]\n";
        f << "outdir = somewhere   ; trailing comment\n";
        f << "\n";
        f << "[train]\n";
        f << "epochs = 12\n";
        f << "lr = 0.005\n";
    }
    const auto pairs = parse_config_file(path);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].first == "run.outdir");
    CHECK(pairs[0].second == "somewhere");
    CHECK(pairs[1].first == "train.epochs");
    CHECK(pairs[2].first == "train.lr");

    RunConfig cfg;
    for (const auto& [k, v] : pairs) apply_setting(cfg, k, v);
    CHECK(cfg.outdir == "somewhere");
    CHECK(cfg.train.epochs == 12);
    CHECK(cfg.train.learning_rate == 0.005);

    // A later setting (a command-line flag) overrides the file value.
    apply_setting(cfg, "train.epochs", "3");
    CHECK(cfg.train.epochs == 3);

    std::remove(path.c_str());
    CHECK_THROWS_AS(parse_config_file("rhcal_no_such_config.ini"), IoError);
}

TEST_CASE("config files reject malformed lines") {
    const std::string path = "rhcal_test_pipe_badconfig.ini";
    const auto write = [&](const std::string& text) {
        std::ofstream f(path);
        f << text;
    };
    write("[run\noutdir = x\n");
    CHECK_THROWS_AS(parse_config_file(path), ValidationError);
    write("outdir = x\n");  // key before any section
    CHECK_THROWS_AS(parse_config_file(path), ValidationError);
    write("[run]\njust some words\n");
    CHECK_THROWS_AS(parse_config_file(path), ValidationError);
    write("[run]\n= value\n");
    CHECK_THROWS_AS(parse_config_file(path), ValidationError);
    write("[]\n");
    CHECK_THROWS_AS(parse_config_file(path), ValidationError);
    std::remove(path.c_str());
}

TEST_CASE("settings are validated key by key") {
    RunConfig cfg;
    CHECK_THROWS_AS(apply_setting(cfg, "run.bogus", "1"), ValidationError);
    CHECK_THROWS_AS(apply_setting(cfg, "generate.box", "huge"), ValidationError);
    CHECK_THROWS_AS(apply_setting(cfg, "generate.n", "many"), ValidationError);
    CHECK_THROWS_AS(apply_setting(cfg, "preprocess.scaling", "3"), ValidationError);
    CHECK_THROWS_AS(apply_setting(cfg, "preprocess.whiten", "maybe"), ValidationError);
    CHECK_THROWS_AS(apply_setting(cfg, "train.lr", "fast"), ValidationError);
    CHECK_THROWS_AS(apply_setting(cfg, "train.init", "zeros"), ValidationError);

    apply_setting(cfg, "generate.box", "out_of_sample");
    CHECK(cfg.box == "out_of_sample");
    apply_setting(cfg, "preprocess.whiten", "false");
    CHECK(cfg.whiten == false);
    apply_setting(cfg, "interpret.methods", "deeplift, shap");
    CHECK(cfg.methods == std::vector<std::string>{"deeplift", "shap"});
    apply_setting(cfg, "train.init", "glorot");
    CHECK(cfg.train_init == "glorot");
}

TEST_CASE("grid overrides must come in pairs") {
    RunConfig cfg;
    apply_setting(cfg, "generate.strikes", "0.8, 1.0, 1.2");
    CHECK_THROWS_AS(cfg.grid(), ValidationError);
    apply_setting(cfg, "generate.maturities", "0.5, 1.0");
    const auto g = cfg.grid();
    CHECK(g.n_cells() == 6);
    RunConfig plain;
    CHECK(plain.grid().n_cells() == 54);
}

TEST_CASE("pipeline runs end to end on a small dataset") {
    const std::string outdir = "rhcal_test_pipe_out";
    std::filesystem::remove_all(outdir);
    auto cfg = small_run(outdir);

    cmd_generate(cfg);
    REQUIRE(std::filesystem::exists(cfg.path("dataset.csv")));
    REQUIRE(std::filesystem::exists(cfg.path("dataset.csv.meta")));
    CHECK(load(cfg.path("dataset.csv")).rows() == 80);

    cmd_preprocess(cfg);
    CHECK(load(cfg.path("train.csv")).rows() == 68);
    CHECK(load(cfg.path("test.csv")).rows() == 12);
    const auto tf = load_transform(cfg.path("transform.txt"));
    CHECK(tf.cols() == 6);

    cmd_train(cfg);
    REQUIRE(std::filesystem::exists(cfg.path("net.txt")));
    const auto hist_lines = lines_of(slurp(cfg.path("history.csv")));
    CHECK(hist_lines.size() == 31);  // header + one row per epoch
    CHECK(hist_lines[0] == "epoch,train_loss,val_loss,train_acc,val_acc");
    CHECK(std::filesystem::exists(cfg.path("curves.svg")));

    const auto report = cmd_evaluate(cfg);
    CHECK(report.n_rows == 12);
    CHECK(std::isfinite(report.total_error));
    const auto table = slurp(cfg.path("error_table.csv"));
    CHECK(table.rfind("data,kappa,nu,rho,v0,theta,H\ntest,", 0) == 0);
    const auto summary = slurp(cfg.path("eval_summary.txt"));
    CHECK(summary.find("rows 12\n") != std::string::npos);
    CHECK(summary.find("total_error ") != std::string::npos);
    CHECK(summary.find("accuracy ") != std::string::npos);
    for (const auto& name : param_names()) {
        const auto scatter = slurp(cfg.path("scatter_" + name + ".csv"));
        CHECK(scatter.rfind("actual,predicted,sq_log_error\n", 0) == 0);
        CHECK(lines_of(scatter).size() == 13);
        CHECK(std::filesystem::exists(cfg.path("scatter_" + name + ".svg")));
    }

    // Re-running evaluation overwrites every artifact bit-identically.
    cmd_evaluate(cfg);
    CHECK(slurp(cfg.path("error_table.csv")) == table);
    CHECK(slurp(cfg.path("eval_summary.txt")) == summary);

    // Identity mode: labels fed as predictions produce the all-zero table.
    auto id_cfg = cfg;
    id_cfg.identity = true;
    const auto id_report = cmd_evaluate(id_cfg);
    CHECK(id_report.total_error == 0.0);
    CHECK(id_report.accuracy == 1.0);
    CHECK(slurp(cfg.path("error_table.csv")) ==
          "data,kappa,nu,rho,v0,theta,H\ntest,0,0,0,0,0,0\n");
    cmd_evaluate(cfg);  // restore the real table for the report below

    auto bad = cfg;
    bad.methods = {"deeplift", "sobol"};
    CHECK_THROWS_AS(cmd_interpret(bad), ValidationError);

    cmd_interpret(cfg);
    for (const auto& method : cfg.methods) {
        for (const auto& name : param_names()) {
            CHECK(std::filesystem::exists(cfg.path("heatmap_" + method + "_" + name + ".csv")));
            CHECK(std::filesystem::exists(cfg.path("heatmap_" + method + "_" + name + ".svg")));
        }
        CHECK(std::filesystem::exists(cfg.path("attributions_" + method + ".csv")));

        // The ranking's first row must name the heat map's largest cell.
        const auto best = heatmap_argmax(cfg.path("heatmap_" + method + "_overall.csv"));
        const auto rank_lines = lines_of(slurp(cfg.path("ranking_" + method + "_overall.csv")));
        REQUIRE(rank_lines.size() == 7);  // header + 6 cells
        CHECK(rank_lines[0] == "rank,strike,maturity,value");
        const auto top = split_line(rank_lines[1]);
        REQUIRE(top.size() == 4);
        CHECK(top[0] == "1");
        CHECK(top[1] == best.strike);
        CHECK(top[2] == best.maturity);
        CHECK(top[3] == best.value);
    }

    // Attribution CSV: 6 outputs x instances rows, labeled by method.
    const auto attr_lines = lines_of(slurp(cfg.path("attributions_deeplift.csv")));
    CHECK(attr_lines.size() == 1 + 6 * 10);
    CHECK(attr_lines[0].rfind("method,output_param,instance,K0.8_T0.6", 0) == 0);
    CHECK(attr_lines[1].rfind("deeplift,rho,0,", 0) == 0);
    const auto lime_lines = lines_of(slurp(cfg.path("attributions_lime.csv")));
    CHECK(lime_lines.size() == 1 + 6 * 3);

    cmd_report(cfg);
    const auto md = slurp(cfg.path("report.md"));
    CHECK(md.find("## Dataset") != std::string::npos);
    CHECK(md.find("## Preprocessing") != std::string::npos);
    CHECK(md.find("floored") != std::string::npos);
    CHECK(md.find("## Training") != std::string::npos);
    CHECK(md.find("## Test errors") != std::string::npos);
    CHECK(md.find("## Attribution rankings") != std::string::npos);
    for (const auto& method : cfg.methods) {
        CHECK(md.find("### " + method) != std::string::npos);
    }
}

TEST_CASE("missing upstream artifacts surface as I/O errors") {
    RunConfig cfg;
    cfg.outdir = "rhcal_test_pipe_empty";
    std::filesystem::remove_all(cfg.outdir);
    CHECK_THROWS_AS(cmd_preprocess(cfg), IoError);
    CHECK_THROWS_AS(cmd_train(cfg), IoError);
    CHECK_THROWS_AS(cmd_evaluate(cfg), IoError);
    CHECK_THROWS_AS(cmd_interpret(cfg), IoError);
    std::filesystem::remove_all(cfg.outdir);
}

TEST_CASE("pricer validation passes clean and catches a tampered pricer") {
    const std::string outdir = "rhcal_test_pipe_validate";
    std::filesystem::remove_all(outdir);
    auto cfg = small_run(outdir);

    const auto clean = cmd_validate_pricer(cfg);
    CHECK(clean.iv_ok);
    CHECK(clean.mc_ok);
    CHECK(clean.ok());
    CHECK(clean.max_iv_gap <= 1e-3);
    CHECK(clean.mc_gap_se <= 3.0);
    const auto txt = slurp(cfg.path("validate_pricer.txt"));
    CHECK(txt.find("h_half_max_iv_gap ") != std::string::npos);
    CHECK(txt.find("FAIL") == std::string::npos);

    // A 1% price scale moves ATM implied vols by ~2.5e-3, past the 1e-3 gate.
    setenv("RHCAL_PRICE_SCALE", "1.01", 1);
    const auto tampered = cmd_validate_pricer(cfg);
    unsetenv("RHCAL_PRICE_SCALE");
    CHECK_FALSE(tampered.iv_ok);
    CHECK_FALSE(tampered.ok());
    CHECK(tampered.max_iv_gap > 1e-3);
    CHECK(slurp(cfg.path("validate_pricer.txt")).find("FAIL") != std::string::npos);

    const auto clean_again = cmd_validate_pricer(cfg);
    CHECK(clean_again.ok());
}
