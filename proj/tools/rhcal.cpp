// Command-line driver for the rough-volatility calibration pipeline.
//
// Usage: rhcal <subcommand> [options]
//
// Every option mirrors a "section.key" config entry; values from --config are
// applied first and explicit flags override them. All commands write fixed
// file names under --outdir and are deterministic for fixed settings.
//
// Exit codes: 0 success, 2 validation failure, 3 numerical failure, 4 I/O
// failure.

#include <cstdio>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "rhcal/pipeline.hpp"

namespace {

struct Cli {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> flags;  // section.key -> value
};

// Registers a string-valued option that records "key=value" when given.
void bind(CLI::App* sub, Cli& cli, const std::string& flag, const std::string& key,
          const std::string& desc) {
    sub->add_option_function<std::string>(
        flag, [&cli, key](const std::string& v) { cli.flags.emplace_back(key, v); }, desc);
}

void bind_flag(CLI::App* sub, Cli& cli, const std::string& flag, const std::string& key,
               const std::string& desc) {
    sub->add_flag_callback(
        flag, [&cli, key]() { cli.flags.emplace_back(key, "1"); }, desc);
}

void add_common(CLI::App* sub, Cli& cli) {
    sub->add_option("--config", cli.config_path, "config file ([section] key = value)");
    bind(sub, cli, "--outdir", "run.outdir", "output directory (default: out)");
    bind(sub, cli, "--workers", "run.workers", "worker threads (0 = automatic)");
}

rhcal::RunConfig build_config(const Cli& cli) {
    rhcal::RunConfig cfg;
    if (!cli.config_path.empty()) {
        for (const auto& [key, value] : rhcal::parse_config_file(cli.config_path)) {
            rhcal::apply_setting(cfg, key, value);
        }
    }
    for (const auto& [key, value] : cli.flags) rhcal::apply_setting(cfg, key, value);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rough-volatility surface calibration pipeline"};
    app.require_subcommand(1);
    Cli cli;

    auto* gen = app.add_subcommand("generate", "sample parameters and price labeled surfaces");
    add_common(gen, cli);
    bind(gen, cli, "--box", "generate.box", "parameter box: narrow | wide | out_of_sample");
    bind(gen, cli, "--n", "generate.n", "number of surfaces to sample");
    bind(gen, cli, "--seed", "generate.seed", "sampling seed");
    bind(gen, cli, "--strikes", "generate.strikes", "comma-separated strikes (with --maturities)");
    bind(gen, cli, "--maturities", "generate.maturities", "comma-separated maturities");
    bind(gen, cli, "--n-nodes", "generate.n_nodes", "Fourier quadrature nodes");
    bind(gen, cli, "--u-max", "generate.u_max", "Fourier truncation bound");
    bind(gen, cli, "--steps-per-year", "generate.steps_per_year", "Riccati steps per year");
    bind(gen, cli, "--tail-tol", "generate.tail_tol", "Fourier tail tolerance");

    auto* pre = app.add_subcommand("preprocess", "split the dataset and fit the feature transform");
    add_common(pre, cli);
    bind(pre, cli, "--scaling", "preprocess.scaling", "1 = min-max to [0,1], 2 = standardize");
    bind(pre, cli, "--whiten", "preprocess.whiten", "decorrelate features (true/false)");
    bind(pre, cli, "--test-fraction", "preprocess.test_fraction", "held-out fraction");
    bind(pre, cli, "--seed", "preprocess.seed", "split seed");

    auto* trn = app.add_subcommand("train", "train the inverse-map network");
    add_common(trn, cli);
    bind(trn, cli, "--epochs", "train.epochs", "training epochs");
    bind(trn, cli, "--batch", "train.batch", "mini-batch size");
    bind(trn, cli, "--lr", "train.lr", "learning rate");
    bind(trn, cli, "--beta1", "train.beta1", "first-moment decay");
    bind(trn, cli, "--beta2", "train.beta2", "second-moment decay");
    bind(trn, cli, "--eps", "train.eps", "optimizer epsilon");
    bind(trn, cli, "--val-fraction", "train.val_fraction", "validation fraction");
    bind(trn, cli, "--dropout", "train.dropout", "hidden-layer dropout rate");
    bind(trn, cli, "--seed", "train.seed", "training seed");
    bind(trn, cli, "--init", "train.init", "initialization: mean (default) or glorot");

    auto* eva = app.add_subcommand("evaluate", "error table and scatter plots on the test split");
    add_common(eva, cli);
    bind_flag(eva, cli, "--identity", "evaluate.identity",
              "feed labels as predictions (plumbing check; error table must be zero)");

    auto* itp = app.add_subcommand("interpret", "attribution heat maps and rankings");
    add_common(itp, cli);
    bind(itp, cli, "--methods", "interpret.methods",
         "comma-separated: lime,gradxinput,deeplift,lrp,shap");
    bind(itp, cli, "--n-instances", "interpret.n_instances", "instances per heat map");
    bind(itp, cli, "--lime-instances", "interpret.lime_instances", "instances for LIME");
    bind(itp, cli, "--background", "interpret.background", "background rows for shap");
    bind(itp, cli, "--seed", "interpret.seed", "instance/background selection seed");

    auto* val = app.add_subcommand("validate-pricer", "check the pricer against two oracles");
    add_common(val, cli);
    bind(val, cli, "--box", "generate.box", "box whose midpoint is priced");
    bind(val, cli, "--mc-paths", "validate.mc_paths", "Monte Carlo paths");
    bind(val, cli, "--mc-steps", "validate.mc_steps", "Monte Carlo time steps");
    bind(val, cli, "--seed", "validate.seed", "Monte Carlo seed");

    auto* rep = app.add_subcommand("report", "summarize artifacts into report.md");
    add_common(rep, cli);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = build_config(cli);
        if (gen->parsed()) {
            rhcal::cmd_generate(cfg);
            std::printf("generate: wrote %s\n", cfg.path("dataset.csv").c_str());
        } else if (pre->parsed()) {
            rhcal::cmd_preprocess(cfg);
            std::printf("preprocess: wrote %s, %s, %s\n", cfg.path("train.csv").c_str(),
                        cfg.path("test.csv").c_str(), cfg.path("transform.txt").c_str());
        } else if (trn->parsed()) {
            rhcal::cmd_train(cfg);
            std::printf("train: wrote %s, %s\n", cfg.path("net.txt").c_str(),
                        cfg.path("history.csv").c_str());
        } else if (eva->parsed()) {
            const auto report = rhcal::cmd_evaluate(cfg);
            std::printf("evaluate: total_error %s accuracy %s (%zu rows), wrote %s\n",
                        rhcal::format_full(report.total_error).c_str(),
                        rhcal::format_full(report.accuracy).c_str(), report.n_rows,
                        cfg.path("error_table.csv").c_str());
        } else if (itp->parsed()) {
            rhcal::cmd_interpret(cfg);
            std::printf("interpret: wrote heat maps and rankings under %s\n", cfg.outdir.c_str());
        } else if (val->parsed()) {
            const auto v = rhcal::cmd_validate_pricer(cfg);
            std::printf("validate-pricer: h_half_max_iv_gap %s (tol 0.001), mc gap %s se (tol 3)\n",
                        rhcal::format_full(v.max_iv_gap).c_str(),
                        rhcal::format_full(v.mc_gap_se).c_str());
            if (!v.ok()) {
                std::fprintf(stderr, "validate-pricer: FAILED, see %s\n",
                             cfg.path("validate_pricer.txt").c_str());
                return 2;
            }
        } else if (rep->parsed()) {
            rhcal::cmd_report(cfg);
            std::printf("report: wrote %s\n", cfg.path("report.md").c_str());
        }
        return 0;
    } catch (const rhcal::ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const rhcal::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 4;
    } catch (const rhcal::NumericError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
