#pragma once

// Batch pipeline shared by the command-line driver and the acceptance suite:
// generate -> preprocess -> train -> evaluate -> interpret, plus a pricer
// validation harness and an artifact report. Each command reads/writes fixed
// file names inside the configured output directory, is deterministic under
// its seeds, and overwrites outputs bit-identically when re-run.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rhcal/bs.hpp"
#include "rhcal/dataset.hpp"
#include "rhcal/heston_classical.hpp"
#include "rhcal/interpret.hpp"
#include "rhcal/mc.hpp"
#include "rhcal/network.hpp"
#include "rhcal/preprocess.hpp"
#include "rhcal/pricer.hpp"
#include "rhcal/svg.hpp"

namespace rhcal {

// ---------------------------------------------------------------------------
// Run configuration: every key has a default; a config file plus flag
// overrides fully determine all outputs on one machine configuration.
// ---------------------------------------------------------------------------

struct RunConfig {
    // [run]
    std::string outdir = "out";
    unsigned workers = 0;  // 0 = automatic (RHCAL_WORKERS overrides)

    // [generate]
    std::string box = "narrow";  // narrow | wide | out_of_sample
    std::size_t n = 2000;
    std::uint64_t gen_seed = 1;
    std::vector<double> strikes;     // empty = default grid
    std::vector<double> maturities;  // empty = default grid
    PricerConfig pricer;

    // [preprocess]
    int scaling = 1;  // 1 = min-max to [0,1], 2 = standardize
    bool whiten = true;
    double test_fraction = 0.15;
    std::uint64_t split_seed = 7;

    // [train]
    TrainConfig train;
    std::string train_init = "mean";  // mean | glorot

    // [evaluate]
    bool identity = false;  // feed labels as predictions (plumbing check)

    // [interpret]
    std::vector<std::string> methods = {"lime", "gradxinput", "deeplift", "lrp", "shap"};
    std::size_t n_instances = 50;     // instances per heat map
    std::size_t lime_instances = 8;   // LIME is far costlier per instance
    std::size_t background_n = 100;   // background rows for global SHAP
    std::uint64_t interpret_seed = 1;

    // [validate]
    std::size_t mc_paths = 100000;
    int mc_steps = 256;
    std::uint64_t mc_seed = 1;

    SmileGrid grid() const {
        if (strikes.empty() != maturities.empty()) {
            throw ValidationError("config: override both strikes and maturities or neither");
        }
        if (strikes.empty()) return default_grid();
        SmileGrid g;
        g.strikes = strikes;
        g.maturities = maturities;
        g.validate();
        return g;
    }

    std::string path(const std::string& name) const {
        return (std::filesystem::path(outdir) / name).string();
    }
};

namespace detail {

// parse_double signals IoError (it mostly reads files); a bad config value is
// a validation failure, so convert.
inline double parse_config_double(const std::string& text, const std::string& where) {
    try {
        return parse_double(text, where);
    } catch (const IoError& e) {
        throw ValidationError(e.what());
    }
}

inline std::vector<double> parse_double_list(const std::string& text, const std::string& where) {
    std::vector<double> out;
    for (const auto& tok : split_line(text, ',')) {
        if (!tok.empty()) out.push_back(parse_config_double(tok, where));
    }
    return out;
}

inline bool parse_bool(const std::string& v, const std::string& where) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ValidationError(where + ": expected a boolean, got '" + v + "'");
}

inline std::uint64_t parse_u64(const std::string& v, const std::string& where) {
    try {
        std::size_t used = 0;
        const unsigned long long x = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return static_cast<std::uint64_t>(x);
    } catch (const std::exception&) {
        throw ValidationError(where + ": expected a non-negative integer, got '" + v + "'");
    }
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

// Applies one "section.key" setting. Unknown keys are rejected so config
// typos cannot silently fall back to defaults.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    const std::string where = "config " + key;
    if (key == "run.outdir") {
        cfg.outdir = value;
    } else if (key == "run.workers") {
        cfg.workers = static_cast<unsigned>(detail::parse_u64(value, where));
    } else if (key == "generate.box") {
        box_by_name(value);  // validates the preset name
        cfg.box = value;
    } else if (key == "generate.n") {
        cfg.n = detail::parse_u64(value, where);
    } else if (key == "generate.seed") {
        cfg.gen_seed = detail::parse_u64(value, where);
    } else if (key == "generate.strikes") {
        cfg.strikes = detail::parse_double_list(value, where);
    } else if (key == "generate.maturities") {
        cfg.maturities = detail::parse_double_list(value, where);
    } else if (key == "generate.n_nodes") {
        cfg.pricer.n_nodes = static_cast<int>(detail::parse_u64(value, where));
    } else if (key == "generate.u_max") {
        cfg.pricer.u_max = detail::parse_config_double(value, where);
    } else if (key == "generate.steps_per_year") {
        cfg.pricer.steps_per_year = static_cast<int>(detail::parse_u64(value, where));
    } else if (key == "generate.tail_tol") {
        cfg.pricer.tail_tol = detail::parse_config_double(value, where);
    } else if (key == "preprocess.scaling") {
        const auto v = detail::parse_u64(value, where);
        if (v != 1 && v != 2) throw ValidationError(where + ": scaling approach must be 1 or 2");
        cfg.scaling = static_cast<int>(v);
    } else if (key == "preprocess.whiten") {
        cfg.whiten = detail::parse_bool(value, where);
    } else if (key == "preprocess.test_fraction") {
        cfg.test_fraction = detail::parse_config_double(value, where);
    } else if (key == "preprocess.seed") {
        cfg.split_seed = detail::parse_u64(value, where);
    } else if (key == "train.epochs") {
        cfg.train.epochs = detail::parse_u64(value, where);
    } else if (key == "train.batch") {
        cfg.train.batch_size = detail::parse_u64(value, where);
    } else if (key == "train.lr") {
        cfg.train.learning_rate = detail::parse_config_double(value, where);
    } else if (key == "train.beta1") {
        cfg.train.beta1 = detail::parse_config_double(value, where);
    } else if (key == "train.beta2") {
        cfg.train.beta2 = detail::parse_config_double(value, where);
    } else if (key == "train.eps") {
        cfg.train.eps = detail::parse_config_double(value, where);
    } else if (key == "train.val_fraction") {
        cfg.train.validation_fraction = detail::parse_config_double(value, where);
    } else if (key == "train.dropout") {
        cfg.train.dropout_rate = detail::parse_config_double(value, where);
    } else if (key == "train.seed") {
        cfg.train.seed = detail::parse_u64(value, where);
    } else if (key == "train.init") {
        if (value != "mean" && value != "glorot") {
            throw ValidationError(where + ": init must be 'mean' or 'glorot'");
        }
        cfg.train_init = value;
    } else if (key == "evaluate.identity") {
        cfg.identity = detail::parse_bool(value, where);
    } else if (key == "interpret.methods") {
        cfg.methods.clear();
        for (const auto& tok : split_line(value, ',')) {
            const auto m = detail::trim(tok);
            if (!m.empty()) cfg.methods.push_back(m);
        }
    } else if (key == "interpret.n_instances") {
        cfg.n_instances = detail::parse_u64(value, where);
    } else if (key == "interpret.lime_instances") {
        cfg.lime_instances = detail::parse_u64(value, where);
    } else if (key == "interpret.background") {
        cfg.background_n = detail::parse_u64(value, where);
    } else if (key == "interpret.seed") {
        cfg.interpret_seed = detail::parse_u64(value, where);
    } else if (key == "validate.mc_paths") {
        cfg.mc_paths = detail::parse_u64(value, where);
    } else if (key == "validate.mc_steps") {
        cfg.mc_steps = static_cast<int>(detail::parse_u64(value, where));
    } else if (key == "validate.seed") {
        cfg.mc_seed = detail::parse_u64(value, where);
    } else {
        throw ValidationError("config: unknown key '" + key + "'");
    }
}

// key = value with [section] headers; # and ; start comments.
inline std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw ValidationError(path + ":" + std::to_string(lineno) + ": bad section header");
            }
            section = detail::trim(t.substr(1, t.size() - 2));
            if (section.empty()) {
                throw ValidationError(path + ":" + std::to_string(lineno) + ": empty section name");
            }
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": empty key");
        }
        if (section.empty()) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": key outside any [section]");
        }
        out.emplace_back(section + "." + key, value);
    }
    return out;
}

namespace detail {

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

inline void ensure_outdir(const RunConfig& cfg) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.outdir, ec);
    if (ec) throw IoError("cannot create output directory: " + cfg.outdir);
}

// Column order of the emitted six-column error table.
inline const std::array<int, kNumParams>& table_order() {
    static const std::array<int, kNumParams> order = {2, 4, 0, 1, 3, 5};  // kappa nu rho v0 theta H
    return order;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands.
// ---------------------------------------------------------------------------

inline void cmd_generate(const RunConfig& cfg) {
    detail::ensure_outdir(cfg);
    const auto ds = generate(box_by_name(cfg.box), cfg.n, cfg.gen_seed, cfg.grid(), cfg.pricer,
                             cfg.workers);
    save(ds, cfg.path("dataset.csv"));
}

inline void cmd_preprocess(const RunConfig& cfg) {
    detail::ensure_outdir(cfg);
    const auto ds = load(cfg.path("dataset.csv"));
    auto [train_ds, test_ds] = split(ds, cfg.test_fraction, cfg.split_seed);
    save(train_ds, cfg.path("train.csv"));
    save(test_ds, cfg.path("test.csv"));
    const auto kind = cfg.scaling == 2 ? ScalerKind::Standardize : ScalerKind::MinMax01;
    const auto tf = fit_transform(train_ds.x, kind, cfg.whiten);
    save_transform(tf, cfg.path("transform.txt"));
}

inline void cmd_train(const RunConfig& cfg) {
    detail::ensure_outdir(cfg);
    const auto train_ds = load(cfg.path("train.csv"));
    const auto tf = load_transform(cfg.path("transform.txt"));
    const auto x = apply_transform(tf, train_ds.x);
    FeedforwardNet net(x.cols, 6, kNumParams);
    // Default: start from the label-mean predictor. Plain fan-scaled random
    // output weights put early predictions on the wrong scale for a
    // squared-log-ratio loss (and can pin outputs below the loss guard),
    // costing most of a 100-epoch budget; "glorot" keeps the plain scheme.
    if (cfg.train_init == "glorot") {
        net.init(cfg.train.seed);
    } else {
        init_mean_predictor(net, cfg.train.seed, train_ds.y);
    }
    const auto history = train(net, x, train_ds.y, train_ds.box, cfg.train);
    save_net(net, cfg.path("net.txt"));
    save_history(history, cfg.path("history.csv"));
    detail::write_file(cfg.path("curves.svg"), history_svg(history, "Training history"));
}

inline EvalReport cmd_evaluate(const RunConfig& cfg) {
    detail::ensure_outdir(cfg);
    const auto test_ds = load(cfg.path("test.csv"));

    Matrix yhat;
    EvalReport report;
    if (cfg.identity) {
        yhat = test_ds.y;  // labels fed as predictions: exercises the plumbing
        report.per_param_error.fill(0.0);
        report.total_error = 0.0;
        report.accuracy = 1.0;
        report.n_rows = test_ds.y.rows;
    } else {
        const auto tf = load_transform(cfg.path("transform.txt"));
        const auto net = load_net(cfg.path("net.txt"));
        const auto x = apply_transform(tf, test_ds.x);
        yhat = predict(net, x, cfg.workers);
        report = evaluate(net, x, test_ds.y, test_ds.box, cfg.workers);
    }

    std::string table = "data";
    for (int idx : detail::table_order()) table += "," + param_names()[idx];
    table += "\ntest";
    for (int idx : detail::table_order()) table += "," + format_full(report.per_param_error[idx]);
    table += "\n";
    detail::write_file(cfg.path("error_table.csv"), table);

    std::string summary;
    summary += "rows " + std::to_string(report.n_rows) + "\n";
    summary += "total_error " + format_full(report.total_error) + "\n";
    summary += "accuracy " + format_full(report.accuracy) + "\n";
    detail::write_file(cfg.path("eval_summary.txt"), summary);

    for (int j = 0; j < kNumParams; ++j) {
        const std::string& name = param_names()[j];
        std::string csv = "actual,predicted,sq_log_error\n";
        std::vector<double> act(test_ds.y.rows), pred(test_ds.y.rows);
        for (std::size_t r = 0; r < test_ds.y.rows; ++r) {
            const double y = test_ds.y.at(r, j);
            const double p = yhat.at(r, j);
            const double d = std::log1p(y) - std::log(std::max(1.0 + p, kMsleGuard));
            csv += format_full(y) + "," + format_full(p) + "," + format_full(d * d) + "\n";
            act[r] = y;
            pred[r] = p;
        }
        detail::write_file(cfg.path("scatter_" + name + ".csv"), csv);
        detail::write_file(cfg.path("scatter_" + name + ".svg"),
                           scatter_svg(act, pred, "Predicted vs actual: " + name));
    }
    return report;
}

namespace detail {

inline void write_ranking(const HeatMap& map, const std::string& path) {
    std::string csv = "rank,strike,maturity,value\n";
    const auto ranked = rank_cells(map);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        csv += std::to_string(i + 1) + "," + format_label(ranked[i].strike) + "," +
               format_label(ranked[i].maturity) + "," + format_full(ranked[i].value) + "\n";
    }
    write_file(path, csv);
}

inline void emit_method_maps(const RunConfig& cfg, const std::string& method,
                             const std::vector<std::vector<AttributionResult>>& per_output,
                             const SmileGrid& grid) {
    std::vector<AttributionResult> all;
    for (int j = 0; j < kNumParams; ++j) {
        for (const auto& r : per_output[j]) all.push_back(r);
        const auto map = aggregate_heatmap(per_output[j], grid);
        const std::string stem = "heatmap_" + method + "_" + param_names()[j];
        save_heatmap(map, cfg.path(stem + ".csv"));
        write_file(cfg.path(stem + ".svg"),
                   heatmap_svg(map, method + " attributions: output " + param_names()[j]));
    }
    const auto overall = aggregate_heatmap(all, grid);
    save_heatmap(overall, cfg.path("heatmap_" + method + "_overall.csv"));
    write_file(cfg.path("heatmap_" + method + "_overall.svg"),
               heatmap_svg(overall, method + " attributions: overall"));
    write_ranking(overall, cfg.path("ranking_" + method + "_overall.csv"));
    save_attributions(all, grid, cfg.path("attributions_" + method + ".csv"));
}

}  // namespace detail

inline void cmd_interpret(const RunConfig& cfg) {
    static const std::set<std::string> kKnown = {"lime", "gradxinput", "deeplift", "lrp", "shap"};
    for (const auto& m : cfg.methods) {
        if (!kKnown.count(m)) {
            throw ValidationError("interpret: unknown method '" + m +
                                  "' (implemented: lime, gradxinput, deeplift, lrp, shap)");
        }
    }
    detail::ensure_outdir(cfg);
    const auto test_ds = load(cfg.path("test.csv"));
    const auto tf = load_transform(cfg.path("transform.txt"));
    const auto net = load_net(cfg.path("net.txt"));
    const auto x = apply_transform(tf, test_ds.x);
    const auto& grid = test_ds.grid;

    // Seeded instance selection from the test set (ascending for stable output).
    const auto pick = [&](std::size_t want, std::uint64_t salt) {
        auto idx = shuffled_indices(x.rows, derive_seed(cfg.interpret_seed, {salt}));
        idx.resize(std::min(want, idx.size()));
        std::sort(idx.begin(), idx.end());
        return idx;
    };
    const auto inst_idx = pick(cfg.n_instances, 0x696e7374u);
    const auto lime_idx = pick(std::min(cfg.lime_instances, cfg.n_instances), 0x696e7374u);
    const auto bg_idx = pick(cfg.background_n, 0x62616370u);

    Matrix instances(inst_idx.size(), x.cols);
    for (std::size_t i = 0; i < inst_idx.size(); ++i) {
        for (std::size_t c = 0; c < x.cols; ++c) instances.at(i, c) = x.at(inst_idx[i], c);
    }
    Matrix background(bg_idx.size(), x.cols);
    for (std::size_t i = 0; i < bg_idx.size(); ++i) {
        for (std::size_t c = 0; c < x.cols; ++c) background.at(i, c) = x.at(bg_idx[i], c);
    }
    std::vector<double> feature_means(x.cols, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t c = 0; c < x.cols; ++c) feature_means[c] += x.at(r, c);
    }
    for (auto& v : feature_means) v /= static_cast<double>(x.rows);

    for (const auto& method : cfg.methods) {
        std::vector<std::vector<AttributionResult>> per_output(kNumParams);
        if (method == "lime") {
            Matrix lime_inst(lime_idx.size(), x.cols);
            for (std::size_t i = 0; i < lime_idx.size(); ++i) {
                for (std::size_t c = 0; c < x.cols; ++c) lime_inst.at(i, c) = x.at(lime_idx[i], c);
            }
            for (int j = 0; j < kNumParams; ++j) {
                per_output[j].resize(lime_inst.rows);
                parallel_for(
                    lime_inst.rows,
                    [&, j](std::size_t i) {
                        const ScalarFn f = [&net, j](const std::vector<double>& v) {
                            return forward(net, v).y[j];
                        };
                        LimeConfig lc;
                        lc.seed = derive_seed(cfg.interpret_seed, {0x6c696d65u,
                                                                   static_cast<std::uint64_t>(j),
                                                                   lime_idx[i]});
                        auto res = lime_explain(f, lime_inst.row_copy(i), feature_means, j, lc);
                        res.instance = i;
                        per_output[j][i] = std::move(res);
                    },
                    cfg.workers);
            }
        } else if (method == "shap") {
            for (int j = 0; j < kNumParams; ++j) {
                per_output[j] = shapley_global(net, background, instances, j, cfg.workers);
            }
        } else {
            for (int j = 0; j < kNumParams; ++j) {
                per_output[j].resize(instances.rows);
                parallel_for(
                    instances.rows,
                    [&, j](std::size_t i) {
                        const auto xi = instances.row_copy(i);
                        AttributionResult res;
                        if (method == "gradxinput") {
                            res = gradient_input(net, xi, j);
                        } else if (method == "deeplift") {
                            res = deeplift_rescale(net, xi, j);
                        } else {
                            res = lrp_epsilon(net, xi, j);
                        }
                        res.instance = i;
                        per_output[j][i] = std::move(res);
                    },
                    cfg.workers);
            }
        }
        detail::emit_method_maps(cfg, method, per_output, grid);
    }
}

struct PricerValidation {
    double max_iv_gap = 0.0;       // H = 0.5 grid vs closed-form classical pipeline
    double fourier_price = 0.0;    // box midpoint, (K, T) = (1.0, 1.0)
    double mc_price = 0.0;
    double mc_std_error = 0.0;
    double mc_gap_se = 0.0;        // |fourier - mc| in standard errors
    bool iv_ok = false, mc_ok = false;

    bool ok() const { return iv_ok && mc_ok; }
};

// Validates the Fourier pricer against two independent oracles. The hidden
// environment knob RHCAL_PRICE_SCALE multiplies Fourier prices so tests can
// prove a tampered pricer is caught.
inline PricerValidation cmd_validate_pricer(const RunConfig& cfg) {
    detail::ensure_outdir(cfg);
    double price_scale = 1.0;
    if (const char* env = std::getenv("RHCAL_PRICE_SCALE")) {
        price_scale = parse_double(env, "RHCAL_PRICE_SCALE");
    }
    const auto box = box_by_name(cfg.box);
    std::array<double, kNumParams> a{};
    for (int k = 0; k < kNumParams; ++k) a[k] = 0.5 * (box.lo[k] + box.hi[k]);
    const auto mid = RoughHestonParams::from_array(a);
    const auto grid = cfg.grid();

    PricerValidation out;

    // Check 1: H = 0.5 collapses to classical Heston; compare whole-grid
    // implied vols against the independent closed-form pipeline.
    RoughHestonParams half = mid;
    half.h = 0.5;
    std::vector<double> rough_vols(grid.n_cells());
    {
        const auto surf = surface(half, grid, cfg.pricer);
        for (std::size_t k = 0; k < grid.strikes.size(); ++k) {
            for (std::size_t t = 0; t < grid.maturities.size(); ++t) {
                const std::size_t idx = grid.flat_index(k, t);
                double v = surf.vols[idx];
                if (price_scale != 1.0) {
                    const double p =
                        bs_call(v, grid.strikes[k], grid.maturities[t]) * price_scale;
                    v = implied_vol(p, grid.strikes[k], grid.maturities[t]);
                }
                rough_vols[idx] = v;
            }
        }
        const auto classical =
            classical_surface_iv(classical_from_rough(half), grid);
        for (std::size_t i = 0; i < rough_vols.size(); ++i) {
            out.max_iv_gap = std::max(out.max_iv_gap, std::abs(rough_vols[i] - classical[i]));
        }
        out.iv_ok = out.max_iv_gap <= 1e-3;
    }

    // Check 2: Fourier price at the box midpoint within 3 MC standard errors.
    {
        out.fourier_price = call_price(mid, 1.0, 1.0, cfg.pricer) * price_scale;
        McConfig mc;
        mc.n_paths = cfg.mc_paths;
        mc.n_steps = cfg.mc_steps;
        mc.seed = cfg.mc_seed;
        mc.workers = cfg.workers;
        const auto mcp = mc_call_price(mid, 1.0, 1.0, mc);
        out.mc_price = mcp.price;
        out.mc_std_error = mcp.std_error;
        out.mc_gap_se = std::abs(out.fourier_price - mcp.price) / mcp.std_error;
        out.mc_ok = out.mc_gap_se <= 3.0;
    }

    std::string report;
    report += "h_half_max_iv_gap " + format_full(out.max_iv_gap) + " tol 0.001 " +
              (out.iv_ok ? "ok" : "FAIL") + "\n";
    report += "fourier_price " + format_full(out.fourier_price) + "\n";
    report += "mc_price " + format_full(out.mc_price) + " se " + format_full(out.mc_std_error) +
              "\n";
    report += "gap_in_se " + format_full(out.mc_gap_se) + " tol 3 " +
              (out.mc_ok ? "ok" : "FAIL") + "\n";
    detail::write_file(cfg.path("validate_pricer.txt"), report);
    return out;
}

namespace detail {

inline std::string slurp_if_exists(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string first_lines(const std::string& text, std::size_t n) {
    std::istringstream in(text);
    std::string line, out;
    for (std::size_t i = 0; i < n && std::getline(in, line); ++i) out += line + "\n";
    return out;
}

}  // namespace detail

// Bundles the key numbers of whatever artifacts exist into report.md.
inline void cmd_report(const RunConfig& cfg) {
    detail::ensure_outdir(cfg);
    std::string md = "# Calibration run report\n\n";

    const auto meta = detail::slurp_if_exists(cfg.path("dataset.csv.meta"));
    if (!meta.empty()) md += "## Dataset\n\n```\n" + meta + "```\n\n";

    const auto tf_text = detail::slurp_if_exists(cfg.path("transform.txt"));
    if (!tf_text.empty()) {
        md += "## Preprocessing\n\n```\n" + detail::first_lines(tf_text, 5) + "```\n\n";
    }

    const auto hist = detail::slurp_if_exists(cfg.path("history.csv"));
    if (!hist.empty()) {
        std::istringstream in(hist);
        std::string line, last;
        std::getline(in, line);  // header
        while (std::getline(in, last)) {
        }
        md += "## Training\n\nfinal epoch (epoch,train_loss,val_loss,train_acc,val_acc):\n\n```\n" +
              last + "\n```\n\n![training curves](curves.svg)\n\n";
    }

    const auto table = detail::slurp_if_exists(cfg.path("error_table.csv"));
    if (!table.empty()) {
        md += "## Test errors\n\n```\n" + table + "```\n\n";
        const auto summary = detail::slurp_if_exists(cfg.path("eval_summary.txt"));
        if (!summary.empty()) md += "```\n" + summary + "```\n\n";
    }

    bool any_rank = false;
    for (const auto& m : cfg.methods) {
        const auto rank = detail::slurp_if_exists(cfg.path("ranking_" + m + "_overall.csv"));
        if (rank.empty()) continue;
        if (!any_rank) {
            md += "## Attribution rankings (top 5 cells)\n\n";
            any_rank = true;
        }
        md += "### " + m + "\n\n```\n" + detail::first_lines(rank, 6) + "```\n\n" +
              "![heat map](heatmap_" + m + "_overall.svg)\n\n";
    }

    const auto vp = detail::slurp_if_exists(cfg.path("validate_pricer.txt"));
    if (!vp.empty()) md += "## Pricer validation\n\n```\n" + vp + "```\n\n";

    detail::write_file(cfg.path("report.md"), md);
}

}  // namespace rhcal
