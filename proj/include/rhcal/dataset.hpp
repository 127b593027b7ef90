#pragma once

// Labeled dataset generation and CSV persistence.
//
// A row couples one parameter set (the label, 6 values) with its implied-vol
// surface (the features, one value per grid cell, strike-major). Sampling is
// uniform per coordinate. Rows whose pricing fails are dropped and counted;
// generation aborts if more than 1% of the requested rows drop.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "rhcal/common.hpp"
#include "rhcal/params.hpp"
#include "rhcal/pricer.hpp"

namespace rhcal {

struct LabeledDataset {
    SmileGrid grid;
    Matrix x;  // n x n_cells implied vols
    Matrix y;  // n x 6 parameters, canonical order
    ParameterBox box;
    std::uint64_t seed = 0;
    std::size_t n_requested = 0;
    std::size_t n_dropped = 0;
    std::size_t n_h_clamped = 0;  // rows priced with H lifted to the floor

    std::size_t rows() const { return y.rows; }
};

inline std::vector<RoughHestonParams> sample_params(const ParameterBox& box, std::size_t n,
                                                    std::uint64_t seed) {
    box.validate();
    Rng rng(seed);
    std::vector<RoughHestonParams> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::array<double, kNumParams> a{};
        for (int j = 0; j < kNumParams; ++j) a[j] = rng.uniform(box.lo[j], box.hi[j]);
        out.push_back(RoughHestonParams::from_array(a));
    }
    return out;
}

inline LabeledDataset generate(const ParameterBox& box, std::size_t n, std::uint64_t seed,
                               const SmileGrid& grid = default_grid(),
                               const PricerConfig& pricer_cfg = {}, unsigned workers = 0) {
    if (n == 0) throw ValidationError("generate: need at least one row");
    grid.validate();
    pricer_cfg.validate();
    const auto params = sample_params(box, n, seed);

    const std::size_t cells = grid.n_cells();
    std::vector<std::vector<double>> rows(n);
    std::vector<char> failed(n, 0);
    std::vector<char> clamped(n, 0);
    std::vector<std::string> first_error(n);

    parallel_for(
        n,
        [&](std::size_t i) {
            try {
                const auto surf = surface(params[i], grid, pricer_cfg);
                rows[i] = surf.vols;
                clamped[i] = surf.h_clamped ? 1 : 0;
            } catch (const Error& e) {
                failed[i] = 1;
                first_error[i] = e.what();
            }
        },
        workers);

    LabeledDataset ds;
    ds.grid = grid;
    ds.box = box;
    ds.seed = seed;
    ds.n_requested = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (failed[i]) ++ds.n_dropped;
    }
    if (ds.n_dropped * 100 > n) {
        std::string sample;
        for (std::size_t i = 0; i < n; ++i) {
            if (failed[i]) {
                sample = first_error[i];
                break;
            }
        }
        throw NumericError("generate: " + std::to_string(ds.n_dropped) + " of " +
                           std::to_string(n) + " rows failed to price (above the 1% budget); first: " +
                           sample);
    }

    const std::size_t kept = n - ds.n_dropped;
    ds.x = Matrix(kept, cells);
    ds.y = Matrix(kept, kNumParams);
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (failed[i]) continue;
        const auto lab = params[i].as_array();
        for (int j = 0; j < kNumParams; ++j) ds.y.at(r, j) = lab[j];
        for (std::size_t c = 0; c < cells; ++c) ds.x.at(r, c) = rows[i][c];
        if (clamped[i]) ++ds.n_h_clamped;
        ++r;
    }
    return ds;
}

// Seeded random split into (train, test). The test set takes round(n * fraction)
// rows; both halves keep ascending original row order.
inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds,
                                                       double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ValidationError("split: test_fraction must lie in (0, 1)");
    }
    const std::size_t n = ds.rows();
    const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(n)));
    if (n_test == 0 || n_test >= n) throw ValidationError("split: degenerate split sizes");

    auto idx = shuffled_indices(n, derive_seed(seed, {0x73706c69u}));
    std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + n_test);
    std::vector<std::size_t> train_idx(idx.begin() + n_test, idx.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    const auto take = [&](const std::vector<std::size_t>& which) {
        LabeledDataset part;
        part.grid = ds.grid;
        part.box = ds.box;
        part.seed = ds.seed;
        part.n_requested = which.size();
        part.x = Matrix(which.size(), ds.x.cols);
        part.y = Matrix(which.size(), ds.y.cols);
        for (std::size_t r = 0; r < which.size(); ++r) {
            for (std::size_t c = 0; c < ds.x.cols; ++c) part.x.at(r, c) = ds.x.at(which[r], c);
            for (std::size_t c = 0; c < ds.y.cols; ++c) part.y.at(r, c) = ds.y.at(which[r], c);
        }
        return part;
    };
    return {take(train_idx), take(test_idx)};
}

// ---------------------------------------------------------------------------
// CSV persistence. One header line, full-precision values. Metadata that the
// CSV schema cannot carry (box, seed, drop counters) goes to "<path>.meta".
// ---------------------------------------------------------------------------

inline std::string dataset_csv(const LabeledDataset& ds) {
    std::string out;
    out.reserve(ds.rows() * (ds.x.cols + 6) * 20 + 1024);
    for (int j = 0; j < kNumParams; ++j) {
        if (j) out += ',';
        out += param_names()[j];
    }
    for (const auto& label : ds.grid.feature_labels()) {
        out += ',';
        out += label;
    }
    out += '\n';
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (std::size_t c = 0; c < ds.y.cols; ++c) {
            if (c) out += ',';
            out += format_full(ds.y.at(r, c));
        }
        for (std::size_t c = 0; c < ds.x.cols; ++c) {
            out += ',';
            out += format_full(ds.x.at(r, c));
        }
        out += '\n';
    }
    return out;
}

inline std::uint64_t dataset_hash(const LabeledDataset& ds) {
    const auto csv = dataset_csv(ds);
    return fnv1a(csv.data(), csv.size());
}

inline void save(const LabeledDataset& ds, const std::string& path) {
    const auto csv = dataset_csv(ds);
    {
        std::ofstream f(path, std::ios::binary);
        if (!f) throw IoError("save: cannot open " + path);
        f.write(csv.data(), static_cast<std::streamsize>(csv.size()));
        if (!f) throw IoError("save: write failed for " + path);
    }
    std::ostringstream meta;
    meta << "rhcal dataset-meta 1\n";
    for (int j = 0; j < kNumParams; ++j) {
        meta << "box_" << param_names()[j] << ' ' << format_full(ds.box.lo[j]) << ' '
             << format_full(ds.box.hi[j]) << '\n';
    }
    meta << "seed " << ds.seed << '\n';
    meta << "n_requested " << ds.n_requested << '\n';
    meta << "n_dropped " << ds.n_dropped << '\n';
    meta << "n_h_clamped " << ds.n_h_clamped << '\n';
    meta << "rows " << ds.rows() << '\n';
    meta << "hash " << hex64(fnv1a(csv.data(), csv.size())) << '\n';
    std::ofstream f(path + ".meta", std::ios::binary);
    if (!f) throw IoError("save: cannot open " + path + ".meta");
    f << meta.str();
}

namespace detail {

// Recovers the grid from feature column names of the form iv_K<k>_T<t>,
// checking strike-major order.
inline SmileGrid grid_from_labels(const std::vector<std::string>& labels, const std::string& where) {
    std::vector<double> strikes, maturities;
    std::vector<std::pair<double, double>> cells;
    for (const auto& l : labels) {
        if (l.rfind("iv_K", 0) != 0) throw IoError(where + ": bad feature column '" + l + "'");
        const auto t_pos = l.find("_T", 4);
        if (t_pos == std::string::npos) throw IoError(where + ": bad feature column '" + l + "'");
        const double k = parse_double(l.substr(4, t_pos - 4), where);
        const double t = parse_double(l.substr(t_pos + 2), where);
        cells.emplace_back(k, t);
        if (strikes.empty() || strikes.back() != k) strikes.push_back(k);
        if (strikes.size() == 1) maturities.push_back(t);
    }
    SmileGrid g;
    g.strikes = strikes;
    g.maturities = maturities;
    g.validate();
    if (g.n_cells() != labels.size()) throw IoError(where + ": feature columns do not form a grid");
    std::size_t i = 0;
    for (std::size_t ki = 0; ki < g.strikes.size(); ++ki) {
        for (std::size_t ti = 0; ti < g.maturities.size(); ++ti, ++i) {
            if (cells[i].first != g.strikes[ki] || cells[i].second != g.maturities[ti]) {
                throw IoError(where + ": feature columns are not strike-major");
            }
        }
    }
    return g;
}

}  // namespace detail

inline LabeledDataset load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load: cannot open " + path);

    std::string line;
    if (!std::getline(f, line)) throw IoError(path + ":1: empty file");
    const auto header = split_line(line);
    if (header.size() < kNumParams + 1) throw IoError(path + ":1: too few columns");
    for (int j = 0; j < kNumParams; ++j) {
        if (header[j] != param_names()[j]) {
            throw IoError(path + ":1: expected column '" + param_names()[j] + "', found '" +
                          header[j] + "'");
        }
    }
    std::vector<std::string> feature_labels(header.begin() + kNumParams, header.end());

    LabeledDataset ds;
    ds.grid = detail::grid_from_labels(feature_labels, path + ":1");

    std::vector<double> ybuf, xbuf;
    std::size_t n = 0, lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto parts = split_line(line);
        if (parts.size() != header.size()) {
            throw IoError(path + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(header.size()) + " fields, found " +
                          std::to_string(parts.size()));
        }
        const std::string where = path + ":" + std::to_string(lineno);
        for (int j = 0; j < kNumParams; ++j) ybuf.push_back(parse_double(parts[j], where));
        for (std::size_t c = kNumParams; c < parts.size(); ++c) {
            const double v = parse_double(parts[c], where);
            if (!std::isfinite(v) || v <= 0.0) {
                throw IoError(where + ": implied vol must be finite and positive");
            }
            xbuf.push_back(v);
        }
        ++n;
    }
    ds.x = Matrix(n, ds.grid.n_cells());
    ds.x.data = std::move(xbuf);
    ds.y = Matrix(n, kNumParams);
    ds.y.data = std::move(ybuf);
    ds.n_requested = n;

    // Optional sidecar with box/seed/counters.
    std::ifstream mf(path + ".meta", std::ios::binary);
    if (mf) {
        std::string mline;
        std::getline(mf, mline);
        if (mline.rfind("rhcal dataset-meta", 0) == 0) {
            while (std::getline(mf, mline)) {
                std::istringstream is(mline);
                std::string key;
                is >> key;
                for (int j = 0; j < kNumParams; ++j) {
                    if (key == "box_" + param_names()[j]) is >> ds.box.lo[j] >> ds.box.hi[j];
                }
                if (key == "seed") is >> ds.seed;
                if (key == "n_requested") is >> ds.n_requested;
                if (key == "n_dropped") is >> ds.n_dropped;
                if (key == "n_h_clamped") is >> ds.n_h_clamped;
            }
        }
    }
    return ds;
}

}  // namespace rhcal
