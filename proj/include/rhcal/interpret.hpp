#pragma once

// Feature attribution over a trained network: local methods (LIME with a
// proximity-weighted Huber surrogate, Gradient*Input, DeepLIFT rescale rule,
// epsilon-LRP), exact Shapley values for small feature counts, Deep-SHAP-style
// global attribution (rescale-rule attributions averaged over a background
// set), grid aggregation into heat maps, and Spearman rank correlation.
//
// All methods operate in the preprocessed feature space; phi entries are
// labeled by grid cell through the dataset's strike-major flattening.

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "rhcal/common.hpp"
#include "rhcal/network.hpp"
#include "rhcal/params.hpp"

namespace rhcal {

struct AttributionResult {
    std::string method;        // "lime" | "gradient_input" | "deeplift" | "lrp" | "shapley" | "shap"
    int output = 0;            // parameter index j
    std::size_t instance = 0;  // caller-assigned row id
    std::vector<double> phi;   // one attribution per feature
    double phi0 = 0.0;         // additive baseline term (methods that define one)
    double prediction = 0.0;   // model output at the instance

    // Method-specific diagnostics (NaN when not applicable).
    double weighted_r2 = std::numeric_limits<double>::quiet_NaN();        // lime
    double local_pred_lo = std::numeric_limits<double>::quiet_NaN();      // lime
    double local_pred_hi = std::numeric_limits<double>::quiet_NaN();      // lime
    double absorbed_fraction = std::numeric_limits<double>::quiet_NaN();  // lrp
};

using ScalarFn = std::function<double(const std::vector<double>&)>;

// ---------------------------------------------------------------------------
// LIME: sample binary masks z' uniformly, map them to inputs by keeping masked
// coordinates at the instance and replacing the rest by reference means, then
// fit a proximity-weighted robust (Huber) linear model g(z') = phi0 + z'.phi.
// ---------------------------------------------------------------------------

struct LimeConfig {
    std::size_t n_samples = 5000;
    double kernel_sigma = 0.0;  // <= 0 means 0.75 * sqrt(n_features)
    double huber_epsilon = 1.35;
    std::size_t max_iterations = 100;
    double convergence_tol = 1e-10;
    std::uint64_t seed = 1;
};

namespace detail {

// Weighted median of |values| (weights positive).
inline double weighted_median_abs(std::vector<std::pair<double, double>>& abs_weight) {
    std::sort(abs_weight.begin(), abs_weight.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double total = 0.0;
    for (const auto& [v, w] : abs_weight) total += w;
    double run = 0.0;
    for (const auto& [v, w] : abs_weight) {
        run += w;
        if (run >= 0.5 * total) return v;
    }
    return abs_weight.empty() ? 0.0 : abs_weight.back().first;
}

}  // namespace detail

inline AttributionResult lime_explain(const ScalarFn& f, const std::vector<double>& x,
                                      const std::vector<double>& reference, int output_j,
                                      const LimeConfig& cfg = {}) {
    const std::size_t d = x.size();
    if (reference.size() != d) throw ValidationError("lime: reference size mismatch");
    if (cfg.n_samples < d + 2) throw ValidationError("lime: need more samples than features");
    const double sigma = cfg.kernel_sigma > 0.0 ? cfg.kernel_sigma
                                                : 0.75 * std::sqrt(static_cast<double>(d));
    const double sigma2 = sigma * sigma;

    Rng rng(derive_seed(cfg.seed, {0x6c696d65u}));
    const std::size_t n = cfg.n_samples;
    std::vector<char> masks(n * d);
    std::vector<double> y(n), prox(n);
    std::vector<double> probe(d);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t s = 0; s < n; ++s) {
        std::size_t off = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const bool keep = rng.bernoulli_half();
            masks[s * d + i] = keep ? 1 : 0;
            if (!keep) ++off;
            probe[i] = keep ? x[i] : reference[i];
        }
        y[s] = f(probe);
        prox[s] = std::exp(-static_cast<double>(off) / sigma2);
        lo = std::min(lo, y[s]);
        hi = std::max(hi, y[s]);
    }

    // Weighted least squares with iteratively reweighted Huber weights.
    const std::size_t p = d + 1;  // intercept first
    Eigen::MatrixXd z(n, p);
    for (std::size_t s = 0; s < n; ++s) {
        z(static_cast<Eigen::Index>(s), 0) = 1.0;
        for (std::size_t i = 0; i < d; ++i) {
            z(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i + 1)) =
                static_cast<double>(masks[s * d + i]);
        }
    }
    Eigen::VectorXd yv(n);
    for (std::size_t s = 0; s < n; ++s) yv(static_cast<Eigen::Index>(s)) = y[s];

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    std::vector<double> robust(n, 1.0);
    const auto solve_wls = [&]() {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
        for (std::size_t s = 0; s < n; ++s) {
            const double w = prox[s] * robust[s];
            const auto row = z.row(static_cast<Eigen::Index>(s));
            a.noalias() += w * row.transpose() * row;
            b.noalias() += w * yv(static_cast<Eigen::Index>(s)) * row.transpose();
        }
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
        if (ldlt.info() != Eigen::Success) {
            throw NumericError("lime: degenerate design matrix (surrogate fit failed)");
        }
        return Eigen::VectorXd(ldlt.solve(b));
    };

    beta = solve_wls();
    for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
        const Eigen::VectorXd resid = yv - z * beta;
        std::vector<std::pair<double, double>> aw(n);
        for (std::size_t s = 0; s < n; ++s) {
            aw[s] = {std::abs(resid(static_cast<Eigen::Index>(s))), prox[s]};
        }
        const double mad = detail::weighted_median_abs(aw);
        const double scale = mad / 0.6745;
        if (!(scale > 1e-14 * (1.0 + std::abs(yv.mean())))) break;  // essentially exact fit
        for (std::size_t s = 0; s < n; ++s) {
            const double t = std::abs(resid(static_cast<Eigen::Index>(s))) / scale;
            robust[s] = t <= cfg.huber_epsilon ? 1.0 : cfg.huber_epsilon / t;
        }
        const Eigen::VectorXd next = solve_wls();
        const double delta = (next - beta).cwiseAbs().maxCoeff();
        beta = next;
        if (delta <= cfg.convergence_tol) break;
    }

    // Proximity-weighted R^2 of the surrogate.
    double sw = 0.0, swy = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        sw += prox[s];
        swy += prox[s] * y[s];
    }
    const double ybar = swy / sw;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
        const double fit = z.row(static_cast<Eigen::Index>(s)) * beta;
        ss_res += prox[s] * (y[s] - fit) * (y[s] - fit);
        ss_tot += prox[s] * (y[s] - ybar) * (y[s] - ybar);
    }

    AttributionResult res;
    res.method = "lime";
    res.output = output_j;
    res.phi.resize(d);
    for (std::size_t i = 0; i < d; ++i) res.phi[i] = beta(static_cast<Eigen::Index>(i + 1));
    res.phi0 = beta(0);
    res.prediction = f(x);
    res.weighted_r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    res.local_pred_lo = lo;
    res.local_pred_hi = hi;
    return res;
}

// ---------------------------------------------------------------------------
// Gradient * Input.
// ---------------------------------------------------------------------------

inline AttributionResult gradient_input(const FeedforwardNet& net, const std::vector<double>& x,
                                        int output_j) {
    if (x.size() != net.n_in) throw ValidationError("gradient_input: input size mismatch");
    const auto jac = jacobian(net, x.data());
    AttributionResult res;
    res.method = "gradient_input";
    res.output = output_j;
    res.phi.resize(net.n_in);
    for (std::size_t i = 0; i < net.n_in; ++i) {
        res.phi[i] = jac.at(static_cast<std::size_t>(output_j), i) * x[i];
    }
    res.prediction = forward(net, x).y[static_cast<std::size_t>(output_j)];
    return res;
}

// ---------------------------------------------------------------------------
// DeepLIFT, rescale rule, one hidden layer. Baseline defaults to zero.
// Completeness: sum(phi) = y_j(x) - y_j(baseline) exactly up to rounding.
// ---------------------------------------------------------------------------

inline AttributionResult deeplift_rescale(const FeedforwardNet& net, const std::vector<double>& x,
                                          const std::vector<double>& baseline, int output_j) {
    if (x.size() != net.n_in) throw ValidationError("deeplift: input size mismatch");
    if (baseline.size() != net.n_in) throw ValidationError("deeplift: baseline size mismatch");
    const auto cx = forward(net, x);
    const auto cb = forward(net, baseline);
    const auto j = static_cast<std::size_t>(output_j);

    AttributionResult res;
    res.method = "deeplift";
    res.output = output_j;
    res.prediction = cx.y[j];
    res.phi0 = cb.y[j];
    res.phi.assign(net.n_in, 0.0);
    for (std::size_t h = 0; h < net.n_hidden; ++h) {
        const double dz = cx.z1[h] - cb.z1[h];
        const double multiplier =
            std::abs(dz) < 1e-9 ? elu_prime(cx.z1[h]) : (cx.h1[h] - cb.h1[h]) / dz;
        const double chain = multiplier * net.w2.at(h, j);
        for (std::size_t i = 0; i < net.n_in; ++i) {
            res.phi[i] += (x[i] - baseline[i]) * net.w1.at(i, h) * chain;
        }
    }
    return res;
}

inline AttributionResult deeplift_rescale(const FeedforwardNet& net, const std::vector<double>& x,
                                          int output_j) {
    return deeplift_rescale(net, x, std::vector<double>(net.n_in, 0.0), output_j);
}

// ---------------------------------------------------------------------------
// epsilon-LRP. Relevance starts at the selected output and flows backwards
// with the epsilon-stabilized rule; bias and stabilizer shares are absorbed.
// eps_rel scales each layer's stabilizer by the mean |pre-activation| of that
// layer at this instance (eps_rel = 0 disables stabilization).
// ---------------------------------------------------------------------------

inline AttributionResult lrp_epsilon(const FeedforwardNet& net, const std::vector<double>& x,
                                     int output_j, double eps_rel = 1e-4) {
    if (x.size() != net.n_in) throw ValidationError("lrp: input size mismatch");
    if (!(eps_rel >= 0.0)) throw ValidationError("lrp: eps_rel must be >= 0");
    const auto c = forward(net, x);
    const auto j = static_cast<std::size_t>(output_j);

    const auto stab = [](double z, double eps) { return z + (z >= 0.0 ? eps : -eps); };

    // Output layer: relevance of hidden neuron h from output j.
    double mean_abs_z2 = 0.0;
    for (const auto v : c.y) mean_abs_z2 += std::abs(v);
    mean_abs_z2 /= static_cast<double>(net.n_out);
    const double eps2 = eps_rel * mean_abs_z2;
    const double denom2 = stab(c.y[j], eps2);
    std::vector<double> rh(net.n_hidden, 0.0);
    if (denom2 != 0.0) {
        for (std::size_t h = 0; h < net.n_hidden; ++h) {
            rh[h] = c.h1[h] * net.w2.at(h, j) / denom2 * c.y[j];
        }
    }

    // Hidden layer: relevance of input i.
    double mean_abs_z1 = 0.0;
    for (const auto v : c.z1) mean_abs_z1 += std::abs(v);
    mean_abs_z1 /= static_cast<double>(net.n_hidden);
    const double eps1 = eps_rel * mean_abs_z1;

    AttributionResult res;
    res.method = "lrp";
    res.output = output_j;
    res.prediction = c.y[j];
    res.phi.assign(net.n_in, 0.0);
    for (std::size_t h = 0; h < net.n_hidden; ++h) {
        if (rh[h] == 0.0) continue;
        const double denom1 = stab(c.z1[h], eps1);
        if (denom1 == 0.0) continue;
        const double f = rh[h] / denom1;
        for (std::size_t i = 0; i < net.n_in; ++i) {
            res.phi[i] += x[i] * net.w1.at(i, h) * f;
        }
    }
    double total = 0.0;
    for (const auto v : res.phi) total += v;
    res.absorbed_fraction =
        std::abs(c.y[j]) > 1e-12 ? 1.0 - total / c.y[j] : 0.0;
    return res;
}

// ---------------------------------------------------------------------------
// Exact Shapley values by coalition enumeration (feature count <= 12).
// Absent features take the reference value.
// ---------------------------------------------------------------------------

inline AttributionResult shapley_exact(const ScalarFn& f, const std::vector<double>& x,
                                       const std::vector<double>& reference, int output_j = 0) {
    const std::size_t m = x.size();
    if (reference.size() != m) throw ValidationError("shapley_exact: reference size mismatch");
    if (m == 0) throw ValidationError("shapley_exact: empty input");
    if (m > 12) {
        throw ValidationError(
            "shapley_exact: more than 12 features; use the sampled or background-averaged "
            "estimator");
    }
    const std::size_t n_coal = std::size_t{1} << m;
    std::vector<double> value(n_coal);
    std::vector<double> probe(m);
    for (std::size_t s = 0; s < n_coal; ++s) {
        for (std::size_t i = 0; i < m; ++i) probe[i] = (s >> i) & 1u ? x[i] : reference[i];
        value[s] = f(probe);
    }
    std::vector<double> fact(m + 1, 1.0);
    for (std::size_t i = 1; i <= m; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);

    AttributionResult res;
    res.method = "shapley";
    res.output = output_j;
    res.phi.assign(m, 0.0);
    res.phi0 = value[0];
    res.prediction = value[n_coal - 1];
    for (std::size_t s = 0; s < n_coal; ++s) {
        const auto size = static_cast<std::size_t>(std::popcount(s));
        const double w = fact[size] * fact[m - size - 1] / fact[m];
        for (std::size_t k = 0; k < m; ++k) {
            if ((s >> k) & 1u) continue;
            res.phi[k] += w * (value[s | (std::size_t{1} << k)] - value[s]);
        }
    }
    return res;
}

// Permutation-sampling Shapley estimator (any feature count); used as a
// cross-check of the background-averaged estimator.
inline AttributionResult shapley_sampled(const ScalarFn& f, const std::vector<double>& x,
                                         const std::vector<double>& reference,
                                         std::size_t n_permutations, std::uint64_t seed,
                                         int output_j = 0) {
    const std::size_t m = x.size();
    if (reference.size() != m) throw ValidationError("shapley_sampled: reference size mismatch");
    if (n_permutations == 0) throw ValidationError("shapley_sampled: need permutations");
    Rng rng(derive_seed(seed, {0x73686170u}));
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;

    AttributionResult res;
    res.method = "shapley_sampled";
    res.output = output_j;
    res.phi.assign(m, 0.0);
    std::vector<double> probe(m);
    for (std::size_t p = 0; p < n_permutations; ++p) {
        shuffle_inplace(order, rng);
        probe = reference;
        double prev = f(probe);
        for (const auto k : order) {
            probe[k] = x[k];
            const double cur = f(probe);
            res.phi[k] += cur - prev;
            prev = cur;
        }
    }
    for (auto& v : res.phi) v /= static_cast<double>(n_permutations);
    res.phi0 = f(reference);
    res.prediction = f(x);
    return res;
}

// ---------------------------------------------------------------------------
// Global attribution: rescale-rule attributions averaged over a background
// matrix (Deep-SHAP style). One result per instance row.
// ---------------------------------------------------------------------------

inline std::vector<AttributionResult> shapley_global(const FeedforwardNet& net,
                                                     const Matrix& background,
                                                     const Matrix& instances, int output_j,
                                                     unsigned workers = 0) {
    if (background.rows == 0) throw ValidationError("shapley_global: empty background");
    if (background.cols != net.n_in || instances.cols != net.n_in) {
        throw ValidationError("shapley_global: column count mismatch");
    }
    std::vector<AttributionResult> out(instances.rows);
    parallel_for(
        instances.rows,
        [&](std::size_t r) {
            const auto xr = instances.row_copy(r);
            AttributionResult acc;
            acc.method = "shap";
            acc.output = output_j;
            acc.instance = r;
            acc.phi.assign(net.n_in, 0.0);
            double phi0 = 0.0;
            for (std::size_t b = 0; b < background.rows; ++b) {
                const auto one =
                    deeplift_rescale(net, xr, background.row_copy(b), output_j);
                for (std::size_t i = 0; i < net.n_in; ++i) acc.phi[i] += one.phi[i];
                phi0 += one.phi0;
            }
            const double inv = 1.0 / static_cast<double>(background.rows);
            for (auto& v : acc.phi) v *= inv;
            acc.phi0 = phi0 * inv;
            acc.prediction = forward(net, xr).y[static_cast<std::size_t>(output_j)];
            out[r] = std::move(acc);
        },
        workers);
    return out;
}

// ---------------------------------------------------------------------------
// Aggregation and ranking.
// ---------------------------------------------------------------------------

struct HeatMap {
    SmileGrid grid;
    Matrix cells;  // strikes x maturities, mean |phi|
    std::size_t n_instances = 0;

    double at_cell(std::size_t k, std::size_t t) const { return cells.at(k, t); }
};

struct RankedCell {
    std::size_t flat_index;
    double strike, maturity;
    double value;
};

// Mean |phi| per grid cell over all results (one method; outputs may be mixed
// to form an "overall" map).
inline HeatMap aggregate_heatmap(const std::vector<AttributionResult>& results,
                                 const SmileGrid& grid) {
    if (results.empty()) throw ValidationError("aggregate_heatmap: no results");
    for (const auto& r : results) {
        if (r.method != results.front().method) {
            throw ValidationError("aggregate_heatmap: mixed attribution methods");
        }
        if (r.phi.size() != grid.n_cells()) {
            throw ValidationError("aggregate_heatmap: phi length does not match the grid");
        }
    }
    HeatMap map;
    map.grid = grid;
    map.cells = Matrix(grid.strikes.size(), grid.maturities.size());
    map.n_instances = results.size();
    for (const auto& r : results) {
        std::size_t i = 0;
        for (std::size_t k = 0; k < grid.strikes.size(); ++k) {
            for (std::size_t t = 0; t < grid.maturities.size(); ++t, ++i) {
                map.cells.at(k, t) += std::abs(r.phi[i]);
            }
        }
    }
    for (auto& v : map.cells.data) v /= static_cast<double>(results.size());
    return map;
}

inline std::vector<RankedCell> rank_cells(const HeatMap& map) {
    std::vector<RankedCell> out;
    out.reserve(map.grid.n_cells());
    std::size_t i = 0;
    for (std::size_t k = 0; k < map.grid.strikes.size(); ++k) {
        for (std::size_t t = 0; t < map.grid.maturities.size(); ++t, ++i) {
            out.push_back({i, map.grid.strikes[k], map.grid.maturities[t], map.cells.at(k, t)});
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedCell& a, const RankedCell& b) { return a.value > b.value; });
    return out;
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw ValidationError("spearman: size mismatch");
    const auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(),
                  [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
        std::vector<double> r(n);
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(ra.size());
    mb /= static_cast<double>(rb.size());
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (!(va > 0.0 && vb > 0.0)) throw ValidationError("spearman: constant ranking");
    return num / std::sqrt(va * vb);
}

// ---------------------------------------------------------------------------
// CSV emitters.
// ---------------------------------------------------------------------------

inline void save_attributions(const std::vector<AttributionResult>& results,
                              const SmileGrid& grid, const std::string& path) {
    std::ostringstream os;
    os << "method,output_param,instance";
    for (const auto& label : grid.feature_labels()) os << ',' << label.substr(3);  // drop "iv_"
    os << '\n';
    for (const auto& r : results) {
        os << r.method << ',' << param_names()[r.output] << ',' << r.instance;
        for (const auto v : r.phi) os << ',' << format_full(v);
        os << '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_attributions: cannot open " + path);
    f << os.str();
    if (!f) throw IoError("save_attributions: write failed for " + path);
}

inline void save_heatmap(const HeatMap& map, const std::string& path) {
    std::ostringstream os;
    os << "strike";
    for (const auto t : map.grid.maturities) os << ",T" << format_label(t);
    os << '\n';
    for (std::size_t k = 0; k < map.grid.strikes.size(); ++k) {
        os << 'K' << format_label(map.grid.strikes[k]);
        for (std::size_t t = 0; t < map.grid.maturities.size(); ++t) {
            os << ',' << format_full(map.cells.at(k, t));
        }
        os << '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_heatmap: cannot open " + path);
    f << os.str();
}

}  // namespace rhcal
