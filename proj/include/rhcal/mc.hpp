#pragma once

// Monte Carlo simulation of the rough Heston spot, used as an independent
// cross-check of the Fourier pricer.
//
// The variance path is advanced by explicit Euler on the Volterra equation.
// The singular kernel (t - s)^(alpha - 1) / Gamma(alpha) is integrated
// exactly over each step, so with lag l = k - j the weight of step j at time
// t_k is
//
//   w_l = dt^alpha (l^alpha - (l-1)^alpha) / Gamma(alpha + 1),
//
// applied to the drift as w_l * kappa * (theta - V_j^+) and to the diffusion
// as (w_l / dt) * kappa * nu * sqrt(V_j^+) dW_j. Full truncation: the raw
// path may go negative, coefficients always see V^+ = max(V, 0). Spot is
// advanced in log space, which keeps the sample mean of S_T an exact
// martingale estimator.
//
// Paths are simulated in fixed-size blocks with per-block derived seeds and
// merged by block index, so results do not depend on the worker count.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "rhcal/common.hpp"
#include "rhcal/params.hpp"

namespace rhcal {

struct McConfig {
    std::size_t n_paths = 100000;
    int n_steps = 256;
    bool antithetic = true;
    std::uint64_t seed = 1;
    std::size_t block_size = 4096;  // paths per seeding block
    unsigned workers = 0;           // 0 = automatic

    void validate() const {
        if (n_paths < 2) throw ValidationError("mc: need at least 2 paths");
        if (n_steps < 1) throw ValidationError("mc: need at least 1 step");
        if (block_size < 2) throw ValidationError("mc: block_size must be at least 2");
    }
};

struct KernelWeights {
    double alpha = 0.0;
    double dt = 0.0;
    // w[l] for lag l >= 1; w[0] is unused. Decreasing in l, w[1] largest.
    std::vector<double> w;
};

inline KernelWeights kernel_weights(double alpha, double maturity, int n_steps) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("kernel_weights: alpha in (0, 1]");
    if (!(maturity > 0.0)) throw ValidationError("kernel_weights: maturity must be positive");
    if (n_steps < 1) throw ValidationError("kernel_weights: need at least 1 step");
    KernelWeights kw;
    kw.alpha = alpha;
    kw.dt = maturity / n_steps;
    kw.w.resize(n_steps + 1, 0.0);
    const double scale = std::pow(kw.dt, alpha) / std::tgamma(alpha + 1.0);
    double prev = 0.0;
    for (int l = 1; l <= n_steps; ++l) {
        const double cur = std::pow(static_cast<double>(l), alpha);
        kw.w[l] = scale * (cur - prev);
        prev = cur;
    }
    return kw;
}

struct McResult {
    std::vector<double> terminal_spot;
    std::size_t n_truncated_paths = 0;  // paths whose raw variance went negative
    double truncated_fraction = 0.0;
};

namespace detail {

// Simulates paths [begin, end) of the global path ordering into out.
// Antithetic pairs (2m, 2m+1) share one normal stream with flipped signs, so
// blocks are aligned to pair boundaries by the caller.
inline void simulate_block(const RoughHestonParams& p, double maturity, const McConfig& cfg,
                           const KernelWeights& kw, std::size_t begin, std::size_t end,
                           std::uint64_t block_seed, double* out_spot,
                           std::size_t* out_truncated) {
    const int n = cfg.n_steps;
    const double dt = kw.dt;
    const double sqdt = std::sqrt(dt);
    const double rho_bar = std::sqrt(std::max(0.0, 1.0 - p.rho * p.rho));
    const double diff_scale = p.kappa * p.nu / dt;

    Rng rng(block_seed);
    std::vector<double> hist_a(n, 0.0), hist_b(n, 0.0);

    std::size_t truncated = 0;
    std::size_t i = begin;
    while (i < end) {
        const bool paired = cfg.antithetic && i + 1 < end;
        double xa = 0.0, xb = 0.0;
        double va = p.v0, vb = p.v0;
        bool neg_a = false, neg_b = false;

        for (int k = 0; k < n; ++k) {
            const double z1 = rng.normal();
            const double z2 = rng.normal();

            {
                const double vp = va > 0.0 ? va : 0.0;
                const double sq = std::sqrt(vp);
                const double dw = sqdt * z1;
                const double db = p.rho * dw + rho_bar * sqdt * z2;
                xa += -0.5 * vp * dt + sq * db;
                hist_a[k] = p.kappa * (p.theta - vp) + diff_scale * sq * dw;
            }
            if (paired) {
                const double vp = vb > 0.0 ? vb : 0.0;
                const double sq = std::sqrt(vp);
                const double dw = sqdt * -z1;
                const double db = p.rho * dw + rho_bar * sqdt * -z2;
                xb += -0.5 * vp * dt + sq * db;
                hist_b[k] = p.kappa * (p.theta - vp) + diff_scale * sq * dw;
            }

            if (k + 1 < n) {
                const double* w = kw.w.data();
                double acc_a = 0.0, acc_b = 0.0;
                if (paired) {
                    for (int j = 0; j <= k; ++j) {
                        const double wl = w[k + 1 - j];
                        acc_a += wl * hist_a[j];
                        acc_b += wl * hist_b[j];
                    }
                } else {
                    for (int j = 0; j <= k; ++j) acc_a += w[k + 1 - j] * hist_a[j];
                }
                va = p.v0 + acc_a;
                vb = p.v0 + acc_b;
                if (va < 0.0) neg_a = true;
                if (paired && vb < 0.0) neg_b = true;
            }
        }

        out_spot[i - begin] = std::exp(xa);
        if (neg_a) ++truncated;
        ++i;
        if (paired) {
            out_spot[i - begin] = std::exp(xb);
            if (neg_b) ++truncated;
            ++i;
        }
    }
    *out_truncated = truncated;
}

}  // namespace detail

inline McResult simulate_terminal(const RoughHestonParams& p, double maturity,
                                  const McConfig& cfg = {}) {
    cfg.validate();
    p.validate();
    if (!(maturity > 0.0)) throw ValidationError("mc: maturity must be positive");

    const auto kw = kernel_weights(p.alpha(), maturity, cfg.n_steps);

    // Align blocks to antithetic pairs so pairing is independent of layout.
    const std::size_t block = cfg.block_size - (cfg.block_size % 2);
    const std::size_t n_blocks = (cfg.n_paths + block - 1) / block;

    McResult res;
    res.terminal_spot.resize(cfg.n_paths);
    std::vector<std::size_t> truncated(n_blocks, 0);

    parallel_for(
        n_blocks,
        [&](std::size_t b) {
            const std::size_t begin = b * block;
            const std::size_t end = std::min(cfg.n_paths, begin + block);
            detail::simulate_block(p, maturity, cfg, kw, begin, end,
                                   derive_seed(cfg.seed, {0x6d63u, b}), res.terminal_spot.data() + begin,
                                   &truncated[b]);
        },
        cfg.workers);

    for (std::size_t b = 0; b < n_blocks; ++b) res.n_truncated_paths += truncated[b];
    res.truncated_fraction = static_cast<double>(res.n_truncated_paths) / cfg.n_paths;
    return res;
}

struct McPrice {
    double price = 0.0;
    double std_error = 0.0;
    std::size_t n_paths = 0;
    double truncated_fraction = 0.0;
};

// Discounted payoff mean with a standard error. Under antithetic sampling the
// error is estimated from pair means, which are the independent samples.
inline McPrice mc_call_price(const RoughHestonParams& p, double strike, double maturity,
                             const McConfig& cfg = {}) {
    if (!(strike >= 0.0)) throw ValidationError("mc: strike must be non-negative");
    const auto sim = simulate_terminal(p, maturity, cfg);

    McPrice out;
    out.n_paths = sim.terminal_spot.size();
    out.truncated_fraction = sim.truncated_fraction;

    if (cfg.antithetic) {
        const std::size_t n_pairs = out.n_paths / 2;
        double sum = 0.0, sum2 = 0.0;
        for (std::size_t m = 0; m < n_pairs; ++m) {
            const double pay_a = std::max(sim.terminal_spot[2 * m] - strike, 0.0);
            const double pay_b = std::max(sim.terminal_spot[2 * m + 1] - strike, 0.0);
            const double pm = 0.5 * (pay_a + pay_b);
            sum += pm;
            sum2 += pm * pm;
        }
        double tail = 0.0;
        std::size_t n_eff = n_pairs;
        if (out.n_paths % 2 != 0) {
            // odd path count: the last unpaired path enters the mean only
            tail = std::max(sim.terminal_spot.back() - strike, 0.0);
        }
        const double mean = (sum + 0.5 * tail) / (n_pairs + (out.n_paths % 2 ? 0.5 : 0.0));
        const double var = n_eff > 1 ? (sum2 - sum * sum / n_eff) / (n_eff - 1) : 0.0;
        out.price = mean;
        out.std_error = n_eff > 1 ? std::sqrt(std::max(var, 0.0) / n_eff) : 0.0;
    } else {
        double sum = 0.0, sum2 = 0.0;
        for (double s : sim.terminal_spot) {
            const double pay = std::max(s - strike, 0.0);
            sum += pay;
            sum2 += pay * pay;
        }
        const double n = static_cast<double>(out.n_paths);
        const double mean = sum / n;
        const double var = (sum2 - sum * sum / n) / (n - 1.0);
        out.price = mean;
        out.std_error = std::sqrt(std::max(var, 0.0) / n);
    }
    return out;
}

}  // namespace rhcal
