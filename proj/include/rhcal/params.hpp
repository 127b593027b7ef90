#pragma once

// Model parameters, sampling boxes and the fixed implied-volatility grid.
//
// Variance dynamics (spot normalized to 1, zero rates and dividends):
//
//   V_t = V_0 + kappa / Gamma(H + 1/2) * int_0^t (t-s)^(H-1/2)
//            * [ (theta - V_s) ds + nu * sqrt(V_s) dW_s ]
//
// with d<B, W> = rho dt driving dS/S = sqrt(V) dB. The kernel exponent is
// alpha = H + 1/2, so H = 1/2 recovers the classical square-root model with
// effective vol-of-vol kappa * nu.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rhcal/common.hpp"

namespace rhcal {

constexpr int kNumParams = 6;

// Canonical parameter order used by every vector, matrix column and CSV file.
inline const std::array<std::string, kNumParams>& param_names() {
    static const std::array<std::string, kNumParams> names = {"rho", "v0", "kappa",
                                                              "theta", "nu", "H"};
    return names;
}

struct RoughHestonParams {
    double rho = 0.0;    // spot / variance correlation
    double v0 = 0.0;     // initial variance
    double kappa = 0.0;  // mean-reversion speed
    double theta = 0.0;  // long-run variance
    double nu = 0.0;     // vol-of-vol scale (effective vol-of-vol is kappa * nu)
    double h = 0.0;      // Hurst exponent

    double alpha() const { return h + 0.5; }

    std::array<double, kNumParams> as_array() const { return {rho, v0, kappa, theta, nu, h}; }

    static RoughHestonParams from_array(const std::array<double, kNumParams>& a) {
        return {a[0], a[1], a[2], a[3], a[4], a[5]};
    }

    void validate() const {
        if (!(rho >= -1.0 && rho <= 1.0)) throw ValidationError("rho must lie in [-1, 1]");
        if (!(v0 > 0.0)) throw ValidationError("v0 must be positive");
        if (!(kappa > 0.0)) throw ValidationError("kappa must be positive");
        if (!(theta > 0.0)) throw ValidationError("theta must be positive");
        if (!(nu > 0.0)) throw ValidationError("nu must be positive");
        if (!(h >= 0.0 && h <= 0.5)) throw ValidationError("H must lie in [0, 0.5]");
    }
};

// Axis-aligned sampling box, one [lo, hi] interval per parameter in canonical
// order. Bounds are inclusive.
struct ParameterBox {
    std::array<double, kNumParams> lo{};
    std::array<double, kNumParams> hi{};

    double width(int j) const { return hi[j] - lo[j]; }
    double midpoint_coord(int j) const { return 0.5 * (lo[j] + hi[j]); }

    RoughHestonParams midpoint() const {
        std::array<double, kNumParams> m{};
        for (int j = 0; j < kNumParams; ++j) m[j] = midpoint_coord(j);
        return RoughHestonParams::from_array(m);
    }

    bool contains(const RoughHestonParams& p) const {
        const auto a = p.as_array();
        for (int j = 0; j < kNumParams; ++j) {
            if (a[j] < lo[j] || a[j] > hi[j]) return false;
        }
        return true;
    }

    void validate() const {
        for (int j = 0; j < kNumParams; ++j) {
            if (!(lo[j] <= hi[j])) {
                throw ValidationError("box bound reversed for " + param_names()[j]);
            }
        }
        // Both corners must be admissible parameter sets (H = 0 is allowed
        // here; the pricer applies its own floor).
        RoughHestonParams::from_array(lo).validate();
        RoughHestonParams::from_array(hi).validate();
    }
};

// Training box with mild correlation skew and moderate roughness.
inline ParameterBox narrow_box() {
    ParameterBox b;
    b.lo = {-0.7071, 0.0262, 0.1206, 0.0721, 0.2720, 0.1286};
    b.hi = {-0.5940, 0.0778, 0.5041, 0.1499, 0.3748, 0.1766};
    return b;
}

// Stress box; rho may reach -1 and H may reach 0.
inline ParameterBox wide_box() {
    ParameterBox b;
    b.lo = {-1.0, 0.0157, 0.0724, 0.0433, 0.1632, 0.0};
    b.hi = {-0.3564, 0.1089, 0.7057, 0.2099, 0.5247, 0.4472};
    return b;
}

// Deliberately disjoint from both training boxes; used for robustness checks.
inline ParameterBox out_of_sample_box() {
    ParameterBox b;
    b.lo = {-0.31, 0.12, 0.80, 0.24, 0.60, 0.47};
    b.hi = {-0.21, 0.15, 1.00, 0.29, 0.74, 0.50};
    return b;
}

inline ParameterBox box_by_name(const std::string& name) {
    if (name == "narrow") return narrow_box();
    if (name == "wide") return wide_box();
    if (name == "out_of_sample") return out_of_sample_box();
    throw ValidationError("unknown box '" + name + "' (expected narrow, wide or out_of_sample)");
}

// ---------------------------------------------------------------------------
// Surface grid. Cells are flattened strike-major: all maturities of the first
// strike, then all maturities of the second strike, and so on.
// ---------------------------------------------------------------------------

struct SmileGrid {
    std::vector<double> strikes;
    std::vector<double> maturities;

    std::size_t n_cells() const { return strikes.size() * maturities.size(); }

    std::size_t flat_index(std::size_t strike_idx, std::size_t maturity_idx) const {
        return strike_idx * maturities.size() + maturity_idx;
    }

    std::string cell_label(std::size_t strike_idx, std::size_t maturity_idx) const {
        return "K" + format_label(strikes[strike_idx]) + "_T" + format_label(maturities[maturity_idx]);
    }

    std::vector<std::string> feature_labels() const {
        std::vector<std::string> out;
        out.reserve(n_cells());
        for (std::size_t k = 0; k < strikes.size(); ++k) {
            for (std::size_t t = 0; t < maturities.size(); ++t) {
                out.push_back("iv_" + cell_label(k, t));
            }
        }
        return out;
    }

    void validate() const {
        if (strikes.empty() || maturities.empty()) throw ValidationError("grid must be non-empty");
        for (double k : strikes) {
            if (!(k > 0.0)) throw ValidationError("strikes must be positive");
        }
        for (double t : maturities) {
            if (!(t > 0.0)) throw ValidationError("maturities must be positive");
        }
        for (std::size_t i = 1; i < strikes.size(); ++i) {
            if (!(strikes[i] > strikes[i - 1])) throw ValidationError("strikes must increase");
        }
        for (std::size_t i = 1; i < maturities.size(); ++i) {
            if (!(maturities[i] > maturities[i - 1])) throw ValidationError("maturities must increase");
        }
    }
};

// 9 moneyness levels x 6 expiries = 54 surface cells.
inline SmileGrid default_grid() {
    SmileGrid g;
    g.strikes = {0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4};
    g.maturities = {0.6, 0.9, 1.2, 1.5, 1.8, 2.0};
    return g;
}

}  // namespace rhcal
