#pragma once

// Black-Scholes call pricing and implied-volatility inversion.
// Spot is normalized to 1 and rates are zero throughout the library.

#include <cmath>
#include <string>

#include "rhcal/common.hpp"

namespace rhcal {

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

inline double norm_pdf(double x) {
    return 0.39894228040143267794 * std::exp(-0.5 * x * x);
}

// Call on unit spot: C = N(d1) - K N(d2).
inline double bs_call(double sigma, double strike, double maturity) {
    if (!(strike > 0.0)) throw ValidationError("bs_call: strike must be positive");
    if (!(maturity > 0.0)) throw ValidationError("bs_call: maturity must be positive");
    if (!(sigma >= 0.0)) throw ValidationError("bs_call: volatility must be non-negative");
    if (sigma == 0.0) return std::max(1.0 - strike, 0.0);
    const double sq = sigma * std::sqrt(maturity);
    const double d1 = (-std::log(strike) + 0.5 * sq * sq) / sq;
    const double d2 = d1 - sq;
    return norm_cdf(d1) - strike * norm_cdf(d2);
}

inline double bs_vega(double sigma, double strike, double maturity) {
    const double sq = sigma * std::sqrt(maturity);
    const double d1 = (-std::log(strike) + 0.5 * sq * sq) / sq;
    return norm_pdf(d1) * std::sqrt(maturity);
}

// Inverts bs_call by bisection on [~0, 5]. The price must lie strictly inside
// the static no-arbitrage band (max(1-K, 0), 1); the returned vol reproduces
// the price to 1e-10 absolute.
inline double implied_vol(double price, double strike, double maturity) {
    if (!(strike > 0.0)) throw ValidationError("implied_vol: strike must be positive");
    if (!(maturity > 0.0)) throw ValidationError("implied_vol: maturity must be positive");
    const double intrinsic = std::max(1.0 - strike, 0.0);
    if (!(price > intrinsic) || !(price < 1.0)) {
        throw ValidationError("implied_vol: price " + format_full(price) +
                              " outside the no-arbitrage band (" + format_full(intrinsic) +
                              ", 1) at K=" + format_label(strike));
    }

    double lo = 0.0, hi = 5.0;
    if (bs_call(hi, strike, maturity) < price) {
        throw NumericError("implied_vol: volatility above bracket limit 5");
    }
    // Bisection is slow but unconditionally convergent, which matters for the
    // tiny-vega corners (deep in/out of the money at short maturity).
    for (int iter = 0; iter < 200 && hi - lo > 1e-14; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (bs_call(mid, strike, maturity) < price) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double vol = 0.5 * (lo + hi);
    if (std::abs(bs_call(vol, strike, maturity) - price) > 1e-10) {
        throw NumericError("implied_vol: residual above 1e-10 at K=" + format_label(strike));
    }
    return vol;
}

}  // namespace rhcal
