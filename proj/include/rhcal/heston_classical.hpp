#pragma once

// Closed-form classical Heston pricing. This is a reference path used to
// validate the fractional solver at H = 1/2 and is deliberately independent
// of it: the characteristic function comes from the analytic Riccati
// solution and the Fourier integral is evaluated with adaptive Simpson.
//
// Model: dV = kappa (theta - V) dt + sigma sqrt(V) dW. A rough parameter set
// with H = 1/2 maps onto this with sigma = kappa * nu.

#include <cmath>
#include <complex>
#include <vector>

#include "rhcal/bs.hpp"
#include "rhcal/common.hpp"
#include "rhcal/params.hpp"
#include "rhcal/quadrature.hpp"

namespace rhcal {

struct ClassicalHestonParams {
    double kappa = 0.0;
    double theta = 0.0;
    double sigma = 0.0;  // vol-of-vol
    double rho = 0.0;
    double v0 = 0.0;
};

inline ClassicalHestonParams classical_from_rough(const RoughHestonParams& p) {
    return {p.kappa, p.theta, p.kappa * p.nu, p.rho, p.v0};
}

// Analytic solution of the Heston Riccati ODE at complex frequency a:
// psi' = 1/2 sigma^2 psi^2 + (i a rho sigma - kappa) psi - 1/2 a (a + i).
struct ClassicalRiccati {
    std::complex<double> psi;       // psi(T)
    std::complex<double> integral;  // int_0^T psi dt
};

inline ClassicalRiccati classical_riccati(const ClassicalHestonParams& p, std::complex<double> a,
                                          double maturity) {
    const std::complex<double> ii(0.0, 1.0);
    const double s2 = p.sigma * p.sigma;
    const std::complex<double> b = p.kappa - ii * a * p.rho * p.sigma;
    std::complex<double> d = std::sqrt(b * b + s2 * a * (a + ii));
    // Keep Re(d) >= 0 so exp(-d T) decays; this is the branch that avoids the
    // complex-log discontinuity for long maturities.
    if (d.real() < 0.0) d = -d;
    const std::complex<double> g = (b - d) / (b + d);
    const std::complex<double> e = std::exp(-d * maturity);
    ClassicalRiccati out;
    out.psi = (b - d) / s2 * (1.0 - e) / (1.0 - g * e);
    out.integral = ((b - d) * maturity - 2.0 * std::log((1.0 - g * e) / (1.0 - g))) / s2;
    return out;
}

// Characteristic function of log spot, E[exp(i a log S_T)].
inline std::complex<double> classical_cf(const ClassicalHestonParams& p, std::complex<double> a,
                                         double maturity) {
    const auto r = classical_riccati(p, a, maturity);
    return std::exp(p.theta * p.kappa * r.integral + p.v0 * r.psi);
}

// Call price through the same Fourier representation the main pricer uses,
//
//   C = 1 - sqrt(K)/pi * int_0^inf Re[e^(i u k) phi_T(u - i/2)] du / (u^2 + 1/4),
//
// with k = log(1/K), but integrated adaptively instead of with fixed nodes.
inline double classical_call(const ClassicalHestonParams& p, double strike, double maturity,
                             double u_max = 200.0) {
    if (!(strike > 0.0)) throw ValidationError("classical_call: strike must be positive");
    if (!(maturity > 0.0)) throw ValidationError("classical_call: maturity must be positive");
    const double k = std::log(1.0 / strike);
    const auto integrand = [&](double u) {
        const std::complex<double> a(u, -0.5);
        const std::complex<double> phi = classical_cf(p, a, maturity);
        const std::complex<double> e(std::cos(u * k), std::sin(u * k));
        return (e * phi).real() / (u * u + 0.25);
    };
    const double integral = adaptive_simpson(integrand, 0.0, u_max, 1e-12);
    return 1.0 - std::sqrt(strike) / 3.14159265358979323846 * integral;
}

// Flattened (strike-major) implied-vol surface.
inline std::vector<double> classical_surface_iv(const ClassicalHestonParams& p,
                                                const SmileGrid& grid) {
    grid.validate();
    std::vector<double> out(grid.n_cells());
    for (std::size_t ki = 0; ki < grid.strikes.size(); ++ki) {
        for (std::size_t ti = 0; ti < grid.maturities.size(); ++ti) {
            const double price = classical_call(p, grid.strikes[ki], grid.maturities[ti]);
            out[grid.flat_index(ki, ti)] = implied_vol(price, grid.strikes[ki], grid.maturities[ti]);
        }
    }
    return out;
}

}  // namespace rhcal
