#pragma once

// Fractional Riccati-Volterra solver for the rough Heston characteristic
// function.
//
// With alpha = H + 1/2, the log-spot characteristic function is
//
//   phi_T(a) = exp( theta * kappa * I^1 psi(T) + V_0 * I^(1-alpha) psi(T) )
//
// where psi solves psi = I^alpha F(a, psi), psi(0) = 0, and
//
//   F(a, x) = -1/2 a (a + i) + kappa (i a rho nu - 1) x + 1/2 (kappa nu)^2 x^2.
//
// psi is advanced with the fractional Adams predictor-corrector on a uniform
// grid; the two running integrals use product-trapezoidal weights on the same
// grid. At H = 1/2 (alpha = 1) every weight family collapses to the classical
// rectangle/trapezoid rules and the scheme reduces to an ODE integrator.
//
// The corrector is implicit: because F is quadratic in psi, the corrector
// equation is a scalar quadratic and is solved exactly, picking the root
// nearest the predictor. A single explicit evaluation of the corrector is
// unstable for |a| of a few hundred once alpha drops toward 1/2 and
// kappa * nu is large, which wide sampling boxes do reach; the exact root
// costs the same and is stable there.

#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "rhcal/common.hpp"
#include "rhcal/params.hpp"

namespace rhcal {

struct RiccatiSolution {
    double dt = 0.0;
    double alpha = 0.0;
    // All paths have n_steps + 1 entries and share the grid t_k = k * dt.
    std::vector<std::complex<double>> psi;
    std::vector<std::complex<double>> running_i1;    // I^1 psi
    std::vector<std::complex<double>> running_i1ma;  // I^(1-alpha) psi
};

namespace detail {

// Quadrature weights for one (alpha, dt, n) combination; shared across the
// frequency nodes of a surface evaluation.
struct FracWeights {
    double alpha = 0.0;
    double dt = 0.0;
    int n = 0;
    // Predictor: psi^P_{k+1} = sum_j bw[k+1-j] f_j,
    // bw[l] = dt^alpha (l^alpha - (l-1)^alpha) / Gamma(alpha+1).
    std::vector<double> bw;
    // Corrector lag weights for 1 <= j <= k (lag m = k - j):
    // cw[m] = (m+2)^(alpha+1) + m^(alpha+1) - 2 (m+1)^(alpha+1).
    std::vector<double> cw;
    // Corrector boundary weight for j = 0 at step k+1:
    // a0[k] = k^(alpha+1) - (k - alpha) (k+1)^alpha.
    std::vector<double> a0;
    double corr_scale = 0.0;  // dt^alpha / Gamma(alpha+2)
    // Product-trapezoid weights for I^(1-alpha) (gamma = 1 - alpha):
    // cpt[l] = (l+1)^(gamma+1) + (l-1)^(gamma+1) - 2 l^(gamma+1), l >= 1,
    // boundary a0g[m] = (m-1)^(gamma+1) - (m-1-gamma) m^gamma.
    double gamma_exp = 0.0;
    std::vector<double> cpt;
    std::vector<double> a0g;
    double i1ma_scale = 0.0;  // dt^gamma / Gamma(gamma+2)
};

inline FracWeights make_frac_weights(double alpha, double dt, int n) {
    FracWeights w;
    w.alpha = alpha;
    w.dt = dt;
    w.n = n;
    const double ga1 = std::tgamma(alpha + 1.0);
    const double ga2 = std::tgamma(alpha + 2.0);
    const double dta = std::pow(dt, alpha);
    w.corr_scale = dta / ga2;

    std::vector<double> pa(n + 2), pa1(n + 2);  // l^alpha, l^(alpha+1)
    for (int l = 0; l <= n + 1; ++l) {
        pa[l] = std::pow(static_cast<double>(l), alpha);
        pa1[l] = std::pow(static_cast<double>(l), alpha + 1.0);
    }
    w.bw.resize(n + 1, 0.0);
    for (int l = 1; l <= n; ++l) w.bw[l] = dta * (pa[l] - pa[l - 1]) / ga1;
    w.cw.resize(n + 1, 0.0);
    for (int m = 0; m <= n - 1; ++m) w.cw[m] = pa1[m + 2] + pa1[m] - 2.0 * pa1[m + 1];
    w.a0.resize(n, 0.0);
    for (int k = 0; k < n; ++k) w.a0[k] = pa1[k] - (k - alpha) * pa[k + 1];

    const double g = 1.0 - alpha;
    w.gamma_exp = g;
    if (g > 1e-14) {
        const double gg2 = std::tgamma(g + 2.0);
        w.i1ma_scale = std::pow(dt, g) / gg2;
        std::vector<double> pg(n + 2), pg1(n + 2);  // l^gamma, l^(gamma+1)
        for (int l = 0; l <= n + 1; ++l) {
            pg[l] = std::pow(static_cast<double>(l), g);
            pg1[l] = std::pow(static_cast<double>(l), g + 1.0);
        }
        w.cpt.resize(n + 1, 0.0);
        for (int l = 1; l <= n; ++l) w.cpt[l] = pg1[l + 1] + pg1[l - 1] - 2.0 * pg1[l];
        w.a0g.resize(n + 1, 0.0);
        for (int m = 1; m <= n; ++m) w.a0g[m] = pg1[m - 1] - (m - 1 - g) * pg[m];
    }
    return w;
}

// Advances psi and fills the running integrals. Split real/imaginary arrays
// keep the convolution loops simple enough for the compiler to vectorize.
inline RiccatiSolution solve_riccati_ws(const RoughHestonParams& p, std::complex<double> a,
                                        const FracWeights& w) {
    const int n = w.n;
    const double dt = w.dt;

    // F(a, x) = c0 + c1 x + c2 x^2
    const std::complex<double> ii(0.0, 1.0);
    const std::complex<double> c0 = -0.5 * a * (a + ii);
    const std::complex<double> c1 = p.kappa * (ii * a * p.rho * p.nu - 1.0);
    const double c2 = 0.5 * p.kappa * p.kappa * p.nu * p.nu;

    const double c0r = c0.real(), c0i = c0.imag();
    const double c1r = c1.real(), c1i = c1.imag();

    std::vector<double> psr(n + 1, 0.0), psi_im(n + 1, 0.0);
    std::vector<double> fr(n + 1, 0.0), fi(n + 1, 0.0);
    fr[0] = c0r;
    fi[0] = c0i;

    const auto eval_f = [&](double xr, double xi, double& outr, double& outi) {
        const double x2r = xr * xr - xi * xi;
        const double x2i = 2.0 * xr * xi;
        outr = c0r + c1r * xr - c1i * xi + c2 * x2r;
        outi = c0i + c1r * xi + c1i * xr + c2 * x2i;
    };

    for (int k = 0; k < n; ++k) {
        // Predictor.
        double pr = 0.0, pi = 0.0;
        {
            const double* bw = w.bw.data();
            for (int j = 0; j <= k; ++j) {
                const double b = bw[k + 1 - j];
                pr += b * fr[j];
                pi += b * fi[j];
            }
        }
        // Corrector history term (weights for f_0 .. f_k).
        double sr = w.a0[k] * fr[0];
        double si = w.a0[k] * fi[0];
        {
            const double* cw = w.cw.data();
            for (int j = 1; j <= k; ++j) {
                const double c = cw[k - j];
                sr += c * fr[j];
                si += c * fi[j];
            }
        }

        // Solve psi = hist + s F(psi) exactly:
        // (s c2) psi^2 + (s c1 - 1) psi + (hist + s c0) = 0.
        const double s = w.corr_scale;
        const std::complex<double> hist(s * sr, s * si);
        const std::complex<double> predictor(pr, pi);
        const std::complex<double> qa = s * c2;
        const std::complex<double> qb = s * c1 - 1.0;
        const std::complex<double> qc = hist + s * c0;
        std::complex<double> next;
        if (std::abs(qa) < 1e-30) {
            next = -qc / qb;
        } else {
            std::complex<double> sq = std::sqrt(qb * qb - 4.0 * qa * qc);
            // Stable variant: make b and the root of the discriminant add
            // constructively, then get the partner root from the product.
            if ((std::conj(qb) * sq).real() < 0.0) sq = -sq;
            const std::complex<double> r1 = -0.5 * (qb + sq) / qa;
            const std::complex<double> r2 = qc / (qa * r1);
            next = std::abs(r1 - predictor) <= std::abs(r2 - predictor) ? r1 : r2;
        }

        const double xr = next.real();
        const double xi = next.imag();
        if (!std::isfinite(xr) || !std::isfinite(xi) || xr * xr + xi * xi > 1e16) {
            throw DivergenceError("fractional Riccati solve diverged", static_cast<std::size_t>(k + 1));
        }
        psr[k + 1] = xr;
        psi_im[k + 1] = xi;
        eval_f(xr, xi, fr[k + 1], fi[k + 1]);
    }

    RiccatiSolution sol;
    sol.dt = dt;
    sol.alpha = w.alpha;
    sol.psi.resize(n + 1);
    sol.running_i1.resize(n + 1);
    sol.running_i1ma.resize(n + 1);

    sol.psi[0] = {0.0, 0.0};
    sol.running_i1[0] = {0.0, 0.0};
    sol.running_i1ma[0] = {0.0, 0.0};

    double i1r = 0.0, i1i = 0.0;
    for (int k = 1; k <= n; ++k) {
        sol.psi[k] = {psr[k], psi_im[k]};
        i1r += 0.5 * dt * (psr[k - 1] + psr[k]);
        i1i += 0.5 * dt * (psi_im[k - 1] + psi_im[k]);
        sol.running_i1[k] = {i1r, i1i};
    }

    if (w.gamma_exp <= 1e-14) {
        // alpha = 1: I^0 is the identity.
        for (int k = 1; k <= n; ++k) sol.running_i1ma[k] = sol.psi[k];
    } else {
        for (int m = 1; m <= n; ++m) {
            double accr = w.a0g[m] * psr[0] + psr[m];
            double acci = w.a0g[m] * psi_im[0] + psi_im[m];
            const double* cpt = w.cpt.data();
            for (int j = 1; j <= m - 1; ++j) {
                const double c = cpt[m - j];
                accr += c * psr[j];
                acci += c * psi_im[j];
            }
            sol.running_i1ma[m] = {w.i1ma_scale * accr, w.i1ma_scale * acci};
        }
    }
    return sol;
}

}  // namespace detail

// Default floor keeping the kernel exponent strictly above 1/2 when a box
// admits H = 0. Use of the floor is surfaced through VolSurface::h_clamped.
constexpr double kHurstFloor = 1e-3;

inline double pricing_alpha(const RoughHestonParams& p, double h_floor = kHurstFloor) {
    return 0.5 + std::max(p.h, h_floor);
}

inline RiccatiSolution solve_riccati(const RoughHestonParams& p, std::complex<double> a,
                                     double horizon, int n_steps, double h_floor = kHurstFloor) {
    p.validate();
    if (!(horizon > 0.0)) throw ValidationError("solve_riccati: horizon must be positive");
    if (n_steps < 1) throw ValidationError("solve_riccati: need at least one step");
    const double alpha = pricing_alpha(p, h_floor);
    const auto w = detail::make_frac_weights(alpha, horizon / n_steps, n_steps);
    return detail::solve_riccati_ws(p, a, w);
}

}  // namespace rhcal
