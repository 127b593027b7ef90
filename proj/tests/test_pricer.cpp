// Fourier pricer: classical-model agreement at H = 0.5, quadrature
// convergence, price bands, and regression locks on pinned values.

#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "rhcal/heston_classical.hpp"
#include "rhcal/pricer.hpp"

using namespace rhcal;

namespace {

RoughHestonParams box_midpoint(const ParameterBox& b) {
    std::array<double, kNumParams> a{};
    for (int j = 0; j < kNumParams; ++j) a[j] = 0.5 * (b.lo[j] + b.hi[j]);
    return RoughHestonParams::from_array(a);
}

}  // namespace

TEST_CASE("pricer config validation") {
    PricerConfig cfg;
    cfg.validate();
    cfg.n_nodes = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.u_max = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.steps_per_year = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = {};
    cfg.h_floor = 0.6;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("pinned price regression at the narrow-box midpoint") {
    const auto mid = box_midpoint(narrow_box());
    CHECK_THAT(call_price(mid, 1.0, 1.0, {}),
               Catch::Matchers::WithinAbs(0.097771518804644103, 1e-9));
}

TEST_CASE("pinned price regression at the wide-box midpoint") {
    const auto mid = box_midpoint(wide_box());
    CHECK_THAT(call_price(mid, 0.9, 1.5, {}),
               Catch::Matchers::WithinAbs(0.18593247507756921, 1e-9));
}

TEST_CASE("quadrature is converged at the default node count") {
    const auto mid = box_midpoint(narrow_box());
    const double base = call_price(mid, 1.0, 1.0, {});
    PricerConfig more;
    more.n_nodes = 320;
    CHECK_THAT(call_price(mid, 1.0, 1.0, more), Catch::Matchers::WithinAbs(base, 1e-9));
}

TEST_CASE("time discretization is converged to solver accuracy") {
    const auto mid = box_midpoint(narrow_box());
    const double base = call_price(mid, 1.0, 1.0, {});
    PricerConfig finer;
    finer.steps_per_year = 400;
    CHECK_THAT(call_price(mid, 1.0, 1.0, finer), Catch::Matchers::WithinAbs(base, 1e-5));
}

TEST_CASE("prices respect static no-arbitrage bounds and strike monotonicity") {
    const auto mid = box_midpoint(narrow_box());
    double prev = 1.0;
    for (double strike : {0.6, 0.8, 1.0, 1.2, 1.4}) {
        const double p = call_price(mid, strike, 1.2, {});
        CHECK(p > std::max(1.0 - strike, 0.0));
        CHECK(p < 1.0);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("call prices increase with maturity at the money") {
    const auto mid = box_midpoint(narrow_box());
    double prev = 0.0;
    for (double t : {0.6, 1.0, 1.5, 2.0}) {
        const double p = call_price(mid, 1.0, t, {});
        CHECK(p > prev);
        prev = p;
    }
}

TEST_CASE("H = 0.5 surface matches the closed-form classical pipeline") {
    auto p = box_midpoint(narrow_box());
    p.h = 0.5;
    SmileGrid g;
    g.strikes = {0.6, 1.0, 1.4};
    g.maturities = {0.6, 2.0};
    const auto surf = surface(p, g, {});
    const auto classical = classical_surface_iv(classical_from_rough(p), g);
    REQUIRE(surf.vols.size() == classical.size());
    for (std::size_t i = 0; i < classical.size(); ++i) {
        CHECK_THAT(surf.vols[i], Catch::Matchers::WithinAbs(classical[i], 1e-3));
    }
    CHECK_FALSE(surf.h_clamped);
}

TEST_CASE("surface flags Hurst clamping below the floor") {
    auto p = box_midpoint(wide_box());
    p.h = 0.0;
    SmileGrid g;
    g.strikes = {0.9, 1.1};
    g.maturities = {1.0};
    const auto surf = surface(p, g, {});
    CHECK(surf.h_clamped);
    for (const double v : surf.vols) {
        CHECK(v > 0.0);
        CHECK(v < 2.0);
    }
}

TEST_CASE("surface cells agree with single-price calls") {
    const auto mid = box_midpoint(narrow_box());
    SmileGrid g;
    g.strikes = {0.8, 1.2};
    g.maturities = {0.9, 1.8};
    const auto surf = surface(mid, g, {});
    for (std::size_t k = 0; k < g.strikes.size(); ++k) {
        for (std::size_t t = 0; t < g.maturities.size(); ++t) {
            const double priced = call_price(mid, g.strikes[k], g.maturities[t], {});
            const double from_surface =
                bs_call(surf.vols[g.flat_index(k, t)], g.strikes[k], g.maturities[t]);
            // The shared-solve surface uses one uniform time grid for all
            // maturities, so tiny discretization differences are expected.
            CHECK_THAT(from_surface, Catch::Matchers::WithinAbs(priced, 1e-6));
        }
    }
}

TEST_CASE("pricing is deterministic") {
    const auto mid = box_midpoint(wide_box());
    CHECK(call_price(mid, 1.1, 0.8, {}) == call_price(mid, 1.1, 0.8, {}));
}
