// Attribution methods against analytic oracles: a purely linear network where
// every method has a closed form, an exhaustive permutation oracle for exact
// Shapley values, and hand values for the aggregation helpers.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "rhcal/interpret.hpp"

using namespace rhcal;

namespace {

// ELU is the identity on positive pre-activations, so a network whose hidden
// biases are large enough to keep z1 positive for every probe is exactly
// linear: y_j = b2_j + sum_h (z1_h) w2_hj with z1 = x.W1 + b1.
FeedforwardNet linear_region_net(std::uint64_t seed) {
    FeedforwardNet net(6, 4, 3);
    net.init(seed);
    std::fill(net.b1.begin(), net.b1.end(), 10.0);
    Rng rng(derive_seed(seed, {5u}));
    for (auto& b : net.b2) b = rng.uniform(-0.2, 0.2);
    return net;
}

// Effective linear weight of input i on output j for that network.
double effective_weight(const FeedforwardNet& net, std::size_t i, std::size_t j) {
    double acc = 0.0;
    for (std::size_t h = 0; h < net.n_hidden; ++h) acc += net.w1.at(i, h) * net.w2.at(h, j);
    return acc;
}

std::vector<double> random_point(std::size_t n, std::uint64_t seed, double lo, double hi) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (auto& v : x) v = rng.uniform(lo, hi);
    return x;
}

ScalarFn net_output(const FeedforwardNet& net, int j) {
    return [&net, j](const std::vector<double>& v) {
        return forward(net, v).y[static_cast<std::size_t>(j)];
    };
}

// Exhaustive permutation-average Shapley oracle: marginal contributions along
// every ordering of the features. Structurally unrelated to the
// coalition-weight formula used by the production code.
std::vector<double> shapley_permutation_oracle(const ScalarFn& f, const std::vector<double>& x,
                                               const std::vector<double>& ref) {
    const std::size_t m = x.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> phi(m, 0.0);
    std::size_t count = 0;
    do {
        auto probe = ref;
        double prev = f(probe);
        for (const auto k : order) {
            probe[k] = x[k];
            const double cur = f(probe);
            phi[k] += cur - prev;
            prev = cur;
        }
        ++count;
    } while (std::next_permutation(order.begin(), order.end()));
    for (auto& v : phi) v /= static_cast<double>(count);
    return phi;
}

std::string temp_path(const char* name) {
    return std::string("rhcal_test_interpret_") + name + ".csv";
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("on a linear network every local method recovers weight times input") {
    const auto net = linear_region_net(1);
    const auto x = random_point(6, 2, -1.0, 1.0);
    const std::vector<double> zero(6, 0.0);

    for (int j = 0; j < 3; ++j) {
        const auto gi = gradient_input(net, x, j);
        const auto dl = deeplift_rescale(net, x, zero, j);
        REQUIRE(gi.phi.size() == 6);
        for (std::size_t i = 0; i < 6; ++i) {
            const double want = effective_weight(net, i, static_cast<std::size_t>(j)) * x[i];
            CHECK_THAT(gi.phi[i], Catch::Matchers::WithinAbs(want, 1e-10));
            CHECK_THAT(dl.phi[i], Catch::Matchers::WithinAbs(want, 1e-10));
        }
        const auto sh = shapley_exact(net_output(net, j), x, zero, j);
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK_THAT(sh.phi[i], Catch::Matchers::WithinAbs(gi.phi[i], 1e-9));
        }
    }
}

TEST_CASE("lime recovers the coefficients of a linear model") {
    const auto net = linear_region_net(3);
    const auto x = random_point(6, 4, -1.0, 1.0);
    const std::vector<double> zero(6, 0.0);
    LimeConfig cfg;
    cfg.n_samples = 4000;
    cfg.seed = 7;
    const auto res = lime_explain(net_output(net, 1), x, zero, 1, cfg);
    CHECK(res.method == "lime");
    for (std::size_t i = 0; i < 6; ++i) {
        const double want = effective_weight(net, i, 1) * x[i];
        CHECK_THAT(res.phi[i], Catch::Matchers::WithinAbs(want, 1e-7));
    }
    CHECK_THAT(res.weighted_r2, Catch::Matchers::WithinAbs(1.0, 1e-9));
    CHECK(res.local_pred_lo <= res.prediction + 1e-12);
    CHECK(res.local_pred_hi >= res.prediction - 1e-12);

    const auto again = lime_explain(net_output(net, 1), x, zero, 1, cfg);
    CHECK(res.phi == again.phi);

    LimeConfig starved;
    starved.n_samples = 5;
    CHECK_THROWS_AS(lime_explain(net_output(net, 1), x, zero, 1, starved), ValidationError);
    CHECK_THROWS_AS(lime_explain(net_output(net, 1), x, std::vector<double>(4, 0.0), 1, cfg),
                    ValidationError);
}

TEST_CASE("deeplift is complete on arbitrary networks") {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
        FeedforwardNet net(8, 5, 4);
        net.init(seed);
        Rng rng(derive_seed(seed, {9u}));
        for (auto& b : net.b1) b = rng.uniform(-0.5, 0.5);
        for (auto& b : net.b2) b = rng.uniform(-0.5, 0.5);
        const auto x = random_point(8, seed + 50, -2.0, 2.0);
        const auto base = random_point(8, seed + 90, -2.0, 2.0);
        for (int j = 0; j < 4; ++j) {
            const auto res = deeplift_rescale(net, x, base, j);
            const double total = std::accumulate(res.phi.begin(), res.phi.end(), 0.0);
            const double want = forward(net, x).y[static_cast<std::size_t>(j)] -
                                forward(net, base).y[static_cast<std::size_t>(j)];
            CHECK_THAT(total, Catch::Matchers::WithinAbs(want, 1e-10));
            CHECK_THAT(res.prediction - res.phi0, Catch::Matchers::WithinAbs(want, 1e-12));
        }
    }
}

TEST_CASE("the zero-baseline deeplift overload matches the explicit form") {
    FeedforwardNet net(5, 3, 2);
    net.init(11);
    const auto x = random_point(5, 12, -1.0, 1.0);
    const auto a = deeplift_rescale(net, x, 0);
    const auto b = deeplift_rescale(net, x, std::vector<double>(5, 0.0), 0);
    CHECK(a.phi == b.phi);
    CHECK(a.phi0 == b.phi0);
}

TEST_CASE("lrp with zero biases and no stabilizer conserves all relevance") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        FeedforwardNet net(7, 4, 3);
        net.init(seed);  // biases stay zero
        const auto x = random_point(7, seed + 30, 0.1, 1.5);
        for (int j = 0; j < 3; ++j) {
            const auto res = lrp_epsilon(net, x, j, 0.0);
            if (std::abs(res.prediction) < 1e-9) continue;  // conservation ratio ill-defined
            CHECK_THAT(res.absorbed_fraction, Catch::Matchers::WithinAbs(0.0, 1e-9));
            const double total = std::accumulate(res.phi.begin(), res.phi.end(), 0.0);
            CHECK_THAT(total, Catch::Matchers::WithinRel(res.prediction, 1e-9));
        }
    }
}

TEST_CASE("lrp equals gradient times input on a positive-weight linear slice") {
    // Positive weights and positive inputs keep every pre-activation in ELU's
    // identity region, where the epsilon-free LRP rule telescopes exactly.
    FeedforwardNet net(5, 3, 2);
    net.init(21);
    for (auto& v : net.w1.data) v = std::abs(v);
    for (auto& v : net.w2.data) v = std::abs(v);
    const auto x = random_point(5, 22, 0.1, 1.0);
    for (int j = 0; j < 2; ++j) {
        const auto lrp = lrp_epsilon(net, x, j, 0.0);
        const auto gi = gradient_input(net, x, j);
        for (std::size_t i = 0; i < 5; ++i) {
            CHECK_THAT(lrp.phi[i], Catch::Matchers::WithinAbs(gi.phi[i], 1e-10));
        }
    }
    CHECK_THROWS_AS(lrp_epsilon(net, x, 0, -1.0), ValidationError);
}

TEST_CASE("exact shapley matches the exhaustive permutation oracle") {
    const ScalarFn f = [](const std::vector<double>& v) {
        return v[0] * v[1] + std::sin(v[2]) + 0.5 * v[3] * v[3] - 0.3 * v[4] * v[0];
    };
    const auto x = random_point(5, 41, -1.0, 1.0);
    const auto ref = random_point(5, 42, -1.0, 1.0);
    const auto got = shapley_exact(f, x, ref);
    const auto want = shapley_permutation_oracle(f, x, ref);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK_THAT(got.phi[i], Catch::Matchers::WithinAbs(want[i], 1e-10));
    }
    CHECK(got.phi0 == f(ref));
    CHECK(got.prediction == f(x));
}

TEST_CASE("exact shapley satisfies efficiency, dummy, and symmetry") {
    const ScalarFn f = [](const std::vector<double>& v) {
        // Symmetric in v0 and v1; ignores v5 entirely.
        return v[0] * v[1] + v[0] + v[1] + std::cos(v[2]) + 0.2 * v[3] * v[4];
    };
    auto x = random_point(6, 43, -1.0, 1.0);
    auto ref = random_point(6, 44, -1.0, 1.0);
    x[1] = x[0];
    ref[1] = ref[0];
    const auto res = shapley_exact(f, x, ref);

    const double total = std::accumulate(res.phi.begin(), res.phi.end(), 0.0);
    CHECK_THAT(total, Catch::Matchers::WithinAbs(f(x) - f(ref), 1e-10));  // efficiency
    CHECK_THAT(res.phi[5], Catch::Matchers::WithinAbs(0.0, 1e-12));       // dummy
    CHECK_THAT(res.phi[0], Catch::Matchers::WithinAbs(res.phi[1], 1e-12));  // symmetry
}

TEST_CASE("exact shapley validates its inputs") {
    const ScalarFn f = [](const std::vector<double>& v) { return v[0]; };
    CHECK_THROWS_AS(shapley_exact(f, {}, {}), ValidationError);
    CHECK_THROWS_AS(shapley_exact(f, {1.0}, {1.0, 2.0}), ValidationError);
    CHECK_THROWS_AS(shapley_exact(f, std::vector<double>(13, 0.0), std::vector<double>(13, 0.0)),
                    ValidationError);
}

TEST_CASE("sampled shapley converges to the exact values and is seeded") {
    const ScalarFn f = [](const std::vector<double>& v) {
        return v[0] * v[1] - 0.5 * v[2] + 0.25 * v[3] * v[3];
    };
    const auto x = random_point(4, 45, -1.0, 1.0);
    const auto ref = random_point(4, 46, -1.0, 1.0);
    const auto exact = shapley_exact(f, x, ref);
    const auto approx = shapley_sampled(f, x, ref, 2000, 9);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK_THAT(approx.phi[i], Catch::Matchers::WithinAbs(exact.phi[i], 0.02));
    }
    const auto again = shapley_sampled(f, x, ref, 2000, 9);
    CHECK(approx.phi == again.phi);
    CHECK_THROWS_AS(shapley_sampled(f, x, ref, 0, 9), ValidationError);
}

TEST_CASE("background-averaged attribution is additive and tagged shap") {
    FeedforwardNet net(6, 4, 3);
    net.init(31);
    Rng rng(32);
    Matrix background(5, 6), instances(3, 6);
    for (auto& v : background.data) v = rng.uniform(-1.0, 1.0);
    for (auto& v : instances.data) v = rng.uniform(-1.0, 1.0);

    const auto results = shapley_global(net, background, instances, 2);
    REQUIRE(results.size() == 3);
    double mean_background = 0.0;
    for (std::size_t b = 0; b < background.rows; ++b) {
        mean_background += forward(net, background.row_copy(b)).y[2];
    }
    mean_background /= static_cast<double>(background.rows);

    for (std::size_t r = 0; r < results.size(); ++r) {
        const auto& res = results[r];
        CHECK(res.method == "shap");
        CHECK(res.instance == r);
        CHECK_THAT(res.phi0, Catch::Matchers::WithinAbs(mean_background, 1e-12));
        const double total = std::accumulate(res.phi.begin(), res.phi.end(), 0.0);
        CHECK_THAT(total, Catch::Matchers::WithinAbs(res.prediction - res.phi0, 1e-9));
    }

    const auto serial = shapley_global(net, background, instances, 2, 1);
    const auto parallel = shapley_global(net, background, instances, 2, 3);
    for (std::size_t r = 0; r < serial.size(); ++r) CHECK(serial[r].phi == parallel[r].phi);

    Matrix empty(0, 6);
    CHECK_THROWS_AS(shapley_global(net, empty, instances, 0), ValidationError);
    Matrix narrow_cols(2, 5);
    CHECK_THROWS_AS(shapley_global(net, narrow_cols, instances, 0), ValidationError);
}

TEST_CASE("heat-map aggregation averages absolute attributions per cell") {
    SmileGrid grid;
    grid.strikes = {0.8, 1.0, 1.4};
    grid.maturities = {0.5, 1.0};

    AttributionResult a, b;
    a.method = b.method = "deeplift";
    a.phi = {1.0, -2.0, 3.0, -4.0, 5.0, 6.0};
    b.phi = {2.0, -2.0, 2.0, -2.0, 2.0, 2.0};
    const auto map = aggregate_heatmap({a, b}, grid);
    CHECK(map.n_instances == 2);
    CHECK_THAT(map.at_cell(0, 0), Catch::Matchers::WithinAbs(1.5, 1e-15));
    CHECK_THAT(map.at_cell(0, 1), Catch::Matchers::WithinAbs(2.0, 1e-15));
    CHECK_THAT(map.at_cell(1, 0), Catch::Matchers::WithinAbs(2.5, 1e-15));
    CHECK_THAT(map.at_cell(1, 1), Catch::Matchers::WithinAbs(3.0, 1e-15));
    CHECK_THAT(map.at_cell(2, 0), Catch::Matchers::WithinAbs(3.5, 1e-15));
    CHECK_THAT(map.at_cell(2, 1), Catch::Matchers::WithinAbs(4.0, 1e-15));

    AttributionResult other = b;
    other.method = "lrp";
    CHECK_THROWS_AS(aggregate_heatmap({a, other}, grid), ValidationError);
    AttributionResult short_phi = b;
    short_phi.phi.resize(4);
    CHECK_THROWS_AS(aggregate_heatmap({a, short_phi}, grid), ValidationError);
    CHECK_THROWS_AS(aggregate_heatmap({}, grid), ValidationError);
}

TEST_CASE("cell ranking sorts descending and keeps grid coordinates") {
    SmileGrid grid;
    grid.strikes = {0.8, 1.0};
    grid.maturities = {0.5, 1.0};
    AttributionResult a;
    a.method = "shap";
    a.phi = {0.5, 0.1, 0.9, 0.5};
    const auto ranked = rank_cells(aggregate_heatmap({a}, grid));
    REQUIRE(ranked.size() == 4);
    CHECK(ranked[0].value == 0.9);
    CHECK(ranked[0].strike == 1.0);
    CHECK(ranked[0].maturity == 0.5);
    CHECK(ranked[0].flat_index == 2);
    // Tie between flat cells 0 and 3: stable sort keeps flat order.
    CHECK(ranked[1].flat_index == 0);
    CHECK(ranked[2].flat_index == 3);
    CHECK(ranked[3].value == 0.1);
}

TEST_CASE("spearman matches hand values and handles ties") {
    CHECK_THAT(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), Catch::Matchers::WithinAbs(-1.0, 1e-12));
    CHECK_THAT(spearman({1, 2, 3, 4}, {1, 3, 2, 4}), Catch::Matchers::WithinAbs(0.8, 1e-12));
    CHECK_THAT(spearman({1, 1, 2, 3}, {1, 2, 3, 4}),
               Catch::Matchers::WithinAbs(3.0 / std::sqrt(10.0), 1e-12));
    CHECK_THROWS_AS(spearman({1, 2}, {1, 2, 3}), ValidationError);
    CHECK_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), ValidationError);
}

TEST_CASE("attribution and heat-map CSVs have the promised shape") {
    SmileGrid grid;
    grid.strikes = {0.8, 1.0};
    grid.maturities = {0.5, 1.0};
    AttributionResult a;
    a.method = "deeplift";
    a.output = 2;
    a.instance = 7;
    a.phi = {0.25, -0.5, 0.125, 1.0};

    const auto attr_path = temp_path("attr");
    save_attributions({a}, grid, attr_path);
    const auto attr = slurp(attr_path);
    CHECK(attr.find("method,output_param,instance,K0.8_T0.5,K0.8_T1.0,K1.0_T0.5,K1.0_T1.0\n") == 0);
    CHECK(attr.find("deeplift,kappa,7,0.25,-0.5,0.125,1\n") != std::string::npos);

    const auto map_path = temp_path("map");
    save_heatmap(aggregate_heatmap({a}, grid), map_path);
    const auto map = slurp(map_path);
    CHECK(map.find("strike,T0.5,T1.0\n") == 0);
    CHECK(map.find("K0.8,0.25,0.5\n") != std::string::npos);
    CHECK(map.find("K1.0,0.125,1\n") != std::string::npos);

    std::remove(attr_path.c_str());
    std::remove(map_path.c_str());
}
