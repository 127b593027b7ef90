// Dataset generation, CSV persistence, and the seeded train/test split.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "rhcal/dataset.hpp"

using namespace rhcal;

namespace {

SmileGrid tiny_grid() {
    SmileGrid g;
    g.strikes = {0.8, 1.2};
    g.maturities = {0.5, 1.0};
    return g;
}

LabeledDataset tiny_dataset() { return generate(narrow_box(), 20, 9, tiny_grid()); }

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

std::string temp_path(const char* name) {
    return std::string("rhcal_test_dataset_") + name + ".csv";
}

// Locates each row of `part` inside `whole` by its first label column (rho is
// continuous, so values are distinct) and returns the original row indices.
std::vector<std::size_t> locate_rows(const LabeledDataset& part, const LabeledDataset& whole) {
    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < part.rows(); ++r) {
        bool found = false;
        for (std::size_t s = 0; s < whole.rows(); ++s) {
            if (whole.y.at(s, 0) == part.y.at(r, 0)) {
                idx.push_back(s);
                found = true;
                break;
            }
        }
        REQUIRE(found);
    }
    return idx;
}

}  // namespace

TEST_CASE("sampled parameters are deterministic and inside the box") {
    const auto box = narrow_box();
    const auto a = sample_params(box, 50, 4);
    const auto b = sample_params(box, 50, 4);
    REQUIRE(a.size() == 50);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto av = a[i].as_array();
        const auto bv = b[i].as_array();
        for (int j = 0; j < kNumParams; ++j) {
            CHECK(av[j] == bv[j]);
            CHECK(av[j] >= box.lo[j]);
            CHECK(av[j] <= box.hi[j]);
        }
    }
    const auto c = sample_params(box, 50, 5);
    CHECK(c[0].as_array()[0] != a[0].as_array()[0]);
}

TEST_CASE("generation is reproducible and labels stay inside the box") {
    const auto ds = tiny_dataset();
    REQUIRE(ds.rows() == 20);
    CHECK(ds.n_dropped == 0);
    CHECK(ds.x.cols == 4);
    CHECK(ds.y.cols == 6);
    const auto box = narrow_box();
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (int j = 0; j < kNumParams; ++j) {
            CHECK(ds.y.at(r, j) >= box.lo[j]);
            CHECK(ds.y.at(r, j) <= box.hi[j]);
        }
        for (std::size_t c = 0; c < ds.x.cols; ++c) {
            CHECK(ds.x.at(r, c) > 0.0);
            CHECK(ds.x.at(r, c) < 2.0);
        }
    }
    const auto again = tiny_dataset();
    CHECK(dataset_csv(ds) == dataset_csv(again));
    CHECK(dataset_hash(ds) == dataset_hash(again));
}

TEST_CASE("generation rejects an empty request") {
    CHECK_THROWS_AS(generate(narrow_box(), 0, 1, tiny_grid()), ValidationError);
}

TEST_CASE("a box below the Hurst pricing floor counts every row as clamped") {
    auto box = narrow_box();
    box.lo[5] = 0.0;
    box.hi[5] = 0.0005;
    const auto ds = generate(box, 5, 3, tiny_grid());
    CHECK(ds.n_h_clamped == ds.rows());
    const auto normal = tiny_dataset();
    CHECK(normal.n_h_clamped == 0);
}

TEST_CASE("save and load round-trip both data and metadata") {
    const auto ds = tiny_dataset();
    const auto path = temp_path("roundtrip");
    save(ds, path);

    const auto loaded = load(path);
    CHECK(dataset_csv(loaded) == dataset_csv(ds));
    CHECK(loaded.seed == ds.seed);
    CHECK(loaded.n_requested == ds.n_requested);
    CHECK(loaded.n_dropped == ds.n_dropped);
    CHECK(loaded.n_h_clamped == ds.n_h_clamped);
    for (int j = 0; j < kNumParams; ++j) {
        CHECK(loaded.box.lo[j] == ds.box.lo[j]);
        CHECK(loaded.box.hi[j] == ds.box.hi[j]);
    }
    CHECK(loaded.grid.strikes == ds.grid.strikes);
    CHECK(loaded.grid.maturities == ds.grid.maturities);

    const auto meta = slurp(path + ".meta");
    CHECK(meta.find("rhcal dataset-meta 1") == 0);
    CHECK(meta.find("hash " + hex64(dataset_hash(ds))) != std::string::npos);

    std::remove(path.c_str());
    std::remove((path + ".meta").c_str());
}

TEST_CASE("load rejects malformed files") {
    const auto path = temp_path("bad");
    const auto write = [&](const std::string& text) {
        std::ofstream f(path, std::ios::binary);
        f << text;
    };

    write("");
    CHECK_THROWS_AS(load(path), IoError);

    write("foo,v0,kappa,theta,nu,H,iv_K1.0_T1.0\n");
    CHECK_THROWS_AS(load(path), IoError);

    write("rho,v0,kappa,theta,nu,H,surface_K1.0_T1.0\n");
    CHECK_THROWS_AS(load(path), IoError);

    // Non-positive implied vol.
    write("rho,v0,kappa,theta,nu,H,iv_K1.0_T1.0\n-0.5,0.04,0.3,0.1,0.3,0.1,-0.2\n");
    CHECK_THROWS_AS(load(path), IoError);

    // Wrong field count in a data row.
    write("rho,v0,kappa,theta,nu,H,iv_K1.0_T1.0\n-0.5,0.04,0.3,0.1,0.3\n");
    CHECK_THROWS_AS(load(path), IoError);

    std::remove(path.c_str());
}

TEST_CASE("split sizes follow the rounded fraction and partition the rows") {
    const auto ds = tiny_dataset();
    const auto [train, test] = split(ds, 0.25, 7);
    CHECK(test.rows() == 5);   // round(20 * 0.25)
    CHECK(train.rows() == 15);

    const auto train_idx = locate_rows(train, ds);
    const auto test_idx = locate_rows(test, ds);
    CHECK(std::is_sorted(train_idx.begin(), train_idx.end()));
    CHECK(std::is_sorted(test_idx.begin(), test_idx.end()));

    std::vector<std::size_t> all = train_idx;
    all.insert(all.end(), test_idx.begin(), test_idx.end());
    std::sort(all.begin(), all.end());
    REQUIRE(all.size() == ds.rows());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);

    // Feature rows ride along with their labels.
    for (std::size_t r = 0; r < test.rows(); ++r) {
        for (std::size_t c = 0; c < ds.x.cols; ++c) {
            CHECK(test.x.at(r, c) == ds.x.at(test_idx[r], c));
        }
    }
}

TEST_CASE("split is seeded") {
    const auto ds = tiny_dataset();
    const auto [a_train, a_test] = split(ds, 0.25, 7);
    const auto [b_train, b_test] = split(ds, 0.25, 7);
    CHECK(dataset_csv(a_test) == dataset_csv(b_test));
    const auto [c_train, c_test] = split(ds, 0.25, 8);
    CHECK(dataset_csv(c_test) != dataset_csv(a_test));
}

TEST_CASE("split rejects degenerate fractions") {
    const auto ds = tiny_dataset();
    CHECK_THROWS_AS(split(ds, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(split(ds, 1.0, 1), ValidationError);
    CHECK_THROWS_AS(split(ds, 0.001, 1), ValidationError);  // rounds to zero test rows
}
