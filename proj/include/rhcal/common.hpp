#pragma once

// Shared plumbing: error hierarchy, deterministic random streams, a small
// row-major matrix, a worker pool, and text formatting helpers.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <initializer_list>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rhcal {

// ---------------------------------------------------------------------------
// Errors. The CLI maps these onto process exit codes, so every failure in the
// library should be raised through one of them.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad inputs, bad configuration, malformed requests. Exit code 2.
struct ValidationError : Error {
    using Error::Error;
};

// A computation failed or left its guaranteed range. Exit code 3.
struct NumericError : Error {
    using Error::Error;
};

// Filesystem and parsing trouble. Exit code 4.
struct IoError : Error {
    using Error::Error;
};

// Raised when an iterative solve blows up; carries the offending step.
struct DivergenceError : NumericError {
    std::size_t step_index;
    DivergenceError(const std::string& msg, std::size_t step)
        : NumericError(msg + " (step " + std::to_string(step) + ")"), step_index(step) {}
};

// ---------------------------------------------------------------------------
// Deterministic randomness. All draws go through Rng so that streams do not
// depend on standard-library distribution internals.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Folds a label and indices into a base seed so that sub-streams (per block,
// per epoch, ...) are decoupled without sharing state.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(base ^ 0x5851f42d4c957f2dULL);
    for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p));
    return s;
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : s_{} {
        // SplitMix-expanded seeding of xoshiro256++ state.
        std::uint64_t x = seed;
        for (auto& w : s_) {
            x = splitmix64(x);
            w = x;
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1) with 53 usable bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; the spare is cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Unbiased integer in [0, n) by rejection.
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw ValidationError("uniform_index: empty range");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return static_cast<std::size_t>(x % n);
    }

    bool bernoulli_half() { return (next_u64() >> 63) != 0; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// In-place Fisher-Yates so shuffles do not depend on std::shuffle internals.
template <typename T>
void shuffle_inplace(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng.uniform_index(i);
        std::swap(v[i - 1], v[j]);
    }
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    shuffle_inplace(idx, rng);
    return idx;
}

// ---------------------------------------------------------------------------
// Matrix: dense row-major doubles, just enough for this library.
// ---------------------------------------------------------------------------

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double* row(std::size_t r) { return data.data() + r * cols; }
    const double* row(std::size_t r) const { return data.data() + r * cols; }

    std::vector<double> row_copy(std::size_t r) const {
        return std::vector<double>(row(r), row(r) + cols);
    }
};

// ---------------------------------------------------------------------------
// Worker pool. RHCAL_WORKERS overrides everything; otherwise a caller request,
// otherwise hardware concurrency.
// ---------------------------------------------------------------------------

inline unsigned worker_count(unsigned requested = 0) {
    if (const char* env = std::getenv("RHCAL_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<unsigned>(v);
    }
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

// Runs fn(i) for i in [0, n) on contiguous slabs. Results must be written by
// index so the outcome is independent of the worker count. The first thrown
// exception is rethrown on the caller thread.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned requested_workers = 0) {
    const unsigned workers = std::min<std::size_t>(worker_count(requested_workers), n ? n : 1);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// Number formatting: full precision for data (round-trip exact), short labels
// for grid coordinates.
// ---------------------------------------------------------------------------

inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Grid labels: "0.6", "1.0", "2.0" (integers keep one decimal).
inline std::string format_label(double v) {
    char buf[40];
    if (std::abs(v - std::round(v)) < 1e-12) {
        std::snprintf(buf, sizeof(buf), "%.1f", v);
    } else {
        std::snprintf(buf, sizeof(buf), "%g", v);
    }
    return buf;
}

inline double parse_double(const std::string& text, const std::string& where) {
    const char* begin = text.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || (end && *end != '\0')) {
        throw IoError(where + ": cannot parse number '" + text + "'");
    }
    return v;
}

inline std::vector<std::string> split_line(const std::string& line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

// FNV-1a, used to fingerprint datasets inside metadata files.
inline std::uint64_t fnv1a(const void* bytes, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace rhcal
