#pragma once

// Feature preprocessing: per-column scaling (min-max to [0,1] or
// standardization) optionally followed by ZCA whitening. Statistics are fit on
// training features only; the fitted transform is then applied verbatim to any
// other matrix with the same columns.
//
// ZCA: with column means m and covariance C = (X-m)^T (X-m) / n (population
// normalization), the whitening matrix is W = U diag(1/sqrt(lambda)) U^T from
// the eigendecomposition C = U diag(lambda) U^T. Eigenvalues below
// 1e-10 * lambda_max are floored to that threshold (count reported) so nearly
// collinear features cannot blow up the transform. Whitened output is
// (x - m) W, which has identity covariance (population normalization) when no
// eigenvalue was floored.

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rhcal/common.hpp"

namespace rhcal {

enum class ScalerKind { MinMax01, Standardize };

inline std::string scaler_name(ScalerKind k) {
    return k == ScalerKind::MinMax01 ? "minmax01" : "standardize";
}

inline ScalerKind scaler_from_name(const std::string& s) {
    if (s == "minmax01") return ScalerKind::MinMax01;
    if (s == "standardize") return ScalerKind::Standardize;
    throw ValidationError("unknown scaler '" + s + "' (use minmax01 or standardize)");
}

struct FeatureTransform {
    ScalerKind kind = ScalerKind::MinMax01;
    bool whiten = true;
    // Per-column scaling statistics: (min, max) for minmax01, (mean, sd) for
    // standardize. Scaled value is (x - stat_a) / (stat_b - stat_a) resp.
    // (x - stat_a) / stat_b.
    std::vector<double> stat_a, stat_b;
    // Whitening stage (empty when whiten == false).
    std::vector<double> zca_mean;  // column means of the scaled training data
    Matrix zca;                    // d x d symmetric whitening matrix
    int n_floored = 0;             // eigenvalues lifted to the floor

    std::size_t cols() const { return stat_a.size(); }

    double scale_one(std::size_t j, double v) const {
        return kind == ScalerKind::MinMax01 ? (v - stat_a[j]) / (stat_b[j] - stat_a[j])
                                            : (v - stat_a[j]) / stat_b[j];
    }
};

// Population covariance (divide by n) of the columns of x.
inline Matrix covariance_matrix(const Matrix& x) {
    const std::size_t n = x.rows, d = x.cols;
    if (n < 2) throw ValidationError("covariance: need at least two rows");
    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) mean[c] += x.at(r, c);
    for (auto& m : mean) m /= static_cast<double>(n);
    Matrix cov(d, d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = x.at(r, i) - mean[i];
            for (std::size_t j = i; j < d; ++j) cov.at(i, j) += xi * (x.at(r, j) - mean[j]);
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov.at(i, j) /= static_cast<double>(n);
            cov.at(j, i) = cov.at(i, j);
        }
    return cov;
}

inline Matrix correlation_matrix(const Matrix& x) {
    auto cov = covariance_matrix(x);
    const std::size_t d = cov.rows;
    std::vector<double> sd(d);
    for (std::size_t i = 0; i < d; ++i) {
        sd[i] = std::sqrt(cov.at(i, i));
        if (!(sd[i] > 0.0)) {
            throw ValidationError("correlation: column " + std::to_string(i) + " is constant");
        }
    }
    Matrix corr(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) corr.at(i, j) = cov.at(i, j) / (sd[i] * sd[j]);
    return corr;
}

inline FeatureTransform fit_transform(const Matrix& x, ScalerKind kind, bool whiten,
                                      double eigen_floor_rel = 1e-10) {
    const std::size_t n = x.rows, d = x.cols;
    if (n < 2) throw ValidationError("fit_transform: need at least two rows");
    FeatureTransform t;
    t.kind = kind;
    t.whiten = whiten;
    t.stat_a.resize(d);
    t.stat_b.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        if (kind == ScalerKind::MinMax01) {
            double lo = x.at(0, j), hi = lo;
            for (std::size_t r = 1; r < n; ++r) {
                lo = std::min(lo, x.at(r, j));
                hi = std::max(hi, x.at(r, j));
            }
            if (!(hi - lo > 0.0)) {
                throw ValidationError("fit_transform: column " + std::to_string(j) +
                                      " is constant; min-max scale undefined");
            }
            t.stat_a[j] = lo;
            t.stat_b[j] = hi;
        } else {
            double mean = 0.0;
            for (std::size_t r = 0; r < n; ++r) mean += x.at(r, j);
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double dlt = x.at(r, j) - mean;
                var += dlt * dlt;
            }
            var /= static_cast<double>(n);
            const double sd = std::sqrt(var);
            if (!(sd > 0.0)) {
                throw ValidationError("fit_transform: column " + std::to_string(j) +
                                      " is constant; standardization undefined");
            }
            t.stat_a[j] = mean;
            t.stat_b[j] = sd;
        }
    }
    if (!whiten) return t;

    // Scale, then whiten the scaled data.
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j)
            xs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
                t.scale_one(j, x.at(r, j));
    const Eigen::RowVectorXd mean = xs.colwise().mean();
    xs.rowwise() -= mean;
    const Eigen::MatrixXd cov = (xs.transpose() * xs) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw NumericError("fit_transform: eigendecomposition failed");
    const Eigen::VectorXd& lam = es.eigenvalues();
    const double floor = eigen_floor_rel * lam.maxCoeff();
    if (!(floor > 0.0)) throw NumericError("fit_transform: covariance has no positive eigenvalue");
    Eigen::VectorXd inv_sqrt(lam.size());
    t.n_floored = 0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        double l = lam(i);
        if (l < floor) {
            l = floor;
            ++t.n_floored;
        }
        inv_sqrt(i) = 1.0 / std::sqrt(l);
    }
    const Eigen::MatrixXd w =
        es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();

    t.zca_mean.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) t.zca_mean[j] = mean(static_cast<Eigen::Index>(j));
    t.zca = Matrix(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            t.zca.at(i, j) = w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return t;
}

inline Matrix apply_transform(const FeatureTransform& t, const Matrix& x) {
    const std::size_t n = x.rows, d = x.cols;
    if (d != t.cols()) {
        throw ValidationError("apply_transform: matrix has " + std::to_string(d) +
                              " columns, transform expects " + std::to_string(t.cols()));
    }
    Matrix out(n, d);
    std::vector<double> scaled(d);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) scaled[j] = t.scale_one(j, x.at(r, j));
        if (!t.whiten) {
            for (std::size_t j = 0; j < d; ++j) out.at(r, j) = scaled[j];
            continue;
        }
        for (std::size_t j = 0; j < d; ++j) scaled[j] -= t.zca_mean[j];
        for (std::size_t j = 0; j < d; ++j) {
            double acc = 0.0;
            const double* wrow = t.zca.row(j);
            for (std::size_t k = 0; k < d; ++k) acc += scaled[k] * wrow[k];
            out.at(r, j) = acc;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Text persistence (full-precision, line oriented).
// ---------------------------------------------------------------------------

inline void save_transform(const FeatureTransform& t, const std::string& path) {
    std::ostringstream os;
    os << "rhcal transform 1\n";
    os << "kind " << scaler_name(t.kind) << '\n';
    os << "whiten " << (t.whiten ? 1 : 0) << '\n';
    os << "cols " << t.cols() << '\n';
    os << "floored " << t.n_floored << '\n';
    const auto row = [&os](const std::string& key, const std::vector<double>& v) {
        os << key;
        for (double d : v) os << ' ' << format_full(d);
        os << '\n';
    };
    row("stat_a", t.stat_a);
    row("stat_b", t.stat_b);
    if (t.whiten) {
        row("zca_mean", t.zca_mean);
        for (std::size_t i = 0; i < t.zca.rows; ++i) {
            os << "zca_row " << i;
            for (std::size_t j = 0; j < t.zca.cols; ++j) os << ' ' << format_full(t.zca.at(i, j));
            os << '\n';
        }
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_transform: cannot open " + path);
    f << os.str();
    if (!f) throw IoError("save_transform: write failed for " + path);
}

inline FeatureTransform load_transform(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_transform: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "rhcal transform 1") {
        throw IoError(path + ": not a transform file");
    }
    FeatureTransform t;
    std::size_t cols = 0;
    const auto read_vec = [&](std::istringstream& is, std::vector<double>& v) {
        v.resize(cols);
        for (std::size_t j = 0; j < cols; ++j) {
            if (!(is >> v[j])) throw IoError(path + ": truncated vector line");
        }
    };
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string key;
        is >> key;
        if (key == "kind") {
            std::string s;
            is >> s;
            t.kind = scaler_from_name(s);
        } else if (key == "whiten") {
            int w = 0;
            is >> w;
            t.whiten = w != 0;
        } else if (key == "cols") {
            is >> cols;
        } else if (key == "floored") {
            is >> t.n_floored;
        } else if (key == "stat_a") {
            read_vec(is, t.stat_a);
        } else if (key == "stat_b") {
            read_vec(is, t.stat_b);
        } else if (key == "zca_mean") {
            read_vec(is, t.zca_mean);
        } else if (key == "zca_row") {
            std::size_t i = 0;
            is >> i;
            if (t.zca.rows != cols) t.zca = Matrix(cols, cols);
            if (i >= cols) throw IoError(path + ": zca_row index out of range");
            for (std::size_t j = 0; j < cols; ++j) {
                if (!(is >> t.zca.at(i, j))) throw IoError(path + ": truncated zca_row");
            }
        } else {
            throw IoError(path + ": unknown key '" + key + "'");
        }
    }
    if (t.stat_a.size() != cols || t.stat_b.size() != cols) {
        throw IoError(path + ": incomplete transform");
    }
    if (t.whiten && (t.zca_mean.size() != cols || t.zca.rows != cols)) {
        throw IoError(path + ": whitening stage missing");
    }
    return t;
}

}  // namespace rhcal
