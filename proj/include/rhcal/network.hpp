#pragma once

// One-hidden-layer feedforward network (ELU hidden activation, identity
// output) with mean squared logarithmic error loss, Adam training on
// mini-batches, a seeded validation split, and per-parameter evaluation.
//
// Loss convention: for one row, loss = sum over outputs of
// log((1+y_j)/(1+yhat_j))^2; batch loss is the mean over rows. Inside
// training, 1+yhat is clamped to >= 1e-6 (with zero gradient through the
// clamp); the standalone msle_loss is strict and throws instead.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rhcal/common.hpp"
#include "rhcal/params.hpp"

namespace rhcal {

inline double elu(double z) { return z > 0.0 ? z : std::expm1(z); }
inline double elu_prime(double z) { return z > 0.0 ? 1.0 : std::exp(z); }

struct FeedforwardNet {
    std::size_t n_in = 54, n_hidden = 6, n_out = 6;
    Matrix w1;               // n_in x n_hidden
    std::vector<double> b1;  // n_hidden
    Matrix w2;               // n_hidden x n_out
    std::vector<double> b2;  // n_out

    FeedforwardNet() : FeedforwardNet(54, 6, 6) {}
    FeedforwardNet(std::size_t in, std::size_t hidden, std::size_t out)
        : n_in(in),
          n_hidden(hidden),
          n_out(out),
          w1(in, hidden),
          b1(hidden, 0.0),
          w2(hidden, out),
          b2(out, 0.0) {}

    std::size_t param_count() const { return n_in * n_hidden + n_hidden + n_hidden * n_out + n_out; }

    // Uniform fan-scaled initialization, zero biases.
    void init(std::uint64_t seed) {
        Rng rng(derive_seed(seed, {0x696e6974u}));
        const auto fill = [&rng](Matrix& w) {
            const double limit = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
            for (auto& v : w.data) v = rng.uniform(-limit, limit);
        };
        fill(w1);
        fill(w2);
        std::fill(b1.begin(), b1.end(), 0.0);
        std::fill(b2.begin(), b2.end(), 0.0);
    }
};

// Fan-scaled random weights, then shrink the output layer and set the output
// biases to the label column means, so the net starts as (approximately) the
// mean predictor. With a squared-log-ratio loss this matters twice over: the
// optimizer skips the long plateau where Adam hunts for the right output
// scale, and no initial prediction can land below the loss guard at -1
// (where the clamp zeroes the gradient and permanently kills an output).
inline void init_mean_predictor(FeedforwardNet& net, std::uint64_t seed, const Matrix& labels) {
    if (labels.cols != net.n_out) {
        throw ValidationError("init_mean_predictor: label column count mismatch");
    }
    if (labels.rows == 0) throw ValidationError("init_mean_predictor: no label rows");
    net.init(seed);
    for (auto& v : net.w2.data) v *= 0.02;
    for (std::size_t j = 0; j < net.n_out; ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < labels.rows; ++r) mean += labels.at(r, j);
        net.b2[j] = mean / static_cast<double>(labels.rows);
    }
}

struct ForwardCache {
    std::vector<double> z1;  // hidden pre-activations
    std::vector<double> h1;  // hidden activations elu(z1)
    std::vector<double> y;   // outputs
};

inline ForwardCache forward(const FeedforwardNet& net, const double* x) {
    for (std::size_t i = 0; i < net.n_in; ++i) {
        if (!std::isfinite(x[i])) throw ValidationError("forward: non-finite input");
    }
    ForwardCache c;
    c.z1.assign(net.n_hidden, 0.0);
    for (std::size_t i = 0; i < net.n_in; ++i) {
        const double xi = x[i];
        const double* wrow = net.w1.row(i);
        for (std::size_t h = 0; h < net.n_hidden; ++h) c.z1[h] += xi * wrow[h];
    }
    c.h1.resize(net.n_hidden);
    for (std::size_t h = 0; h < net.n_hidden; ++h) c.h1[h] = elu(c.z1[h] + net.b1[h]);
    c.y.assign(net.b2.begin(), net.b2.end());
    for (std::size_t h = 0; h < net.n_hidden; ++h) {
        const double hh = c.h1[h];
        const double* wrow = net.w2.row(h);
        for (std::size_t j = 0; j < net.n_out; ++j) c.y[j] += hh * wrow[j];
    }
    // Note: z1 currently stores the linear part without bias; store the true
    // pre-activation for gradient/attribution consumers.
    for (std::size_t h = 0; h < net.n_hidden; ++h) c.z1[h] += net.b1[h];
    return c;
}

inline ForwardCache forward(const FeedforwardNet& net, const std::vector<double>& x) {
    if (x.size() != net.n_in) throw ValidationError("forward: input size mismatch");
    return forward(net, x.data());
}

inline Matrix predict(const FeedforwardNet& net, const Matrix& x, unsigned workers = 0) {
    if (x.cols != net.n_in) throw ValidationError("predict: input size mismatch");
    Matrix out(x.rows, net.n_out);
    parallel_for(
        x.rows,
        [&](std::size_t r) {
            const auto c = forward(net, x.row(r));
            for (std::size_t j = 0; j < net.n_out; ++j) out.at(r, j) = c.y[j];
        },
        workers);
    return out;
}

// Jacobian dy_j/dx_i as an n_out x n_in matrix.
inline Matrix jacobian(const FeedforwardNet& net, const double* x) {
    const auto c = forward(net, x);
    Matrix jac(net.n_out, net.n_in);
    for (std::size_t h = 0; h < net.n_hidden; ++h) {
        const double dp = elu_prime(c.z1[h]);
        const double* w2row = net.w2.row(h);
        for (std::size_t j = 0; j < net.n_out; ++j) {
            const double f = dp * w2row[j];
            for (std::size_t i = 0; i < net.n_in; ++i) jac.at(j, i) += f * net.w1.at(i, h);
        }
    }
    return jac;
}

constexpr double kMsleGuard = 1e-6;

// Strict per-row loss: sum over outputs of log((1+y)/(1+yhat))^2.
inline double msle_loss(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size()) throw ValidationError("msle_loss: size mismatch");
    double acc = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
        if (!(1.0 + y[j] > 0.0)) throw ValidationError("msle_loss: label at or below -1");
        if (!(1.0 + yhat[j] > kMsleGuard)) {
            throw NumericError("msle_loss: prediction below the domain guard");
        }
        const double d = std::log1p(y[j]) - std::log1p(yhat[j]);
        acc += d * d;
    }
    return acc;
}

namespace detail {

// Clamped loss used inside training loops: the prediction is floored just
// above -1 (where 1+yhat equals the guard), with zero gradient through a
// floored coordinate. Both sides go through log1p so a bitwise-perfect
// prediction yields an exactly zero term and exactly zero gradient.
inline double msle_clamped(const double* y, const double* yhat, std::size_t n,
                           double* dloss_dyhat = nullptr) {
    constexpr double kFloor = kMsleGuard - 1.0;
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const bool clamped = !(yhat[j] > kFloor);
        const double yg = clamped ? kFloor : yhat[j];
        const double d = std::log1p(y[j]) - std::log1p(yg);
        acc += d * d;
        if (dloss_dyhat) {
            dloss_dyhat[j] = clamped ? 0.0 : -2.0 * d / (1.0 + yg);
        }
    }
    return acc;
}

}  // namespace detail

struct Gradients {
    Matrix w1, w2;
    std::vector<double> b1, b2;

    explicit Gradients(const FeedforwardNet& net)
        : w1(net.n_in, net.n_hidden),
          w2(net.n_hidden, net.n_out),
          b1(net.n_hidden, 0.0),
          b2(net.n_out, 0.0) {}
};

// Mean clamped-MSLE loss over the batch rows x[idx], with analytic gradients.
// `drop_in`/`drop_hidden` are optional inverted-dropout keep masks (scale
// already applied); pass nullptr outside training.
inline double batch_gradients(const FeedforwardNet& net, const Matrix& x, const Matrix& y,
                              const std::vector<std::size_t>& idx, Gradients& g,
                              const std::vector<double>* drop_in = nullptr,
                              const std::vector<double>* drop_hidden = nullptr) {
    std::fill(g.w1.data.begin(), g.w1.data.end(), 0.0);
    std::fill(g.w2.data.begin(), g.w2.data.end(), 0.0);
    std::fill(g.b1.begin(), g.b1.end(), 0.0);
    std::fill(g.b2.begin(), g.b2.end(), 0.0);

    const double inv_n = 1.0 / static_cast<double>(idx.size());
    double loss = 0.0;
    std::vector<double> xin(net.n_in), z1(net.n_hidden), h1(net.n_hidden), yhat(net.n_out),
        dy(net.n_out), dh(net.n_hidden);
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const std::size_t r = idx[b];
        const double* xr = x.row(r);
        for (std::size_t i = 0; i < net.n_in; ++i) {
            xin[i] = drop_in ? xr[i] * (*drop_in)[b * net.n_in + i] : xr[i];
        }
        std::fill(z1.begin(), z1.end(), 0.0);
        for (std::size_t i = 0; i < net.n_in; ++i) {
            const double xi = xin[i];
            if (xi == 0.0) continue;
            const double* wrow = net.w1.row(i);
            for (std::size_t h = 0; h < net.n_hidden; ++h) z1[h] += xi * wrow[h];
        }
        for (std::size_t h = 0; h < net.n_hidden; ++h) {
            z1[h] += net.b1[h];
            h1[h] = elu(z1[h]);
            if (drop_hidden) h1[h] *= (*drop_hidden)[b * net.n_hidden + h];
        }
        yhat.assign(net.b2.begin(), net.b2.end());
        for (std::size_t h = 0; h < net.n_hidden; ++h) {
            const double hh = h1[h];
            if (hh == 0.0) continue;
            const double* wrow = net.w2.row(h);
            for (std::size_t j = 0; j < net.n_out; ++j) yhat[j] += hh * wrow[j];
        }
        loss += detail::msle_clamped(y.row(r), yhat.data(), net.n_out, dy.data());

        // Backward pass (per-row gradients scaled by 1/batch at the end).
        for (std::size_t j = 0; j < net.n_out; ++j) g.b2[j] += dy[j];
        for (std::size_t h = 0; h < net.n_hidden; ++h) {
            const double hh = h1[h];
            double acc = 0.0;
            const double* wrow = net.w2.row(h);
            double* grow = g.w2.row(h);
            for (std::size_t j = 0; j < net.n_out; ++j) {
                grow[j] += hh * dy[j];
                acc += wrow[j] * dy[j];
            }
            if (drop_hidden) acc *= (*drop_hidden)[b * net.n_hidden + h];
            dh[h] = acc * elu_prime(z1[h]);
        }
        for (std::size_t h = 0; h < net.n_hidden; ++h) g.b1[h] += dh[h];
        for (std::size_t i = 0; i < net.n_in; ++i) {
            const double xi = xin[i];
            if (xi == 0.0) continue;
            double* grow = g.w1.row(i);
            for (std::size_t h = 0; h < net.n_hidden; ++h) grow[h] += xi * dh[h];
        }
    }
    for (auto& v : g.w1.data) v *= inv_n;
    for (auto& v : g.w2.data) v *= inv_n;
    for (auto& v : g.b1) v *= inv_n;
    for (auto& v : g.b2) v *= inv_n;
    return loss * inv_n;
}

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double validation_fraction = 0.2;
    double dropout_rate = 0.0;  // 0 disables; the tested variant uses 0.6
    std::uint64_t seed = 1;

    void validate() const {
        if (epochs == 0) throw ValidationError("train: epochs must be positive");
        if (batch_size == 0) throw ValidationError("train: batch_size must be positive");
        if (!(learning_rate >= 0.0)) throw ValidationError("train: learning rate must be >= 0");
        if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
            throw ValidationError("train: validation_fraction must lie in (0, 1)");
        }
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
            throw ValidationError("train: dropout_rate must lie in [0, 1)");
        }
    }
};

struct TrainHistory {
    std::vector<double> train_loss, val_loss, train_acc, val_acc;
};

namespace detail {

inline double accuracy_against(const Matrix& yhat, const Matrix& y, const ParameterBox& box) {
    std::size_t hits = 0;
    for (std::size_t r = 0; r < y.rows; ++r) {
        for (std::size_t j = 0; j < y.cols; ++j) {
            if (std::abs(yhat.at(r, j) - y.at(r, j)) <= 0.05 * box.width(static_cast<int>(j))) {
                ++hits;
            }
        }
    }
    return y.rows == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(y.rows * y.cols);
}

inline double mean_clamped_loss(const FeedforwardNet& net, const Matrix& x, const Matrix& y,
                                const std::vector<std::size_t>& idx) {
    double acc = 0.0;
    for (const auto r : idx) {
        const auto c = forward(net, x.row(r));
        acc += msle_clamped(y.row(r), c.y.data(), net.n_out);
    }
    return acc / static_cast<double>(idx.size());
}

struct AdamState {
    Gradients m, v;
    std::uint64_t t = 0;
    explicit AdamState(const FeedforwardNet& net) : m(net), v(net) {}
};

inline void adam_step(double* w, const double* g, double* m, double* v, std::size_t n,
                      const TrainConfig& cfg, double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        w[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.eps);
    }
}

}  // namespace detail

// Trains in place. Features must already be preprocessed; labels are raw
// parameters. The validation subset is carved from (x, y) with the seeded
// shuffle; history records epoch-end full-pass loss and accuracy for both
// subsets.
inline TrainHistory train(FeedforwardNet& net, const Matrix& x, const Matrix& y,
                          const ParameterBox& box, const TrainConfig& cfg) {
    cfg.validate();
    if (x.rows != y.rows) throw ValidationError("train: feature/label row mismatch");
    if (x.cols != net.n_in || y.cols != net.n_out) {
        throw ValidationError("train: data does not match network dimensions");
    }
    const std::size_t n = x.rows;
    const auto n_val = static_cast<std::size_t>(
        std::lround(cfg.validation_fraction * static_cast<double>(n)));
    if (n_val == 0 || n_val >= n) throw ValidationError("train: degenerate validation split");

    auto idx = shuffled_indices(n, derive_seed(cfg.seed, {0x76616cu}));
    std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + n_val);
    std::vector<std::size_t> trn_idx(idx.begin() + n_val, idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(trn_idx.begin(), trn_idx.end());

    Gradients grad(net);
    detail::AdamState adam(net);
    TrainHistory hist;
    Rng drop_rng(derive_seed(cfg.seed, {0x64726f70u}));
    std::vector<double> drop_in, drop_hidden;
    const bool use_dropout = cfg.dropout_rate > 0.0;

    const auto eval_pair = [&](const std::vector<std::size_t>& which, double& loss, double& acc) {
        loss = detail::mean_clamped_loss(net, x, y, which);
        Matrix yh(which.size(), net.n_out), yy(which.size(), net.n_out);
        for (std::size_t r = 0; r < which.size(); ++r) {
            const auto c = forward(net, x.row(which[r]));
            for (std::size_t j = 0; j < net.n_out; ++j) {
                yh.at(r, j) = c.y[j];
                yy.at(r, j) = y.at(which[r], j);
            }
        }
        acc = detail::accuracy_against(yh, yy, box);
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        auto order = trn_idx;
        Rng epoch_rng(derive_seed(cfg.seed, {0x65706f63u, static_cast<std::uint64_t>(epoch)}));
        shuffle_inplace(order, epoch_rng);
        for (std::size_t start = 0, batch_no = 0; start < order.size();
             start += cfg.batch_size, ++batch_no) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            std::vector<std::size_t> batch(order.begin() + start, order.begin() + start + len);

            const std::vector<double>*din = nullptr, *dhid = nullptr;
            if (use_dropout) {
                const double keep = 1.0 - cfg.dropout_rate;
                drop_in.resize(len * net.n_in);
                drop_hidden.resize(len * net.n_hidden);
                for (auto& v : drop_in) v = drop_rng.uniform01() < keep ? 1.0 / keep : 0.0;
                for (auto& v : drop_hidden) v = drop_rng.uniform01() < keep ? 1.0 / keep : 0.0;
                din = &drop_in;
                dhid = &drop_hidden;
            }

            const double loss = batch_gradients(net, x, y, batch, grad, din, dhid);
            if (!std::isfinite(loss)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(batch_no));
            }
            ++adam.t;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.t));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.t));
            detail::adam_step(net.w1.data.data(), grad.w1.data.data(), adam.m.w1.data.data(),
                              adam.v.w1.data.data(), net.w1.data.size(), cfg, bc1, bc2);
            detail::adam_step(net.b1.data(), grad.b1.data(), adam.m.b1.data(), adam.v.b1.data(),
                              net.b1.size(), cfg, bc1, bc2);
            detail::adam_step(net.w2.data.data(), grad.w2.data.data(), adam.m.w2.data.data(),
                              adam.v.w2.data.data(), net.w2.data.size(), cfg, bc1, bc2);
            detail::adam_step(net.b2.data(), grad.b2.data(), adam.m.b2.data(), adam.v.b2.data(),
                              net.b2.size(), cfg, bc1, bc2);
        }
        double tl = 0.0, ta = 0.0, vl = 0.0, va = 0.0;
        eval_pair(trn_idx, tl, ta);
        eval_pair(val_idx, vl, va);
        hist.train_loss.push_back(tl);
        hist.train_acc.push_back(ta);
        hist.val_loss.push_back(vl);
        hist.val_acc.push_back(va);
    }
    return hist;
}

struct EvalReport {
    std::array<double, kNumParams> per_param_error{};  // mean log-ratio-squared per output
    double total_error = 0.0;                          // sum of the six means
    double accuracy = 0.0;                             // box-width accuracy
    std::size_t n_rows = 0;
};

inline EvalReport evaluate(const FeedforwardNet& net, const Matrix& x, const Matrix& y,
                           const ParameterBox& box, unsigned workers = 0) {
    if (x.rows != y.rows) throw ValidationError("evaluate: feature/label row mismatch");
    if (y.cols != kNumParams || net.n_out != kNumParams) {
        throw ValidationError("evaluate: expected six outputs");
    }
    const auto yhat = predict(net, x, workers);
    EvalReport rep;
    rep.n_rows = x.rows;
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t j = 0; j < kNumParams; ++j) {
            // Same guard as training: the prediction floored just above -1,
            // so a degenerate prediction surfaces as a large error rather
            // than an abort.
            const double yg = std::max(yhat.at(r, j), kMsleGuard - 1.0);
            const double d = std::log1p(y.at(r, j)) - std::log1p(yg);
            rep.per_param_error[j] += d * d;
        }
    }
    for (auto& e : rep.per_param_error) e /= static_cast<double>(x.rows);
    for (const auto e : rep.per_param_error) rep.total_error += e;
    rep.accuracy = detail::accuracy_against(yhat, y, box);
    return rep;
}

// ---------------------------------------------------------------------------
// Persistence.
// ---------------------------------------------------------------------------

inline void save_net(const FeedforwardNet& net, const std::string& path) {
    std::ostringstream os;
    os << "rhcal net 1\n";
    os << "dims " << net.n_in << ' ' << net.n_hidden << ' ' << net.n_out << '\n';
    const auto mat = [&os](const std::string& key, const Matrix& w) {
        for (std::size_t r = 0; r < w.rows; ++r) {
            os << key << ' ' << r;
            for (std::size_t c = 0; c < w.cols; ++c) os << ' ' << format_full(w.at(r, c));
            os << '\n';
        }
    };
    mat("w1", net.w1);
    os << "b1";
    for (const auto v : net.b1) os << ' ' << format_full(v);
    os << '\n';
    mat("w2", net.w2);
    os << "b2";
    for (const auto v : net.b2) os << ' ' << format_full(v);
    os << '\n';
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_net: cannot open " + path);
    f << os.str();
    if (!f) throw IoError("save_net: write failed for " + path);
}

inline FeedforwardNet load_net(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_net: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line != "rhcal net 1") throw IoError(path + ": not a net file");
    if (!std::getline(f, line)) throw IoError(path + ": missing dims");
    std::istringstream ds(line);
    std::string key;
    std::size_t n_in = 0, n_hidden = 0, n_out = 0;
    ds >> key >> n_in >> n_hidden >> n_out;
    if (key != "dims" || n_in == 0 || n_hidden == 0 || n_out == 0) {
        throw IoError(path + ": bad dims line");
    }
    FeedforwardNet net(n_in, n_hidden, n_out);
    const auto read_row = [&](std::istringstream& is, Matrix& w) {
        std::size_t r = 0;
        if (!(is >> r) || r >= w.rows) throw IoError(path + ": bad matrix row index");
        for (std::size_t c = 0; c < w.cols; ++c) {
            if (!(is >> w.at(r, c))) throw IoError(path + ": truncated matrix row");
        }
    };
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        is >> key;
        if (key == "w1") {
            read_row(is, net.w1);
        } else if (key == "w2") {
            read_row(is, net.w2);
        } else if (key == "b1" || key == "b2") {
            auto& b = key == "b1" ? net.b1 : net.b2;
            for (auto& v : b) {
                if (!(is >> v)) throw IoError(path + ": truncated bias line");
            }
        } else {
            throw IoError(path + ": unknown key '" + key + "'");
        }
    }
    return net;
}

inline void save_history(const TrainHistory& h, const std::string& path) {
    std::ostringstream os;
    os << "epoch,train_loss,val_loss,train_acc,val_acc\n";
    for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
        os << (e + 1) << ',' << format_full(h.train_loss[e]) << ',' << format_full(h.val_loss[e])
           << ',' << format_full(h.train_acc[e]) << ',' << format_full(h.val_acc[e]) << '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("save_history: cannot open " + path);
    f << os.str();
}

}  // namespace rhcal
