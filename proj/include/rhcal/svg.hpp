#pragma once

// Dependency-free SVG renderings of the pipeline's artifacts: attribution
// heat maps, predicted-vs-actual scatter panels, and training-history curves.
// Output is deterministic (fixed float formatting) so repeated runs are
// byte-identical.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "rhcal/common.hpp"
#include "rhcal/interpret.hpp"
#include "rhcal/network.hpp"

namespace rhcal {

namespace detail {

inline std::string svg_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

// Monotone single-hue ramp: t = 0 renders near-white (low attribution),
// t = 1 renders a deep blue.
inline std::string svg_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(247.0 + t * (21.0 - 247.0)));
    const int g = static_cast<int>(std::lround(251.0 + t * (58.0 - 251.0)));
    const int b = static_cast<int>(std::lround(255.0 + t * (110.0 - 255.0)));
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

inline void svg_open(std::string& s, double w, double h) {
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(w) + "\" height=\"" +
         svg_num(h) + "\" viewBox=\"0 0 " + svg_num(w) + " " + svg_num(h) + "\">\n";
    s += "<rect width=\"" + svg_num(w) + "\" height=\"" + svg_num(h) +
         "\" fill=\"#ffffff\"/>\n";
}

inline void svg_text(std::string& s, double x, double y, const std::string& text,
                     const std::string& cls, const std::string& anchor = "middle",
                     int size = 11) {
    s += "<text class=\"" + cls + "\" x=\"" + svg_num(x) + "\" y=\"" + svg_num(y) +
         "\" font-family=\"sans-serif\" font-size=\"" + std::to_string(size) +
         "\" text-anchor=\"" + anchor + "\">" + svg_escape(text) + "</text>\n";
}

}  // namespace detail

// One labeled grid cell per (strike, maturity); light color for low values.
inline std::string heatmap_svg(const HeatMap& map, const std::string& title) {
    const std::size_t nk = map.grid.strikes.size();
    const std::size_t nt = map.grid.maturities.size();
    const double cell_w = 66.0, cell_h = 32.0;
    const double left = 72.0, top = 48.0;
    const double width = left + nt * cell_w + 24.0;
    const double height = top + nk * cell_h + 44.0;

    double vmax = 0.0;
    for (std::size_t k = 0; k < nk; ++k)
        for (std::size_t t = 0; t < nt; ++t) vmax = std::max(vmax, map.at_cell(k, t));
    if (vmax <= 0.0) vmax = 1.0;

    std::string s;
    detail::svg_open(s, width, height);
    detail::svg_text(s, width / 2.0, 20.0, title, "title", "middle", 13);
    for (std::size_t t = 0; t < nt; ++t) {
        detail::svg_text(s, left + (t + 0.5) * cell_w, top - 8.0,
                         "T=" + format_label(map.grid.maturities[t]), "axis");
    }
    for (std::size_t k = 0; k < nk; ++k) {
        detail::svg_text(s, left - 8.0, top + (k + 0.5) * cell_h + 4.0,
                         "K=" + format_label(map.grid.strikes[k]), "axis", "end");
    }
    for (std::size_t k = 0; k < nk; ++k) {
        for (std::size_t t = 0; t < nt; ++t) {
            const double v = map.at_cell(k, t);
            const double x = left + t * cell_w, y = top + k * cell_h;
            s += "<rect class=\"cell\" x=\"" + detail::svg_num(x) + "\" y=\"" +
                 detail::svg_num(y) + "\" width=\"" + detail::svg_num(cell_w) + "\" height=\"" +
                 detail::svg_num(cell_h) + "\" fill=\"" + detail::svg_color(v / vmax) +
                 "\" stroke=\"#888888\" stroke-width=\"0.5\"/>\n";
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.3g", v);
            detail::svg_text(s, x + cell_w / 2.0, y + cell_h / 2.0 + 4.0, buf,
                             v / vmax > 0.55 ? "value value-dark" : "value", "middle", 10);
        }
    }
    detail::svg_text(s, left + nt * cell_w / 2.0, top + nk * cell_h + 28.0,
                     "mean |attribution| per grid cell; darker = larger", "caption");
    s += "</svg>\n";
    return s;
}

// Predicted-vs-actual scatter with the identity diagonal.
inline std::string scatter_svg(const std::vector<double>& actual,
                               const std::vector<double>& predicted, const std::string& title) {
    if (actual.size() != predicted.size() || actual.empty()) {
        throw ValidationError("scatter_svg: need equal, non-empty value vectors");
    }
    const double left = 64.0, top = 44.0, plot = 320.0;
    const double width = left + plot + 28.0, height = top + plot + 56.0;
    double lo = actual[0], hi = actual[0];
    for (std::size_t i = 0; i < actual.size(); ++i) {
        lo = std::min({lo, actual[i], predicted[i]});
        hi = std::max({hi, actual[i], predicted[i]});
    }
    if (!(hi > lo)) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const auto sx = [&](double v) { return left + (v - lo) / (hi - lo) * plot; };
    const auto sy = [&](double v) { return top + plot - (v - lo) / (hi - lo) * plot; };

    std::string s;
    detail::svg_open(s, width, height);
    detail::svg_text(s, width / 2.0, 20.0, title, "title", "middle", 13);
    s += "<rect x=\"" + detail::svg_num(left) + "\" y=\"" + detail::svg_num(top) + "\" width=\"" +
         detail::svg_num(plot) + "\" height=\"" + detail::svg_num(plot) +
         "\" fill=\"none\" stroke=\"#444444\"/>\n";
    s += "<line class=\"diagonal\" x1=\"" + detail::svg_num(sx(lo)) + "\" y1=\"" +
         detail::svg_num(sy(lo)) + "\" x2=\"" + detail::svg_num(sx(hi)) + "\" y2=\"" +
         detail::svg_num(sy(hi)) + "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";
    for (std::size_t i = 0; i < actual.size(); ++i) {
        s += "<circle class=\"pt\" cx=\"" + detail::svg_num(sx(actual[i])) + "\" cy=\"" +
             detail::svg_num(sy(predicted[i])) +
             "\" r=\"2.2\" fill=\"#15507a\" fill-opacity=\"0.55\"/>\n";
    }
    for (double f : {0.0, 0.5, 1.0}) {
        const double v = lo + f * (hi - lo);
        detail::svg_text(s, sx(v), top + plot + 16.0, format_label(v), "axis");
        detail::svg_text(s, left - 6.0, sy(v) + 4.0, format_label(v), "axis", "end");
    }
    detail::svg_text(s, left + plot / 2.0, top + plot + 40.0, "actual", "axis-label");
    s += "<text class=\"axis-label\" x=\"18\" y=\"" + detail::svg_num(top + plot / 2.0) +
         "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         detail::svg_num(top + plot / 2.0) + ")\">predicted</text>\n";
    s += "</svg>\n";
    return s;
}

namespace detail {

inline void svg_series(std::string& s, const std::vector<double>& ys, double left, double top,
                       double plot_w, double plot_h, double ylo, double yhi,
                       const std::string& color, const std::string& cls) {
    std::string pts;
    const std::size_t n = ys.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = left + (n == 1 ? 0.5 : static_cast<double>(i) / (n - 1)) * plot_w;
        const double y = top + plot_h - (ys[i] - ylo) / (yhi - ylo) * plot_h;
        pts += svg_num(x) + "," + svg_num(y) + " ";
    }
    s += "<polyline class=\"" + cls + "\" points=\"" + pts + "\" fill=\"none\" stroke=\"" +
         color + "\" stroke-width=\"1.5\"/>\n";
}

}  // namespace detail

// Two panels: loss (log10) and box-width accuracy, training vs validation.
inline std::string history_svg(const TrainHistory& h, const std::string& title) {
    if (h.train_loss.empty()) throw ValidationError("history_svg: empty history");
    const double panel_w = 300.0, panel_h = 220.0, left = 58.0, top = 48.0, gap = 72.0;
    const double width = left + 2.0 * panel_w + gap + 24.0, height = top + panel_h + 64.0;

    const auto log_map = [](const std::vector<double>& v) {
        std::vector<double> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::log10(std::max(v[i], 1e-12));
        return out;
    };
    const auto ltr = log_map(h.train_loss), lva = log_map(h.val_loss);
    double llo = ltr[0], lhi = ltr[0];
    for (double v : ltr) {
        llo = std::min(llo, v);
        lhi = std::max(lhi, v);
    }
    for (double v : lva) {
        llo = std::min(llo, v);
        lhi = std::max(lhi, v);
    }
    if (!(lhi > llo)) lhi = llo + 1.0;

    std::string s;
    detail::svg_open(s, width, height);
    detail::svg_text(s, width / 2.0, 20.0, title, "title", "middle", 13);

    s += "<rect x=\"" + detail::svg_num(left) + "\" y=\"" + detail::svg_num(top) + "\" width=\"" +
         detail::svg_num(panel_w) + "\" height=\"" + detail::svg_num(panel_h) +
         "\" fill=\"none\" stroke=\"#444444\"/>\n";
    detail::svg_series(s, ltr, left, top, panel_w, panel_h, llo, lhi, "#15507a", "loss-train");
    detail::svg_series(s, lva, left, top, panel_w, panel_h, llo, lhi, "#c25b1e", "loss-val");
    detail::svg_text(s, left + panel_w / 2.0, top + panel_h + 18.0, "epoch", "axis");
    detail::svg_text(s, left + panel_w / 2.0, top - 8.0, "log10 loss", "axis");
    detail::svg_text(s, left - 6.0, top + 10.0, format_label(lhi), "axis", "end");
    detail::svg_text(s, left - 6.0, top + panel_h, format_label(llo), "axis", "end");

    const double left2 = left + panel_w + gap;
    s += "<rect x=\"" + detail::svg_num(left2) + "\" y=\"" + detail::svg_num(top) +
         "\" width=\"" + detail::svg_num(panel_w) + "\" height=\"" + detail::svg_num(panel_h) +
         "\" fill=\"none\" stroke=\"#444444\"/>\n";
    detail::svg_series(s, h.train_acc, left2, top, panel_w, panel_h, 0.0, 1.0, "#15507a",
                       "acc-train");
    detail::svg_series(s, h.val_acc, left2, top, panel_w, panel_h, 0.0, 1.0, "#c25b1e",
                       "acc-val");
    detail::svg_text(s, left2 + panel_w / 2.0, top + panel_h + 18.0, "epoch", "axis");
    detail::svg_text(s, left2 + panel_w / 2.0, top - 8.0, "accuracy", "axis");
    detail::svg_text(s, left2 - 6.0, top + 10.0, "1.0", "axis", "end");
    detail::svg_text(s, left2 - 6.0, top + panel_h, "0.0", "axis", "end");

    detail::svg_text(s, left, height - 16.0, "blue: training   orange: validation", "legend",
                     "start");
    s += "</svg>\n";
    return s;
}

}  // namespace rhcal
