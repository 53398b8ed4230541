#include "sxfer/experiment/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "sxfer/error.hpp"

namespace sxfer::exp::svg {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

// Roughly five round tick positions covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi) {
    if (!(hi > lo)) return {lo};
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
        if (raw <= m * mag) {
            step = m * mag;
            break;
        }
    }
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) {
        ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
    }
    return ticks;
}

std::string text(double x, double y, std::string_view body, std::string_view anchor = "middle", int size = 12,
                 std::string_view extra = "") {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-size=\"" + std::to_string(size) +
           "\" text-anchor=\"" + std::string(anchor) + "\"" + std::string(extra) + ">" + escape(body) + "</text>\n";
}

std::string header(int width, int height) {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) + " " + std::to_string(height) +
           "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

}  // namespace

std::string escape(std::string_view in) {
    std::string out;
    for (char c : in) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string render(const LinePlot& plot) {
    const double left = 70, right = 160, top = 40, bottom = 55;
    const double pw = plot.width - left - right, ph = plot.height - top - bottom;
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    auto tx = [&](double x) { return plot.log_x ? std::log10(x) : x; };
    for (const auto& s : plot.series) {
        if (s.x.size() != s.y.size() || (!s.err.empty() && s.err.size() != s.y.size())) {
            throw DimensionError("svg series '" + s.name + "' has mismatched lengths");
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (plot.log_x && !(s.x[i] > 0)) throw RangeError("svg: log axis needs positive x");
            const double e = s.err.empty() ? 0.0 : s.err[i];
            x0 = std::min(x0, tx(s.x[i]));
            x1 = std::max(x1, tx(s.x[i]));
            y0 = std::min(y0, s.y[i] - e);
            y1 = std::max(y1, s.y[i] + e);
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x0 -= 0.5, x1 += 0.5;
    const double pad = y1 > y0 ? 0.08 * (y1 - y0) : 0.5;
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return left + (tx(x) - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * ph; };

    std::string out = header(plot.width, plot.height);
    out += text(left + pw / 2, 22, plot.title, "middle", 14);
    out += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (double t : nice_ticks(y0, y1)) {
        out += "<line x1=\"" + num(left) + "\" x2=\"" + num(left + pw) + "\" y1=\"" + num(py(t)) + "\" y2=\"" +
               num(py(t)) + "\" stroke=\"#ddd\"/>\n";
        out += text(left - 6, py(t) + 4, tick_label(t), "end", 11);
    }
    std::vector<double> xticks;
    if (plot.log_x) {
        for (double d = std::floor(x0); d <= std::ceil(x1); d += 1.0) {
            for (double m : {1.0, 2.0, 5.0}) {
                const double v = m * std::pow(10.0, d);
                if (std::log10(v) >= x0 - 1e-9 && std::log10(v) <= x1 + 1e-9) xticks.push_back(v);
            }
        }
    } else {
        xticks = nice_ticks(x0, x1);
    }
    for (double t : xticks) {
        out += "<line x1=\"" + num(px(t)) + "\" x2=\"" + num(px(t)) + "\" y1=\"" + num(top + ph) + "\" y2=\"" +
               num(top + ph + 5) + "\" stroke=\"#444\"/>\n";
        out += text(px(t), top + ph + 18, tick_label(t), "middle", 11);
    }
    out += text(left + pw / 2, plot.height - 12, plot.x_label, "middle", 12);
    out += text(18, top + ph / 2, plot.y_label, "middle", 12,
                " transform=\"rotate(-90 18 " + num(top + ph / 2) + ")\"");

    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const auto& s = plot.series[k];
        std::string points;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (i) points += ' ';
            points += num(px(s.x[i])) + "," + num(py(s.y[i]));
        }
        out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"2\"" +
               (s.dashed ? " stroke-dasharray=\"6 4\"" : "") + " points=\"" + points + "\"/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!s.err.empty() && s.err[i] > 0) {
                out += "<line x1=\"" + num(px(s.x[i])) + "\" x2=\"" + num(px(s.x[i])) + "\" y1=\"" +
                       num(py(s.y[i] - s.err[i])) + "\" y2=\"" + num(py(s.y[i] + s.err[i])) + "\" stroke=\"" +
                       s.color + "\"/>\n";
            }
            if (s.markers) {
                out += "<circle cx=\"" + num(px(s.x[i])) + "\" cy=\"" + num(py(s.y[i])) + "\" r=\"3\" fill=\"" +
                       s.color + "\"/>\n";
            }
        }
        const double ly = top + 10 + 18.0 * static_cast<double>(k);
        out += "<line x1=\"" + num(left + pw + 12) + "\" x2=\"" + num(left + pw + 36) + "\" y1=\"" + num(ly) +
               "\" y2=\"" + num(ly) + "\" stroke=\"" + s.color + "\" stroke-width=\"2\"" +
               (s.dashed ? " stroke-dasharray=\"6 4\"" : "") + "/>\n";
        out += text(left + pw + 42, ly + 4, s.name, "start", 11);
    }
    out += "</svg>\n";
    return out;
}

std::string render(const Heatmap& map) {
    if (map.values.size() != map.rows.size()) throw DimensionError("svg heatmap: row count mismatch");
    for (const auto& r : map.values) {
        if (r.size() != map.cols.size()) throw DimensionError("svg heatmap: column count mismatch");
    }
    const double cw = 72, ch = 34, left = 90, top = 70;
    const int width = static_cast<int>(left + cw * static_cast<double>(map.cols.size()) + 30);
    const int height = static_cast<int>(top + ch * static_cast<double>(map.rows.size()) + 40);

    double spread = 0.0;
    const double center = map.center.value_or(0.0);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& r : map.values) {
        for (double v : r) {
            if (std::isnan(v)) continue;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            if (map.center) spread = std::max(spread, std::abs(v - center));
        }
    }
    auto fill = [&](double v) {
        double t;  // -1 (blue) .. 1 (red)
        if (map.center) {
            t = spread > 0 ? (v - center) / spread : 0.0;
        } else {
            t = hi > lo ? 2.0 * (v - lo) / (hi - lo) - 1.0 : 0.0;
        }
        const int fade = static_cast<int>(std::lround(255.0 * (1.0 - 0.75 * std::abs(t))));
        char buf[16];
        if (t < 0) {
            std::snprintf(buf, sizeof buf, "#%02x%02xff", fade, fade);
        } else {
            std::snprintf(buf, sizeof buf, "#ff%02x%02x", fade, fade);
        }
        return std::string(buf);
    };

    std::string out = header(width, height);
    out += text(width / 2.0, 22, map.title, "middle", 14);
    out += text(left + cw * static_cast<double>(map.cols.size()) / 2, 46, map.col_label, "middle", 12);
    out += text(16, top + ch * static_cast<double>(map.rows.size()) / 2, map.row_label, "middle", 12,
                " transform=\"rotate(-90 16 " + num(top + ch * static_cast<double>(map.rows.size()) / 2) + ")\"");
    for (std::size_t c = 0; c < map.cols.size(); ++c) {
        out += text(left + cw * (static_cast<double>(c) + 0.5), top - 8, map.cols[c], "middle", 12);
    }
    for (std::size_t r = 0; r < map.rows.size(); ++r) {
        const double y = top + ch * static_cast<double>(r);
        out += text(left - 8, y + ch / 2 + 4, map.rows[r], "end", 12);
        for (std::size_t c = 0; c < map.cols.size(); ++c) {
            const double v = map.values[r][c];
            const double x = left + cw * static_cast<double>(c);
            const bool outlined = std::find(map.outlined.begin(), map.outlined.end(), std::pair{r, c}) != map.outlined.end();
            const bool marked = std::find(map.marked.begin(), map.marked.end(), std::pair{r, c}) != map.marked.end();
            out += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cw) + "\" height=\"" + num(ch) +
                   "\" fill=\"" + (std::isnan(v) ? std::string("#f4f4f4") : fill(v)) + "\" stroke=\"" +
                   (outlined ? "#000" : "#bbb") + "\" stroke-width=\"" + (outlined ? "3" : "1") + "\"/>\n";
            if (!std::isnan(v)) {
                out += text(x + cw / 2, y + ch / 2 + 4, num(v * map.scale) + map.suffix + (marked ? "*" : ""),
                            "middle", 12);
            }
        }
    }
    out += "</svg>\n";
    return out;
}

}  // namespace sxfer::exp::svg
