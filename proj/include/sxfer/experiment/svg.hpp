#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sxfer::exp::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> err;  // optional half-height error bars
    std::string color = "#000000";
    bool dashed = false;
    bool markers = true;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    std::vector<Series> series;
    int width = 640;
    int height = 420;
};

std::string render(const LinePlot& plot);

// Table-style heatmap; NaN cells are left blank. Values below `center` are
// shaded blue, values above it red.
struct Heatmap {
    std::string title;
    std::string row_label;
    std::string col_label;
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<std::vector<double>> values;
    std::optional<double> center;
    double scale = 100.0;  // displayed value = value * scale
    std::string suffix = "%";
    std::vector<std::pair<std::size_t, std::size_t>> outlined;  // (row, col)
    std::vector<std::pair<std::size_t, std::size_t>> marked;    // drawn with a trailing '*'
};

std::string render(const Heatmap& map);

std::string escape(std::string_view text);

}  // namespace sxfer::exp::svg
