#include "sxfer/experiment/report.hpp"

#include <cmath>
#include <cstdio>

#include "sxfer/error.hpp"
#include "sxfer/version.hpp"

namespace sxfer::exp {

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

CsvTable& CsvTable::row(std::vector<std::string> cells) {
    if (cells.size() != columns_.size()) {
        throw DimensionError("csv row has " + std::to_string(cells.size()) + " cells for " +
                             std::to_string(columns_.size()) + " columns");
    }
    rows_.push_back(std::move(cells));
    return *this;
}

namespace {

void join(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        const bool quote = cells[i].find_first_of(",\"\n") != std::string::npos;
        if (!quote) {
            out += cells[i];
            continue;
        }
        out += '"';
        for (char c : cells[i]) {
            if (c == '"') out += '"';
            out += c;
        }
        out += '"';
    }
    out += '\n';
}

}  // namespace

std::string CsvTable::render(const ReportMeta& meta) const {
    std::string out;
    out += "# sxfer " + std::string(kVersion) + "\n";
    out += "# command: " + meta.command + "\n";
    out += "# config_hash: " + meta.config_hash + "\n";
    for (const auto& [label, hash] : meta.dataset_hashes) out += "# dataset " + label + ": " + hash + "\n";
    for (const auto& [key, value] : meta.extra) out += "# " + key + ": " + value + "\n";
    join(out, columns_);
    for (const auto& r : rows_) join(out, r);
    return out;
}

std::string cell(double value) {
    if (std::isnan(value)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.8g", value);
    return buf;
}

std::string cell(std::size_t value) { return std::to_string(value); }
std::string cell(int value) { return std::to_string(value); }
std::string cell(bool value) { return value ? "1" : "0"; }

}  // namespace sxfer::exp
