#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace sxfer::exp {

// Provenance lines written as '# key: value' comments above every CSV report.
struct ReportMeta {
    std::string command;
    std::string config_hash;
    std::vector<std::pair<std::string, std::string>> dataset_hashes;  // label, hash
    std::vector<std::pair<std::string, std::string>> extra;
};

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns);

    CsvTable& row(std::vector<std::string> cells);
    std::size_t rows() const { return rows_.size(); }
    std::string render(const ReportMeta& meta) const;

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

// Fixed-precision number for reports; independent of locale.
std::string cell(double value);
std::string cell(std::size_t value);
std::string cell(int value);
std::string cell(bool value);

}  // namespace sxfer::exp
