#pragma once

#include <span>
#include <vector>

namespace sxfer::exp {

struct Summary {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation; 0 for fewer than two values
    std::size_t count = 0;
};

Summary summarize(std::span<const double> values);

}  // namespace sxfer::exp
