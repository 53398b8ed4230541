#pragma once

#include <cstddef>
#include <functional>

namespace sxfer::exp {

// Calls fn(i) for i in [0, n) on up to `jobs` threads. Indices are handed out
// in increasing order. If any call throws, the remaining calls still run and
// the exception from the lowest index is rethrown at the end.
void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn);

}  // namespace sxfer::exp
