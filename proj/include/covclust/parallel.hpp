#pragma once

#include <cstddef>
#include <functional>

namespace covclust {

/// Process-wide worker count used by the row-parallel maps. Defaults to 1.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Calls body(i) for i in [0, n). Work is split into contiguous chunks; the
/// body must only write state owned by index i, so results never depend on
/// scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace covclust
