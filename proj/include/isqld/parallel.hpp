#pragma once

#include <cstddef>
#include <functional>

namespace isqld {

/// Upper bound on worker threads used by the library (0 = hardware
/// concurrency). Set once by the CLI's --threads flag.
void set_max_threads(unsigned n);
unsigned max_threads();

/// Runs body(k) for k in [0, n). Indices are handed out dynamically; the
/// body must only write to slots owned by its index. The first exception
/// thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace isqld
