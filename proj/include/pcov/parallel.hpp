#pragma once

#include <cstddef>

namespace pcov {

// Resolves a worker count: a positive request wins, otherwise PCOV_THREADS,
// otherwise the OpenMP default.
int resolve_threads(int requested);

}  // namespace pcov
