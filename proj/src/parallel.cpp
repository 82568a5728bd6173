#include "pcov/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace pcov {

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("PCOV_THREADS")) {
        try {
            int v = std::stoi(env);
            if (v > 0) return v;
        } catch (...) {
        }
    }
    return omp_get_max_threads();
}

}  // namespace pcov
