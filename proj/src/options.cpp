#include "pcov/options.hpp"

#include <cmath>

namespace pcov {

std::string to_string(DistVariance mode) {
    switch (mode) {
        case DistVariance::block_centred: return "block-centred";
        case DistVariance::anchored: return "anchored";
        case DistVariance::mixed: return "mixed";
    }
    return "anchored";
}

DistVariance parse_dist_variance(const std::string& text) {
    if (text == "block-centred" || text == "block") return DistVariance::block_centred;
    if (text == "anchored") return DistVariance::anchored;
    if (text == "mixed") return DistVariance::mixed;
    throw ValidationError("unknown distributed variance mode '" + text + "' (expected block-centred, anchored, mixed)");
}

void validate_options(const TestOptions& o) {
    if (o.B < 5) throw ValidationError("B must be >= 5, got " + std::to_string(o.B));
    if (o.N < 100) throw ValidationError("N must be >= 100, got " + std::to_string(o.N));
    if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    if (static_cast<long long>(std::floor(o.N * o.alpha)) < 1) {
        throw ValidationError("floor(N * alpha) is 0; increase N or alpha");
    }
    if (o.L.empty()) throw ValidationError("at least one L value is required");
    for (int L : o.L) {
        if (L < 1) throw ValidationError("L must be >= 1, got " + std::to_string(L));
    }
}

}  // namespace pcov
