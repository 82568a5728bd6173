#include "pcov/random.hpp"

#include <array>

namespace pcov {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) noexcept {
    std::uint64_t h = mix64(seed);
    for (std::uint64_t id : ids) h = mix64(h ^ mix64(id + 0x632be59bd9b4e019ULL));
    return h;
}

Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    const std::uint64_t key = stream_key(seed, ids);
    // Expand the key into a full seed sequence so nearby keys do not share state.
    std::array<std::uint32_t, 8> words{};
    std::uint64_t s = key;
    for (std::size_t i = 0; i < words.size(); i += 2) {
        s = mix64(s);
        words[i] = static_cast<std::uint32_t>(s);
        words[i + 1] = static_cast<std::uint32_t>(s >> 32);
    }
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

}  // namespace pcov
