#include "minima_drift/rng.hpp"

namespace mdrift {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t derive_key(std::uint64_t seed, std::string_view label, std::uint64_t replica, std::uint64_t step) {
    std::uint64_t k = mix64(seed + 0x632BE59BD9B4E019ULL);
    k = mix64(k ^ hash_label(label));
    k = mix64(k ^ (replica * 0xD6E8FEB86659FD93ULL + 1));
    return mix64(k ^ (step * 0xA0761D6478BD642FULL + 7));
}

}  // namespace mdrift
