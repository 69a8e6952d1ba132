#include "countercast/rng.hpp"

namespace ccast {

namespace {

// splitmix64 finalizer; decorrelates structured seed inputs.
std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t global_seed, std::string_view label) {
    return mix64(mix64(global_seed) ^ fnv1a(label));
}

std::uint64_t substream_seed(std::uint64_t global_seed, std::uint64_t index) {
    return mix64(mix64(global_seed) ^ mix64(index + 0x51ed2701ULL));
}

}  // namespace ccast
