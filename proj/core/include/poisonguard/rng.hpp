#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace poisonguard {

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche, cheap, platform independent.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derive an independent sub-stream seed from a base seed and a tag.
// Used everywhere a module fans out into per-account / per-fold / per-cell
// work so that results never depend on execution order.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    return mix64(base ^ mix64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a offset basis
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return derive_seed(base, h);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t index) {
    return derive_seed(derive_seed(base, tag), index);
}

}  // namespace poisonguard
