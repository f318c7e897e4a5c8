#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace poisonguard {

inline constexpr std::size_t kEmbeddingDim = 512;

// One speaker embedding: a fixed 512-dimensional float vector.
struct EmbeddingVector {
    std::array<float, kEmbeddingDim> values{};

    float& operator[](std::size_t i) { return values[i]; }
    const float& operator[](std::size_t i) const { return values[i]; }
    static constexpr std::size_t size() { return kEmbeddingDim; }

    bool operator==(const EmbeddingVector&) const = default;
};

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return s;
}

inline double norm(const EmbeddingVector& v) { return std::sqrt(dot(v, v)); }

inline double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    double na = norm(a);
    double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

// Scale to unit Euclidean norm. Zero vectors are left untouched.
inline void normalize(EmbeddingVector& v) {
    double n = norm(v);
    if (n == 0.0) return;
    for (auto& x : v.values) x = static_cast<float>(x / n);
}

inline bool all_finite(const EmbeddingVector& v) {
    for (float x : v.values) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace poisonguard
