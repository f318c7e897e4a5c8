#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "poisonguard/corpus.hpp"

namespace poisonguard {

inline constexpr std::size_t kGridSide = 32;
inline constexpr std::size_t kGridSize = kGridSide * kGridSide;  // 1024

enum class SampleLabel : std::uint8_t { Normal = 0, Attack = 1 };

// One detector input: a 32x32 grid built by element-interleaving two
// account-level vectors, reshaped row-major.
struct PairedSample {
    std::array<float, kGridSize> grid{};
    SampleLabel label = SampleLabel::Normal;
    std::string account_id;
    std::uint32_t run_index = 0;

    bool operator==(const PairedSample&) const = default;
};

// out[2i] = a[i], out[2i+1] = b[i].
std::array<float, kGridSize> interleave(const EmbeddingVector& a, const EmbeddingVector& b);

// Inverse of interleave; used as the oracle in tests and kept here so both
// directions share the indexing convention.
std::pair<EmbeddingVector, EmbeddingVector> deinterleave(const std::array<float, kGridSize>& grid);

// Randomly split the 10 slots into two disjoint halves of 5 and mean-pool
// each half's run-index embeddings. Deterministic per seed.
std::pair<EmbeddingVector, EmbeddingVector> account_pair_vectors(const Account& account,
                                                                 std::uint32_t run_index,
                                                                 std::uint64_t seed);

// One PairedSample per (account, run); grid = interleave of the two half
// means, label from the account truth label. Per-account RNG streams are
// derived from (seed, account_id), so account order does not matter.
std::vector<PairedSample> build_dataset(const Corpus& corpus, std::uint64_t seed);

// Binary sample file: header `pgpairs v1 n=<N>`, then per sample
// account_id, run_index, label byte, 1024 little-endian 32-bit floats.
void save_dataset(const std::vector<PairedSample>& samples, const std::filesystem::path& path);
std::vector<PairedSample> load_dataset(const std::filesystem::path& path);

}  // namespace poisonguard
