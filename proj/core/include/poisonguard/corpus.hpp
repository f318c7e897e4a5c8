#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poisonguard/embedding.hpp"
#include "poisonguard/rng.hpp"

namespace poisonguard {

inline constexpr std::size_t kSlotsPerAccount = 10;

enum class TruthLabel { Normal, Victim };

// Generative stand-in for an embedder's per-speaker output distribution:
// a unit-norm identity vector plus isotropic Gaussian noise, renormalized.
struct SyntheticSpeakerModel {
    std::string speaker_id;
    EmbeddingVector identity;
    float noise_sigma = 0.0f;

    bool operator==(const SyntheticSpeakerModel&) const = default;
};

// One enrolled account: 10 utterance slots, each holding one embedding per
// embedding run. slot_provenance records which speaker actually produced
// the embedding in each slot; it differs from `owner` only after poisoning.
struct Account {
    std::string account_id;
    std::string owner;
    // slots[slot][run], slots.size() == kSlotsPerAccount, inner size == run_count
    std::vector<std::vector<EmbeddingVector>> slots;
    std::vector<std::string> slot_provenance;  // one entry per slot
    TruthLabel truth_label = TruthLabel::Normal;

    std::uint32_t run_count() const {
        return slots.empty() ? 0 : static_cast<std::uint32_t>(slots[0].size());
    }
    bool is_victim() const { return truth_label == TruthLabel::Victim; }

    bool operator==(const Account&) const = default;
};

struct Corpus {
    std::vector<Account> accounts;
    std::vector<SyntheticSpeakerModel> speakers;  // empty when ingested externally
    std::uint32_t run_count = 1;
    std::uint64_t seed = 0;

    std::size_t size() const { return accounts.size(); }
    const Account* find_account(const std::string& id) const;
};

// Accounts and run_count only; the manifest format does not persist the
// generator seed or the synthetic speaker models.
bool corpus_data_equal(const Corpus& a, const Corpus& b);

// Draw one utterance embedding: normalize(identity + eps), eps ~ N(0, sigma)
// per coordinate. The single sampler used for every slot of every account.
EmbeddingVector sample_embedding(const EmbeddingVector& identity, float sigma, Rng& rng);

// Uniform draw on the unit hypersphere (normalized Gaussian vector).
EmbeddingVector random_unit_vector(Rng& rng);

// Build a synthetic corpus of n_accounts accounts, each owned by a distinct
// speaker, with run_count independently drawn embeddings per utterance slot.
// Runs model separately initialized embedder instances: every run beyond the
// first lives in its own random signed-permutation frame (an isometry, so
// unit norms and within-run cosines are preserved while coordinates stop
// lining up across runs). Deterministic for a fixed seed.
Corpus generate_corpus(std::size_t n_accounts, float noise_sigma,
                       std::uint32_t run_count, std::uint64_t seed);

// Structural sanity check used by tests and ingestion: slot counts, run
// counts, finiteness, label/provenance agreement, unique account ids.
void validate_corpus(const Corpus& corpus);

}  // namespace poisonguard
