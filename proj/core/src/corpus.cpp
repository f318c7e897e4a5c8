#include "poisonguard/corpus.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <stdexcept>

#include "poisonguard/error.hpp"

namespace poisonguard {

const Account* Corpus::find_account(const std::string& id) const {
    for (const auto& a : accounts) {
        if (a.account_id == id) return &a;
    }
    return nullptr;
}

bool corpus_data_equal(const Corpus& a, const Corpus& b) {
    return a.run_count == b.run_count && a.accounts == b.accounts;
}

EmbeddingVector sample_embedding(const EmbeddingVector& identity, float sigma, Rng& rng) {
    if (sigma == 0.0f) return identity;  // identity is already unit norm
    std::normal_distribution<double> noise(0.0, sigma);
    EmbeddingVector e;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        e[i] = static_cast<float>(identity[i] + noise(rng));
    }
    normalize(e);
    return e;
}

EmbeddingVector random_unit_vector(Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    EmbeddingVector v;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        v[i] = static_cast<float>(gauss(rng));
    }
    normalize(v);
    return v;
}

namespace {

std::string padded_id(const char* prefix, std::size_t i) {
    std::string n = std::to_string(i);
    std::string out = prefix;
    for (std::size_t k = n.size(); k < 4; ++k) out += '0';
    return out + n;
}

// Each embedding run models a separately initialized embedder instance, so
// absolute coordinates do not line up across runs. A per-run random signed
// permutation is an exact isometry: unit norms and within-run cosine
// geometry are untouched while cross-run frames decorrelate. Run 0 keeps
// the identity frame, so single-run corpora see the raw sampler output.
struct RunFrame {
    std::array<std::uint16_t, kEmbeddingDim> perm;
    std::array<float, kEmbeddingDim> sign;
    bool is_identity = true;

    static RunFrame identity() {
        RunFrame f;
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
            f.perm[i] = static_cast<std::uint16_t>(i);
            f.sign[i] = 1.0f;
        }
        return f;
    }

    static RunFrame random(std::uint64_t seed) {
        RunFrame f = identity();
        f.is_identity = false;
        Rng rng(seed);
        std::shuffle(f.perm.begin(), f.perm.end(), rng);
        std::uniform_int_distribution<int> coin(0, 1);
        for (auto& s : f.sign) s = coin(rng) ? 1.0f : -1.0f;
        return f;
    }

    EmbeddingVector apply(const EmbeddingVector& e) const {
        if (is_identity) return e;
        EmbeddingVector out;
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) out[i] = sign[i] * e[perm[i]];
        return out;
    }
};

}  // namespace

Corpus generate_corpus(std::size_t n_accounts, float noise_sigma,
                       std::uint32_t run_count, std::uint64_t seed) {
    if (n_accounts < 2) {
        throw std::invalid_argument("generate_corpus: need at least 2 accounts");
    }
    if (noise_sigma < 0.0f) {
        throw std::invalid_argument("generate_corpus: noise_sigma must be >= 0");
    }
    if (run_count < 1) {
        throw std::invalid_argument("generate_corpus: run_count must be >= 1");
    }

    Corpus corpus;
    corpus.run_count = run_count;
    corpus.seed = seed;
    corpus.accounts.reserve(n_accounts);
    corpus.speakers.reserve(n_accounts);

    Rng identity_rng(derive_seed(seed, "identities"));
    for (std::size_t i = 0; i < n_accounts; ++i) {
        SyntheticSpeakerModel spk;
        spk.speaker_id = padded_id("spk", i);
        spk.identity = random_unit_vector(identity_rng);
        spk.noise_sigma = noise_sigma;
        corpus.speakers.push_back(std::move(spk));
    }

    std::vector<RunFrame> frames;
    frames.reserve(run_count);
    frames.push_back(RunFrame::identity());
    for (std::uint32_t run = 1; run < run_count; ++run) {
        frames.push_back(RunFrame::random(derive_seed(seed, "run-frame", run)));
    }

    for (std::size_t i = 0; i < n_accounts; ++i) {
        const auto& spk = corpus.speakers[i];
        Account acct;
        acct.account_id = padded_id("acct", i);
        acct.owner = spk.speaker_id;
        acct.truth_label = TruthLabel::Normal;
        acct.slots.resize(kSlotsPerAccount);
        acct.slot_provenance.assign(kSlotsPerAccount, spk.speaker_id);

        // Per-account stream so generation order never matters.
        Rng rng(derive_seed(seed, "utterances", i));
        for (std::size_t slot = 0; slot < kSlotsPerAccount; ++slot) {
            acct.slots[slot].reserve(run_count);
            for (std::uint32_t run = 0; run < run_count; ++run) {
                acct.slots[slot].push_back(
                    frames[run].apply(sample_embedding(spk.identity, noise_sigma, rng)));
            }
        }
        corpus.accounts.push_back(std::move(acct));
    }
    return corpus;
}

void validate_corpus(const Corpus& corpus) {
    std::set<std::string> ids;
    for (const auto& acct : corpus.accounts) {
        if (!ids.insert(acct.account_id).second) {
            throw DuplicateError("duplicate account_id: " + acct.account_id);
        }
        if (acct.slots.size() != kSlotsPerAccount) {
            throw DimensionError("account " + acct.account_id + " has " +
                                 std::to_string(acct.slots.size()) + " slots, expected 10");
        }
        if (acct.slot_provenance.size() != kSlotsPerAccount) {
            throw DimensionError("account " + acct.account_id + " has incomplete provenance");
        }
        bool any_foreign = false;
        for (std::size_t slot = 0; slot < kSlotsPerAccount; ++slot) {
            if (acct.slots[slot].size() != corpus.run_count) {
                throw DimensionError("account " + acct.account_id + " slot " +
                                     std::to_string(slot) + " has inconsistent run count");
            }
            for (const auto& emb : acct.slots[slot]) {
                if (!all_finite(emb)) {
                    throw NumericError("non-finite embedding in account " + acct.account_id);
                }
            }
            if (acct.slot_provenance[slot] != acct.owner) any_foreign = true;
        }
        const bool labeled_victim = acct.truth_label == TruthLabel::Victim;
        if (any_foreign && !labeled_victim) {
            throw ConsistencyError("account " + acct.account_id +
                                   " has foreign slots but is labeled normal");
        }
    }
    if (!corpus.speakers.empty()) {
        std::set<std::string> spk_ids;
        for (const auto& s : corpus.speakers) {
            if (!spk_ids.insert(s.speaker_id).second) {
                throw DuplicateError("duplicate speaker_id: " + s.speaker_id);
            }
        }
        for (const auto& acct : corpus.accounts) {
            if (!spk_ids.contains(acct.owner)) {
                throw ConsistencyError("account " + acct.account_id +
                                       " references unknown speaker " + acct.owner);
            }
        }
    }
}

}  // namespace poisonguard
