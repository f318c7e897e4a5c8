#include <doctest.h>

#include <cmath>
#include <set>

#include "poisonguard/corpus.hpp"
#include "poisonguard/error.hpp"

using namespace poisonguard;

TEST_CASE("zero noise reproduces the owner identity exactly") {
    Corpus c = generate_corpus(4, 0.0f, 1, 99);
    REQUIRE(c.accounts.size() == 4);
    for (std::size_t i = 0; i < c.accounts.size(); ++i) {
        const auto& identity = c.speakers[i].identity;
        for (const auto& slot : c.accounts[i].slots) {
            for (const auto& emb : slot) {
                CHECK(emb == identity);  // bitwise
            }
        }
    }
}

TEST_CASE("corpus shape matches the requested scale") {
    // full-size run: 2334 accounts, 10 slots, 10 runs each
    Corpus c = generate_corpus(2334, 0.1f, 10, 5);
    CHECK(c.accounts.size() == 2334);
    CHECK(c.run_count == 10);
    for (std::size_t i : {std::size_t{0}, std::size_t{1166}, std::size_t{2333}}) {
        CHECK(c.accounts[i].slots.size() == 10);
        for (const auto& slot : c.accounts[i].slots) CHECK(slot.size() == 10);
    }
    validate_corpus(c);
}

TEST_CASE("within-speaker cosine similarity exceeds cross-speaker") {
    Corpus c = generate_corpus(50, 0.05f, 1, 17);

    // exhaustive pairwise oracle over all embeddings
    double within_sum = 0.0, cross_sum = 0.0;
    std::size_t within_n = 0, cross_n = 0;
    for (std::size_t a = 0; a < c.accounts.size(); ++a) {
        for (std::size_t b = a; b < c.accounts.size(); ++b) {
            for (std::size_t i = 0; i < kSlotsPerAccount; ++i) {
                std::size_t j_start = (a == b) ? i + 1 : 0;
                for (std::size_t j = j_start; j < kSlotsPerAccount; ++j) {
                    double cs = cosine_similarity(c.accounts[a].slots[i][0],
                                                  c.accounts[b].slots[j][0]);
                    if (a == b) {
                        within_sum += cs;
                        ++within_n;
                    } else {
                        cross_sum += cs;
                        ++cross_n;
                    }
                }
            }
        }
    }
    double within_mean = within_sum / static_cast<double>(within_n);
    double cross_mean = cross_sum / static_cast<double>(cross_n);
    CHECK(within_mean > cross_mean);
}

TEST_CASE("separation also holds at sigma just below 0.3") {
    Corpus c = generate_corpus(50, 0.29f, 1, 23);
    double within = 0.0, cross = 0.0;
    std::size_t wn = 0, cn = 0;
    for (std::size_t a = 0; a < c.accounts.size(); ++a) {
        for (std::size_t b = a; b < c.accounts.size(); ++b) {
            for (std::size_t i = 0; i < kSlotsPerAccount; ++i) {
                std::size_t j0 = (a == b) ? i + 1 : 0;
                for (std::size_t j = j0; j < kSlotsPerAccount; ++j) {
                    double cs = cosine_similarity(c.accounts[a].slots[i][0],
                                                  c.accounts[b].slots[j][0]);
                    (a == b ? within : cross) += cs;
                    (a == b ? wn : cn) += 1;
                }
            }
        }
    }
    CHECK(within / static_cast<double>(wn) > cross / static_cast<double>(cn));
}

TEST_CASE("generation is deterministic per seed") {
    Corpus a = generate_corpus(12, 0.2f, 3, 42);
    Corpus b = generate_corpus(12, 0.2f, 3, 42);
    CHECK(corpus_data_equal(a, b));
    CHECK(a.speakers == b.speakers);

    Corpus c = generate_corpus(12, 0.2f, 3, 43);
    CHECK_FALSE(corpus_data_equal(a, c));
}

TEST_CASE("every generated embedding has unit norm") {
    Corpus c = generate_corpus(10, 0.3f, 2, 7);
    for (const auto& acct : c.accounts) {
        for (const auto& slot : acct.slots) {
            for (const auto& emb : slot) {
                CHECK(std::abs(norm(emb) - 1.0) < 1e-5);
                CHECK(all_finite(emb));
            }
        }
    }
}

TEST_CASE("one sampler serves every account: same identity, same draw") {
    // Both labels' embeddings come from sample_embedding parameterized only
    // by (identity, sigma); two speakers sharing an identity and RNG state
    // produce identical output.
    Rng rng1(123), rng2(123);
    Corpus c = generate_corpus(2, 0.0f, 1, 11);
    const auto& identity = c.speakers[0].identity;
    EmbeddingVector e1 = sample_embedding(identity, 0.13f, rng1);
    EmbeddingVector e2 = sample_embedding(identity, 0.13f, rng2);
    CHECK(e1 == e2);
}

TEST_CASE("distinct speakers get distinct identifiers") {
    Corpus c = generate_corpus(40, 0.1f, 1, 3);
    std::set<std::string> ids;
    for (const auto& s : c.speakers) ids.insert(s.speaker_id);
    CHECK(ids.size() == 40);
}

TEST_CASE("generator argument validation") {
    CHECK_THROWS_AS(generate_corpus(1, 0.1f, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(generate_corpus(10, -0.1f, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(generate_corpus(10, 0.1f, 0, 0), std::invalid_argument);
}
