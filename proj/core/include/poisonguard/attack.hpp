#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "poisonguard/corpus.hpp"

namespace poisonguard {

inline constexpr std::size_t kReplacedSlotsPerVictim = 5;

struct Replacement {
    std::array<std::size_t, kReplacedSlotsPerVictim> slots{};  // distinct, ascending
    std::string attacker_id;

    bool operator==(const Replacement&) const = default;
};

// Which accounts attack, which are hit, and which utterance slots each
// victim loses. One attacker may serve several victims.
struct PoisonPlan {
    std::set<std::string> attacker_ids;
    std::set<std::string> victim_ids;
    std::map<std::string, Replacement> replacements;  // victim_id -> replacement
    double attacker_fraction = 0.0;
    double victim_fraction = 0.0;

    bool operator==(const PoisonPlan&) const = default;
};

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

// Throws ConsistencyError if the plan violates its invariants
// (overlapping attacker/victim sets, bad slot lists, unknown attackers).
void validate_plan(const PoisonPlan& plan);

// Uniformly remove floor(fraction * n) accounts (min 1) as attackers.
// Returns (attacker accounts, corpus without them).
std::pair<std::vector<Account>, Corpus> select_attackers(const Corpus& corpus,
                                                         double fraction,
                                                         std::uint64_t seed);

// Uniformly pick floor(fraction * n) victim ids (min 1) from the corpus.
std::set<std::string> select_victims(const Corpus& corpus, double fraction,
                                     std::uint64_t seed);

// For each victim choose 5 distinct slots and one attacker, uniformly.
PoisonPlan build_plan(const std::vector<Account>& attackers,
                      const std::set<std::string>& victims, std::uint64_t seed);

// Returns a corpus where each victim's chosen slots hold the assigned
// attacker's same-index slot embeddings (all runs); labels and provenance
// updated; every other account is untouched.
Corpus apply_poison(const Corpus& corpus, const PoisonPlan& plan,
                    const std::vector<Account>& attacker_accounts);

// Stratified split on truth_label; per-label proportions match the corpus
// within one account, both sides keep at least one account of each label.
std::pair<Corpus, Corpus> split_train_test(const Corpus& corpus, const SplitSpec& spec);

// Audit/replay file: header, attacker roster, then one line per victim
// `victim_id<TAB>attacker_id<TAB>s0 s1 s2 s3 s4`.
void save_plan(const PoisonPlan& plan, const std::filesystem::path& path);
PoisonPlan load_plan(const std::filesystem::path& path);

}  // namespace poisonguard
