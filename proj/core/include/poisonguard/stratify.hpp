#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "poisonguard/error.hpp"
#include "poisonguard/rng.hpp"

namespace poisonguard {

// Assign each item to one of `folds` folds so that every class's count per
// fold is within 1 of proportional: per class, shuffle then deal round-robin.
// Throws StratificationError if any class has fewer members than folds.
inline std::vector<std::size_t> stratified_fold_assignment(const std::vector<int>& labels,
                                                           std::size_t folds,
                                                           std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("need at least 2 folds");

    std::vector<std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto c = static_cast<std::size_t>(labels[i]);
        if (by_class.size() <= c) by_class.resize(c + 1);
        by_class[c].push_back(i);
    }

    std::vector<std::size_t> fold_of(labels.size(), 0);
    Rng rng(derive_seed(seed, "stratify"));
    std::size_t class_idx = 0;
    for (auto& members : by_class) {
        if (!members.empty() && members.size() < folds) {
            throw StratificationError("class " + std::to_string(class_idx) + " has " +
                                      std::to_string(members.size()) + " members, fewer than " +
                                      std::to_string(folds) + " folds");
        }
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t k = 0; k < members.size(); ++k) {
            fold_of[members[k]] = k % folds;
        }
        ++class_idx;
    }
    return fold_of;
}

}  // namespace poisonguard
