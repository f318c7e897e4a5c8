#include "poisonguard/attack.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "poisonguard/error.hpp"
#include "poisonguard/rng.hpp"

namespace poisonguard {

namespace {

// floor(fraction * n), but never zero.
std::size_t fraction_count(double fraction, std::size_t n) {
    auto k = static_cast<std::size_t>(fraction * static_cast<double>(n));
    return std::max<std::size_t>(k, 1);
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

void validate_plan(const PoisonPlan& plan) {
    for (const auto& v : plan.victim_ids) {
        if (plan.attacker_ids.contains(v)) {
            throw ConsistencyError("account " + v + " is both attacker and victim");
        }
        if (!plan.replacements.contains(v)) {
            throw ConsistencyError("victim " + v + " has no replacement entry");
        }
    }
    for (const auto& [victim, rep] : plan.replacements) {
        if (!plan.victim_ids.contains(victim)) {
            throw ConsistencyError("replacement for non-victim " + victim);
        }
        if (!plan.attacker_ids.contains(rep.attacker_id)) {
            throw ConsistencyError("replacement references unknown attacker " + rep.attacker_id);
        }
        std::set<std::size_t> distinct(rep.slots.begin(), rep.slots.end());
        if (distinct.size() != kReplacedSlotsPerVictim) {
            throw ConsistencyError("victim " + victim + " has repeated slot indices");
        }
        if (*distinct.rbegin() >= kSlotsPerAccount) {
            throw ConsistencyError("victim " + victim + " has slot index out of range");
        }
    }
}

std::pair<std::vector<Account>, Corpus> select_attackers(const Corpus& corpus,
                                                         double fraction,
                                                         std::uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 0.5) {
        throw std::invalid_argument("attacker fraction must lie in (0, 0.5)");
    }
    if (corpus.accounts.empty()) {
        throw std::invalid_argument("select_attackers: empty corpus");
    }
    std::size_t k = fraction_count(fraction, corpus.accounts.size());
    Rng rng(derive_seed(seed, "attackers"));
    auto chosen = sample_indices(corpus.accounts.size(), k, rng);

    std::vector<Account> attackers;
    attackers.reserve(k);
    Corpus remaining;
    remaining.run_count = corpus.run_count;
    remaining.seed = corpus.seed;
    remaining.speakers = corpus.speakers;
    remaining.accounts.reserve(corpus.accounts.size() - k);

    std::size_t next = 0;
    for (std::size_t i = 0; i < corpus.accounts.size(); ++i) {
        if (next < chosen.size() && chosen[next] == i) {
            attackers.push_back(corpus.accounts[i]);
            ++next;
        } else {
            remaining.accounts.push_back(corpus.accounts[i]);
        }
    }
    return {std::move(attackers), std::move(remaining)};
}

std::set<std::string> select_victims(const Corpus& corpus, double fraction,
                                     std::uint64_t seed) {
    if (fraction <= 0.0 || fraction >= 1.0) {
        throw std::invalid_argument("victim fraction must lie in (0, 1)");
    }
    if (corpus.accounts.empty()) {
        throw std::invalid_argument("select_victims: empty corpus");
    }
    std::size_t k = fraction_count(fraction, corpus.accounts.size());
    Rng rng(derive_seed(seed, "victims"));
    auto chosen = sample_indices(corpus.accounts.size(), k, rng);

    std::set<std::string> victims;
    for (auto i : chosen) victims.insert(corpus.accounts[i].account_id);
    return victims;
}

PoisonPlan build_plan(const std::vector<Account>& attackers,
                      const std::set<std::string>& victims, std::uint64_t seed) {
    if (attackers.empty()) {
        throw std::invalid_argument("build_plan: attacker set is empty");
    }
    if (victims.empty()) {
        throw std::invalid_argument("build_plan: victim set is empty");
    }

    PoisonPlan plan;
    for (const auto& a : attackers) plan.attacker_ids.insert(a.account_id);
    plan.victim_ids = victims;

    Rng rng(derive_seed(seed, "plan"));
    std::uniform_int_distribution<std::size_t> pick_attacker(0, attackers.size() - 1);
    for (const auto& victim : victims) {  // std::set iteration: deterministic order
        Replacement rep;
        auto slots = sample_indices(kSlotsPerAccount, kReplacedSlotsPerVictim, rng);
        std::copy(slots.begin(), slots.end(), rep.slots.begin());
        rep.attacker_id = attackers[pick_attacker(rng)].account_id;
        plan.replacements.emplace(victim, std::move(rep));
    }
    validate_plan(plan);
    return plan;
}

Corpus apply_poison(const Corpus& corpus, const PoisonPlan& plan,
                    const std::vector<Account>& attacker_accounts) {
    validate_plan(plan);
    for (const auto& v : plan.victim_ids) {
        if (!corpus.find_account(v)) {
            throw ConsistencyError("plan victim " + v + " not in corpus");
        }
    }

    std::map<std::string, const Account*> attacker_by_id;
    for (const auto& a : attacker_accounts) attacker_by_id[a.account_id] = &a;

    Corpus poisoned = corpus;
    for (auto& acct : poisoned.accounts) {
        auto it = plan.replacements.find(acct.account_id);
        if (it == plan.replacements.end()) continue;

        const Replacement& rep = it->second;
        auto att = attacker_by_id.find(rep.attacker_id);
        if (att == attacker_by_id.end()) {
            throw ConsistencyError("attacker account " + rep.attacker_id + " not supplied");
        }
        const Account& attacker = *att->second;
        if (attacker.run_count() != corpus.run_count) {
            throw ConsistencyError("attacker " + rep.attacker_id + " run count mismatch");
        }
        for (std::size_t slot : rep.slots) {
            acct.slots[slot] = attacker.slots[slot];  // same-index slot, all runs
            acct.slot_provenance[slot] = attacker.owner;
        }
        acct.truth_label = TruthLabel::Victim;
    }
    return poisoned;
}

std::pair<Corpus, Corpus> split_train_test(const Corpus& corpus, const SplitSpec& spec) {
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0) {
        throw std::invalid_argument("train_fraction must lie in (0, 1)");
    }

    std::vector<std::size_t> victims, normals;
    for (std::size_t i = 0; i < corpus.accounts.size(); ++i) {
        (corpus.accounts[i].is_victim() ? victims : normals).push_back(i);
    }
    if (victims.size() < 2 || normals.size() < 2) {
        throw StratificationError("need at least 2 accounts of each label to split");
    }

    Rng rng(derive_seed(spec.seed, "split"));
    std::vector<bool> in_train(corpus.accounts.size(), false);
    for (auto* group : {&victims, &normals}) {
        std::shuffle(group->begin(), group->end(), rng);
        auto n = group->size();
        auto want = static_cast<std::size_t>(
            std::llround(spec.train_fraction * static_cast<double>(n)));
        want = std::clamp<std::size_t>(want, 1, n - 1);  // both sides keep the label
        for (std::size_t i = 0; i < want; ++i) in_train[(*group)[i]] = true;
    }

    Corpus train, test;
    train.run_count = test.run_count = corpus.run_count;
    train.seed = test.seed = corpus.seed;
    train.speakers = corpus.speakers;
    test.speakers = corpus.speakers;
    for (std::size_t i = 0; i < corpus.accounts.size(); ++i) {
        (in_train[i] ? train : test).accounts.push_back(corpus.accounts[i]);
    }
    return {std::move(train), std::move(test)};
}

void save_plan(const PoisonPlan& plan, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());

    std::ostringstream buf;
    buf << "poisonguard-plan v1 attacker_fraction=" << plan.attacker_fraction
        << " victim_fraction=" << plan.victim_fraction << "\n";
    buf << "attackers";
    for (const auto& a : plan.attacker_ids) buf << '\t' << a;
    buf << '\n';
    for (const auto& [victim, rep] : plan.replacements) {
        buf << victim << '\t' << rep.attacker_id << '\t';
        for (std::size_t i = 0; i < rep.slots.size(); ++i) {
            if (i) buf << ' ';
            buf << rep.slots[i];
        }
        buf << '\n';
    }
    out << buf.str();
    if (!out) throw IoError("write failed: " + path.string());
}

PoisonPlan load_plan(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());

    PoisonPlan plan;
    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw ParseError("empty plan file", 0);
    ++line_no;
    {
        std::istringstream hdr(line);
        std::string magic, version, af_kv, vf_kv;
        hdr >> magic >> version >> af_kv >> vf_kv;
        if (magic != "poisonguard-plan" || version != "v1") {
            throw ParseError("bad plan header", line_no);
        }
        if (af_kv.rfind("attacker_fraction=", 0) == 0) {
            plan.attacker_fraction = std::stod(af_kv.substr(18));
        }
        if (vf_kv.rfind("victim_fraction=", 0) == 0) {
            plan.victim_fraction = std::stod(vf_kv.substr(16));
        }
    }

    if (!std::getline(in, line)) throw ParseError("missing attacker roster", line_no);
    ++line_no;
    {
        std::istringstream roster(line);
        std::string tok;
        bool first = true;
        while (std::getline(roster, tok, '\t')) {
            if (first) {
                if (tok != "attackers") throw ParseError("expected attacker roster line", line_no);
                first = false;
            } else if (!tok.empty()) {
                plan.attacker_ids.insert(tok);
            }
        }
        if (first) throw ParseError("expected attacker roster line", line_no);
    }

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string victim, attacker, slots;
        if (!std::getline(row, victim, '\t') || !std::getline(row, attacker, '\t') ||
            !std::getline(row, slots)) {
            throw ParseError("bad plan row", line_no);
        }
        Replacement rep;
        rep.attacker_id = attacker;
        std::istringstream slot_stream(slots);
        std::size_t i = 0;
        std::size_t s;
        while (slot_stream >> s) {
            if (i >= kReplacedSlotsPerVictim) throw ParseError("too many slot indices", line_no);
            rep.slots[i++] = s;
        }
        if (i != kReplacedSlotsPerVictim) throw ParseError("expected 5 slot indices", line_no);
        plan.victim_ids.insert(victim);
        plan.replacements.emplace(victim, std::move(rep));
    }
    validate_plan(plan);
    return plan;
}

}  // namespace poisonguard
