#include "poisonguard/pairing.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "poisonguard/error.hpp"
#include "poisonguard/rng.hpp"

namespace poisonguard {

std::array<float, kGridSize> interleave(const EmbeddingVector& a, const EmbeddingVector& b) {
    static_assert(2 * kEmbeddingDim == kGridSize);
    std::array<float, kGridSize> out;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        out[2 * i] = a[i];
        out[2 * i + 1] = b[i];
    }
    return out;
}

std::pair<EmbeddingVector, EmbeddingVector> deinterleave(const std::array<float, kGridSize>& grid) {
    EmbeddingVector a, b;
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        a[i] = grid[2 * i];
        b[i] = grid[2 * i + 1];
    }
    return {a, b};
}

namespace {

EmbeddingVector mean_of_slots(const Account& account, const std::vector<std::size_t>& slots,
                              std::uint32_t run_index) {
    EmbeddingVector mean;
    std::array<double, kEmbeddingDim> acc{};
    for (std::size_t slot : slots) {
        const auto& emb = account.slots[slot][run_index];
        for (std::size_t i = 0; i < kEmbeddingDim; ++i) acc[i] += emb[i];
    }
    for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
        mean[i] = static_cast<float>(acc[i] / static_cast<double>(slots.size()));
    }
    return mean;
}

}  // namespace

std::pair<EmbeddingVector, EmbeddingVector> account_pair_vectors(const Account& account,
                                                                 std::uint32_t run_index,
                                                                 std::uint64_t seed) {
    if (account.slots.size() != kSlotsPerAccount) {
        throw DimensionError("account " + account.account_id + " does not have 10 slots");
    }
    if (run_index >= account.run_count()) {
        throw std::out_of_range("run_index " + std::to_string(run_index) +
                                " out of range for account " + account.account_id);
    }

    std::vector<std::size_t> order(kSlotsPerAccount);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<std::size_t> half_a(order.begin(), order.begin() + kSlotsPerAccount / 2);
    std::vector<std::size_t> half_b(order.begin() + kSlotsPerAccount / 2, order.end());
    return {mean_of_slots(account, half_a, run_index), mean_of_slots(account, half_b, run_index)};
}

std::vector<PairedSample> build_dataset(const Corpus& corpus, std::uint64_t seed) {
    std::vector<PairedSample> samples;
    samples.reserve(corpus.accounts.size() * corpus.run_count);

    for (const auto& acct : corpus.accounts) {
        std::uint64_t acct_seed = derive_seed(seed, acct.account_id);
        for (std::uint32_t run = 0; run < corpus.run_count; ++run) {
            auto [a, b] = account_pair_vectors(acct, run, derive_seed(acct_seed, run));
            PairedSample s;
            s.grid = interleave(a, b);
            s.label = acct.is_victim() ? SampleLabel::Attack : SampleLabel::Normal;
            s.account_id = acct.account_id;
            s.run_index = run;
            samples.push_back(std::move(s));
        }
    }
    return samples;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated sample file", 0);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_dataset(const std::vector<PairedSample>& samples, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());

    out << "pgpairs v1 n=" << samples.size() << "\n";
    for (const auto& s : samples) {
        put_u32(out, static_cast<std::uint32_t>(s.account_id.size()));
        out.write(s.account_id.data(), static_cast<std::streamsize>(s.account_id.size()));
        put_u32(out, s.run_index);
        out.put(static_cast<char>(s.label));
        out.write(reinterpret_cast<const char*>(s.grid.data()), kGridSize * sizeof(float));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<PairedSample> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());

    std::string header;
    if (!std::getline(in, header)) throw ParseError("empty sample file", 0);
    std::size_t n = 0;
    if (header.rfind("pgpairs v1 n=", 0) != 0) throw ParseError("bad sample header", 1);
    n = std::stoul(header.substr(13));

    std::vector<PairedSample> samples;
    samples.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        PairedSample s;
        std::uint32_t len = get_u32(in);
        if (len > (1u << 20)) throw ParseError("unreasonable id length", 0);
        s.account_id.resize(len);
        if (!in.read(s.account_id.data(), len)) throw ParseError("truncated sample file", 0);
        s.run_index = get_u32(in);
        int label = in.get();
        if (label != 0 && label != 1) throw ParseError("bad label byte", 0);
        s.label = static_cast<SampleLabel>(label);
        if (!in.read(reinterpret_cast<char*>(s.grid.data()), kGridSize * sizeof(float))) {
            throw ParseError("truncated sample file", 0);
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

}  // namespace poisonguard
