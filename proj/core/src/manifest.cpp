#include "poisonguard/manifest.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "poisonguard/error.hpp"

namespace poisonguard {

namespace {

constexpr char kTextMagic[] = "poisonguard-corpus v1";
constexpr std::uint32_t kBinaryMagic = 0x42434750;  // "PGCB"

bool is_binary_path(const std::filesystem::path& path) {
    return path.extension() == ".pgb";
}

// --- text helpers ---------------------------------------------------------

void write_float(std::string& out, float v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);  // shortest representation, exact round-trip
}

float parse_float(std::string_view tok, std::size_t line_no) {
    float v{};
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
        throw ParseError("bad float '" + std::string(tok) + "'", line_no);
    }
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t end = s.find(sep, start);
        if (end == std::string_view::npos) {
            out.push_back(s.substr(start));
            break;
        }
        out.push_back(s.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

std::string label_name(TruthLabel l) {
    return l == TruthLabel::Victim ? "victim" : "normal";
}

TruthLabel parse_label(std::string_view s, std::size_t line_no) {
    if (s == "normal") return TruthLabel::Normal;
    if (s == "victim") return TruthLabel::Victim;
    throw ParseError("unknown label '" + std::string(s) + "'", line_no);
}

void save_text(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);  // binary: fixed '\n' on all platforms
    if (!out) throw IoError("cannot open for writing: " + path.string());

    std::string buf;
    buf.reserve(1 << 20);
    buf += kTextMagic;
    buf += " dim=" + std::to_string(kEmbeddingDim);
    buf += " runs=" + std::to_string(corpus.run_count);
    buf += '\n';

    for (const auto& acct : corpus.accounts) {
        buf += acct.account_id;
        buf += '\t';
        buf += acct.owner;
        buf += '\t';
        buf += label_name(acct.truth_label);
        if (acct.truth_label == TruthLabel::Victim) {
            std::string prov;
            for (std::size_t slot = 0; slot < acct.slot_provenance.size(); ++slot) {
                if (acct.slot_provenance[slot] == acct.owner) continue;
                if (!prov.empty()) prov += ',';
                prov += std::to_string(slot) + "=" + acct.slot_provenance[slot];
            }
            if (!prov.empty()) {
                buf += '\t';
                buf += prov;
            }
        }
        buf += '\n';
        for (std::size_t slot = 0; slot < acct.slots.size(); ++slot) {
            for (std::size_t run = 0; run < acct.slots[slot].size(); ++run) {
                buf += std::to_string(slot);
                buf += '\t';
                buf += std::to_string(run);
                buf += '\t';
                const auto& emb = acct.slots[slot][run];
                for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
                    if (i) buf += ' ';
                    write_float(buf, emb[i]);
                }
                buf += '\n';
            }
        }
        if (buf.size() > (1 << 20)) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Corpus load_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());

    std::string line;
    std::size_t line_no = 0;

    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };

    if (!next_line()) throw ParseError("empty manifest", 0);
    {
        std::istringstream hdr(line);
        std::string magic, version, dim_kv, runs_kv;
        hdr >> magic >> version >> dim_kv >> runs_kv;
        if (magic != "poisonguard-corpus" || version != "v1") {
            throw ParseError("bad header '" + line + "'", line_no);
        }
        if (dim_kv.rfind("dim=", 0) != 0 || runs_kv.rfind("runs=", 0) != 0) {
            throw ParseError("bad header fields '" + line + "'", line_no);
        }
        if (dim_kv.substr(4) != std::to_string(kEmbeddingDim)) {
            throw DimensionError("manifest dim " + dim_kv.substr(4) + " != " +
                                 std::to_string(kEmbeddingDim));
        }
    }

    Corpus corpus;
    std::size_t runs = 0;
    {
        // header already validated above; re-extract runs
        auto pos = line.find("runs=");
        runs = std::stoul(line.substr(pos + 5));
    }
    if (runs < 1) throw ParseError("runs must be >= 1", 1);
    corpus.run_count = static_cast<std::uint32_t>(runs);

    while (next_line()) {
        auto fields = split(line, '\t');
        if (fields.size() < 3 || fields.size() > 4) {
            throw ParseError("expected account line with 3 or 4 tab fields", line_no);
        }
        Account acct;
        acct.account_id = std::string(fields[0]);
        acct.owner = std::string(fields[1]);
        acct.truth_label = parse_label(fields[2], line_no);
        acct.slot_provenance.assign(kSlotsPerAccount, acct.owner);
        if (fields.size() == 4) {
            for (auto entry : split(fields[3], ',')) {
                auto eq = entry.find('=');
                if (eq == std::string_view::npos) {
                    throw ParseError("bad provenance entry '" + std::string(entry) + "'", line_no);
                }
                std::size_t slot = 0;
                auto res = std::from_chars(entry.data(), entry.data() + eq, slot);
                if (res.ec != std::errc{} || slot >= kSlotsPerAccount) {
                    throw ParseError("bad provenance slot index", line_no);
                }
                acct.slot_provenance[slot] = std::string(entry.substr(eq + 1));
            }
        }

        acct.slots.assign(kSlotsPerAccount, std::vector<EmbeddingVector>(runs));
        std::vector<std::vector<bool>> seen(kSlotsPerAccount, std::vector<bool>(runs, false));
        for (std::size_t k = 0; k < kSlotsPerAccount * runs; ++k) {
            if (!next_line()) {
                throw ParseError("truncated account " + acct.account_id, line_no);
            }
            auto parts = split(line, '\t');
            if (parts.size() != 3) {
                throw ParseError("expected 'slot<TAB>run<TAB>floats'", line_no);
            }
            std::size_t slot = 0, run = 0;
            auto r1 = std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), slot);
            auto r2 = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), run);
            if (r1.ec != std::errc{} || r2.ec != std::errc{}) {
                throw ParseError("bad slot/run index", line_no);
            }
            if (slot >= kSlotsPerAccount || run >= runs) {
                throw ParseError("slot/run index out of range", line_no);
            }
            if (seen[slot][run]) {
                throw ParseError("duplicate slot/run record", line_no);
            }
            seen[slot][run] = true;

            auto toks = split(parts[2], ' ');
            if (toks.size() != kEmbeddingDim) {
                throw DimensionError("vector length " + std::to_string(toks.size()) +
                                     " != 512 at line " + std::to_string(line_no));
            }
            auto& emb = acct.slots[slot][run];
            for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
                emb[i] = parse_float(toks[i], line_no);
            }
        }
        corpus.accounts.push_back(std::move(acct));
    }

    return corpus;
}

// --- binary helpers --------------------------------------------------------

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_string(std::ostream& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("truncated binary manifest", 0);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in) {
    std::uint64_t lo = get_u32(in);
    std::uint64_t hi = get_u32(in);
    return lo | (hi << 32);
}

std::string get_string(std::istream& in) {
    std::uint32_t n = get_u32(in);
    if (n > (1u << 20)) throw ParseError("unreasonable string length in binary manifest", 0);
    std::string s(n, '\0');
    if (!in.read(s.data(), n)) throw ParseError("truncated binary manifest", 0);
    return s;
}

void save_binary(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());

    put_u32(out, kBinaryMagic);
    put_u32(out, 1);  // version
    put_u32(out, static_cast<std::uint32_t>(kEmbeddingDim));
    put_u32(out, corpus.run_count);
    put_u64(out, corpus.accounts.size());

    static_assert(sizeof(float) == 4);
    for (const auto& acct : corpus.accounts) {
        put_string(out, acct.account_id);
        put_string(out, acct.owner);
        out.put(acct.truth_label == TruthLabel::Victim ? 1 : 0);
        std::uint32_t n_prov = 0;
        for (std::size_t slot = 0; slot < acct.slot_provenance.size(); ++slot) {
            if (acct.slot_provenance[slot] != acct.owner) ++n_prov;
        }
        put_u32(out, n_prov);
        for (std::size_t slot = 0; slot < acct.slot_provenance.size(); ++slot) {
            if (acct.slot_provenance[slot] == acct.owner) continue;
            put_u32(out, static_cast<std::uint32_t>(slot));
            put_string(out, acct.slot_provenance[slot]);
        }
        for (std::size_t slot = 0; slot < acct.slots.size(); ++slot) {
            for (std::size_t run = 0; run < acct.slots[slot].size(); ++run) {
                put_u32(out, static_cast<std::uint32_t>(slot));
                put_u32(out, static_cast<std::uint32_t>(run));
                // little-endian host assumed; bytes written as stored
                out.write(reinterpret_cast<const char*>(acct.slots[slot][run].values.data()),
                          kEmbeddingDim * sizeof(float));
            }
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Corpus load_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());

    if (get_u32(in) != kBinaryMagic) throw ParseError("bad binary magic", 0);
    if (get_u32(in) != 1) throw ParseError("unsupported binary version", 0);
    std::uint32_t dim = get_u32(in);
    if (dim != kEmbeddingDim) {
        throw DimensionError("binary manifest dim " + std::to_string(dim) + " != 512");
    }
    Corpus corpus;
    corpus.run_count = get_u32(in);
    if (corpus.run_count < 1) throw ParseError("runs must be >= 1", 0);
    std::uint64_t n_accounts = get_u64(in);

    for (std::uint64_t a = 0; a < n_accounts; ++a) {
        Account acct;
        acct.account_id = get_string(in);
        acct.owner = get_string(in);
        int label = in.get();
        if (label != 0 && label != 1) throw ParseError("bad label byte", 0);
        acct.truth_label = label ? TruthLabel::Victim : TruthLabel::Normal;
        acct.slot_provenance.assign(kSlotsPerAccount, acct.owner);
        std::uint32_t n_prov = get_u32(in);
        for (std::uint32_t i = 0; i < n_prov; ++i) {
            std::uint32_t slot = get_u32(in);
            if (slot >= kSlotsPerAccount) throw ParseError("provenance slot out of range", 0);
            acct.slot_provenance[slot] = get_string(in);
        }
        acct.slots.assign(kSlotsPerAccount, std::vector<EmbeddingVector>(corpus.run_count));
        for (std::size_t k = 0; k < kSlotsPerAccount * corpus.run_count; ++k) {
            std::uint32_t slot = get_u32(in);
            std::uint32_t run = get_u32(in);
            if (slot >= kSlotsPerAccount || run >= corpus.run_count) {
                throw ParseError("slot/run out of range in binary manifest", 0);
            }
            if (!in.read(reinterpret_cast<char*>(acct.slots[slot][run].values.data()),
                         kEmbeddingDim * sizeof(float))) {
                throw ParseError("truncated binary manifest", 0);
            }
        }
        corpus.accounts.push_back(std::move(acct));
    }
    return corpus;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    if (is_binary_path(path)) {
        save_binary(corpus, path);
    } else {
        save_text(corpus, path);
    }
}

Corpus load_manifest(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw IoError("manifest not found: " + path.string());
    }
    Corpus corpus = is_binary_path(path) ? load_binary(path) : load_text(path);

    std::set<std::string> ids;
    for (const auto& acct : corpus.accounts) {
        if (!ids.insert(acct.account_id).second) {
            throw DuplicateError("duplicate account_id: " + acct.account_id);
        }
    }
    return corpus;
}

}  // namespace poisonguard
