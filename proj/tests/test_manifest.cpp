#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "poisonguard/attack.hpp"
#include "poisonguard/error.hpp"
#include "poisonguard/manifest.hpp"

using namespace poisonguard;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    auto dir = fs::temp_directory_path() / "pg_manifest_tests";
    fs::create_directories(dir);
    return dir / name;
}

Corpus poisoned_fixture(std::uint64_t seed) {
    Corpus corpus = generate_corpus(40, 0.1f, 2, seed);
    auto [attackers, remaining] = select_attackers(corpus, 0.05, seed);
    auto victims = select_victims(remaining, 0.1, seed);
    PoisonPlan plan = build_plan(attackers, victims, seed);
    return apply_poison(remaining, plan, attackers);
}

}  // namespace

TEST_CASE("text manifest round trip equals the saved corpus") {
    Corpus corpus = generate_corpus(2, 0.1f, 1, 4);
    auto path = temp_file("round_trip.txt");
    save_corpus(corpus, path);
    Corpus loaded = load_manifest(path);
    CHECK(loaded.run_count == 1);
    CHECK(corpus_data_equal(corpus, loaded));
    CHECK(loaded.speakers.empty());
}

TEST_CASE("binary manifest round trip, including provenance") {
    Corpus corpus = poisoned_fixture(21);
    auto path = temp_file("round_trip.pgb");
    save_corpus(corpus, path);
    Corpus loaded = load_manifest(path);
    CHECK(corpus_data_equal(corpus, loaded));

    // text variant carries the same data
    auto tpath = temp_file("round_trip_poisoned.txt");
    save_corpus(corpus, tpath);
    CHECK(corpus_data_equal(load_manifest(tpath), corpus));
}

TEST_CASE("saving twice yields identical bytes") {
    Corpus corpus = generate_corpus(5, 0.2f, 2, 9);
    auto p1 = temp_file("det_a.txt"), p2 = temp_file("det_b.txt");
    save_corpus(corpus, p1);
    save_corpus(corpus, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}

TEST_CASE("wrong vector length is a dimension error") {
    auto path = temp_file("short_vector.txt");
    std::ofstream out(path);
    out << "poisonguard-corpus v1 dim=512 runs=1\n";
    out << "a1\tspk1\tnormal\n";
    for (int slot = 0; slot < 10; ++slot) {
        out << slot << "\t0\t";
        int dims = slot == 3 ? 511 : 512;  // one short record
        for (int i = 0; i < dims; ++i) out << (i ? " " : "") << "0.1";
        out << "\n";
    }
    out.close();
    CHECK_THROWS_AS(load_manifest(path), DimensionError);
}

TEST_CASE("malformed records report the offending line") {
    auto path = temp_file("malformed.txt");
    std::ofstream out(path);
    out << "poisonguard-corpus v1 dim=512 runs=1\n";
    out << "a1\tspk1\tnormal\n";
    out << "not-a-slot-line\n";
    out.close();
    try {
        load_manifest(path);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("bad float is a parse error") {
    auto path = temp_file("bad_float.txt");
    std::ofstream out(path);
    out << "poisonguard-corpus v1 dim=512 runs=1\n";
    out << "a1\tspk1\tnormal\n";
    out << "0\t0\t";
    for (int i = 0; i < 512; ++i) out << (i ? " " : "") << (i == 100 ? "oops" : "0.5");
    out << "\n";
    out.close();
    CHECK_THROWS_AS(load_manifest(path), ParseError);
}

TEST_CASE("duplicate account ids are rejected") {
    Corpus corpus = generate_corpus(2, 0.0f, 1, 5);
    corpus.accounts[1].account_id = corpus.accounts[0].account_id;
    auto path = temp_file("duplicate.txt");
    save_corpus(corpus, path);
    CHECK_THROWS_AS(load_manifest(path), DuplicateError);
}

TEST_CASE("missing file and unwritable path are IO errors") {
    CHECK_THROWS_AS(load_manifest("/nonexistent/nowhere.txt"), IoError);
    Corpus corpus = generate_corpus(2, 0.0f, 1, 5);
    CHECK_THROWS_AS(save_corpus(corpus, "/nonexistent/dir/out.txt"), IoError);
}

TEST_CASE("binary size follows the format arithmetic") {
    // 2334 accounts at run_count 1; expected byte count derived from the
    // format spec: fixed header, then per account the length-prefixed ids,
    // label byte, provenance count, and 10 slot records of 4+4+512*4 bytes.
    Corpus corpus = generate_corpus(2334, 0.1f, 1, 31);
    auto path = temp_file("size_check.pgb");
    save_corpus(corpus, path);

    std::size_t expected = 4 + 4 + 4 + 4 + 8;  // magic, version, dim, runs, count
    for (const auto& acct : corpus.accounts) {
        expected += 4 + acct.account_id.size();
        expected += 4 + acct.owner.size();
        expected += 1 + 4;  // label byte + provenance count
        expected += 10 * (4 + 4 + 512 * 4);
    }
    CHECK(fs::file_size(path) == expected);

    // the embedding payload dominates: 2334 x 10 x 1 x 512 x 4 bytes
    std::size_t payload = 2334ull * 10 * 1 * 512 * 4;
    CHECK(fs::file_size(path) > payload);
    CHECK(fs::file_size(path) < payload + payload / 100);
}

TEST_CASE("header dimension mismatch is rejected") {
    auto path = temp_file("bad_dim.txt");
    std::ofstream out(path);
    out << "poisonguard-corpus v1 dim=256 runs=1\n";
    out.close();
    CHECK_THROWS_AS(load_manifest(path), DimensionError);
}
