#include "lifetraj/io.hpp"
#include "lifetraj/kvfile.hpp"
#include "lifetraj/parallel.hpp"
#include "lifetraj/rng.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <numeric>

using namespace lifetraj;

TEST_SUITE("util") {

TEST_CASE("named seeds are stable and distinct") {
    CHECK(derive_seed(7, "generator") == derive_seed(7, "generator"));
    CHECK(derive_seed(7, "generator") != derive_seed(7, "split"));
    CHECK(derive_seed(7, "generator") != derive_seed(8, "generator"));
    CHECK(derive_seed(7, 3, 1) != derive_seed(7, 4, 1));
    CHECK(derive_seed(7, 3, 1) != derive_seed(7, 3, 2));
}

TEST_CASE("rng draws stay in range and shuffle permutes") {
    Rng rng(42);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK((u >= 0.0 && u < 1.0));
        const auto b = rng.below(7);
        CHECK(b < 7);
        const int k = rng.between(-2, 2);
        CHECK((k >= -2 && k <= 2));
    }
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    rng.shuffle(std::span<int>(v));
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 100; ++i) {
        CHECK(sorted[static_cast<std::size_t>(i)] == i);
    }
    CHECK_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST_CASE("normal draws have unit moments") {
    Rng rng(5);
    double s = 0.0, ss = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        s += x;
        ss += x * x;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(ss / n - 1.0) < 0.02);
}

TEST_CASE("kv file sections, types and escapes") {
    const auto kv = KvFile::parse("top = 1\n# comment\n[a]\nname = \"x \\\"y\\\"\\n\"\nratio = 0.25\nflag = true\n\n[b.c]\nk = -3\n",
                                  "mem");
    CHECK(kv.get_int("top") == 1);
    CHECK(kv.get_string("a.name") == "x \"y\"\n");
    CHECK(kv.get_double("a.ratio") == doctest::Approx(0.25));
    CHECK(kv.get_bool("a.flag") == true);
    CHECK(kv.get_int("b.c.k") == -3);
    CHECK_FALSE(kv.find("missing"));
    CHECK(kv.entries().size() == 5);
}

TEST_CASE("kv file errors carry line numbers") {
    try {
        KvFile::parse("a = 1\nb 2\n", "cfg");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
        CHECK(e.source() == "cfg");
    }
    CHECK_THROWS_AS(KvFile::parse("[x\n", "cfg"), ParseError);
    CHECK_THROWS_AS(KvFile::parse("a = \"open\n", "cfg"), ParseError);
    CHECK_THROWS_AS(KvFile::parse("a = 1\na = 2\n", "cfg"), ParseError);
}

TEST_CASE("sha256 matches the standard test vector") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("atomic file leaves nothing behind unless committed") {
    const auto dir = testing::scratch_dir("atomic");
    {
        AtomicFile f(dir / "a.txt");
        f.stream() << "partial";
    }
    CHECK_FALSE(std::filesystem::exists(dir / "a.txt"));
    CHECK_FALSE(std::filesystem::exists(dir / "a.txt.partial"));
    {
        AtomicFile f(dir / "sub" / "b.txt");
        f.stream() << "done";
        f.commit();
    }
    CHECK(read_file(dir / "sub" / "b.txt") == "done");
    CHECK_THROWS_AS(read_file(dir / "missing.txt"), IoError);
}

TEST_CASE("parallel_for covers every index once and rethrows") {
    set_thread_limit(4);
    std::vector<std::atomic<int>> hits(1001);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](const auto& h) { return h.load() == 1; }));
    CHECK_THROWS_AS(parallel_for(100, [](std::size_t i) {
                        if (i == 57) {
                            throw InputError("boom");
                        }
                    }),
                    InputError);
    set_thread_limit(0);
}

}
