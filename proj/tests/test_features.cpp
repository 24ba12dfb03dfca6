#include "lifetraj/features.hpp"
#include "lifetraj/parallel.hpp"
#include "lifetraj/rng.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

using namespace lifetraj;

namespace {

// Straightforward TF-IDF over a fixed term list, for comparison.
std::map<std::string, double> reference_tfidf(const std::vector<std::string>& corpus, const std::string& doc,
                                              NgramRange range) {
    auto grams = [&](const std::string& text) {
        std::vector<std::string> out;
        append_ngrams(word_tokens(text), range, out);
        return out;
    };
    std::map<std::string, int> df;
    for (const auto& d : corpus) {
        const auto g = grams(d);
        for (const auto& term : std::set<std::string>(g.begin(), g.end())) {
            ++df[term];
        }
    }
    std::map<std::string, int> tf;
    for (const auto& term : grams(doc)) {
        if (df.count(term)) {
            ++tf[term];
        }
    }
    const double n = static_cast<double>(corpus.size());
    std::map<std::string, double> out;
    double sq = 0.0;
    for (const auto& [term, count] : tf) {
        const double v = (1.0 + std::log(count)) * (std::log((1.0 + n) / (1.0 + df[term])) + 1.0);
        out[term] = v;
        sq += v * v;
    }
    for (auto& [term, v] : out) {
        v /= std::sqrt(sq);
    }
    return out;
}

std::vector<std::string> random_corpus(Rng& rng, std::size_t n) {
    static const char* words[] = {"the", "person", "moves", "from", "Halmstad", "to", "Göteborg", "in", "2004",
                                  "works", "as", "a", "nurse", "ÅRE", "Malmö", "income", "decile", "6th"};
    std::vector<std::string> corpus;
    for (std::size_t i = 0; i < n; ++i) {
        std::string doc;
        const int len = rng.between(0, 30);
        for (int k = 0; k < len; ++k) {
            doc += words[rng.below(std::size(words))];
            doc += rng.bernoulli(0.2) ? ", " : " ";
        }
        corpus.push_back(doc);
    }
    return corpus;
}

} // namespace

TEST_SUITE("features") {

TEST_CASE("tokens are lowercased alphanumeric runs") {
    CHECK(word_tokens("In 2006 the person moves from Halmstad to Göteborg.") ==
          std::vector<std::string>{"in", "2006", "the", "person", "moves", "from", "halmstad", "to", "göteborg"});
    CHECK(word_tokens("ÅRE, Ängelholm; ÖSTERSUND") == std::vector<std::string>{"åre", "ängelholm", "östersund"});
    CHECK(word_tokens("person's 6th") == std::vector<std::string>{"person", "s", "6th"});
    CHECK(word_tokens("  ").empty());
}

TEST_CASE("n-grams") {
    std::vector<std::string> out;
    append_ngrams({"a", "b", "c"}, {1, 2}, out);
    CHECK(out == std::vector<std::string>{"a", "b", "c", "a b", "b c"});
    out.clear();
    append_ngrams({"a"}, {2, 2}, out);
    CHECK(out.empty());
}

TEST_CASE("tf-idf matches the reference formula") {
    Rng rng(5);
    const auto corpus = random_corpus(rng, 200);
    const Vocabulary v = Vocabulary::fit(corpus);
    const auto probe = random_corpus(rng, 30);
    for (const auto& doc : probe) {
        const auto expected = reference_tfidf(corpus, doc, {1, 2});
        const SparseVector got = v.transform(doc);
        REQUIRE(got.size() == expected.size());
        for (std::size_t k = 0; k < got.size(); ++k) {
            const std::string& term = v.terms()[got.indices[k]];
            REQUIRE(expected.count(term) == 1);
            CHECK(got.values[k] == doctest::Approx(expected.at(term)).epsilon(1e-12));
        }
    }
}

TEST_CASE("vocabulary ordering, cap and norms") {
    const std::vector<std::string> corpus = {"b a", "a c", "a b d"};
    const Vocabulary v = Vocabulary::fit(corpus, {1, 1});
    CHECK(v.terms() == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(v.document_frequencies() == std::vector<std::uint32_t>{3, 2, 1, 1});
    CHECK(v.idf(0) == doctest::Approx(1.0));
    CHECK(v.idf(2) == doctest::Approx(std::log(2.0) + 1.0));

    const Vocabulary capped = Vocabulary::fit(corpus, {1, 1}, 3);
    CHECK(capped.terms() == std::vector<std::string>{"a", "b", "c"});

    CHECK(v.transform("zzz").size() == 0);
    CHECK(v.transform("a d d").norm() == doctest::Approx(1.0));
    CHECK_THROWS_AS(Vocabulary::fit({}, {1, 1}), FitError);
    CHECK_THROWS_AS(Vocabulary::fit({"!!", ""}, {1, 1}), FitError);
    CHECK_THROWS_AS(Vocabulary::fit(corpus, {2, 1}), FitError);
}

TEST_CASE("vocabulary does not depend on the thread count") {
    Rng rng(9);
    const auto corpus = random_corpus(rng, 3000);
    const unsigned saved = thread_limit();
    set_thread_limit(1);
    const Vocabulary a = Vocabulary::fit(corpus);
    set_thread_limit(4);
    const Vocabulary b = Vocabulary::fit(corpus);
    set_thread_limit(saved);
    CHECK(a.to_tsv() == b.to_tsv());
}

TEST_CASE("vocabulary and triplets round-trip") {
    Rng rng(3);
    const auto corpus = random_corpus(rng, 100);
    const Vocabulary v = Vocabulary::fit(corpus);
    const auto dir = testing::scratch_dir("features");
    v.save(dir / "v.tsv");
    const Vocabulary back = Vocabulary::load(dir / "v.tsv");
    CHECK(back.to_tsv() == v.to_tsv());
    CHECK(back.n_documents() == 100);

    const SparseMatrix m = transform_all(v, corpus);
    save_triplets(dir / "m.triplets", m);
    const SparseMatrix m2 = load_triplets(dir / "m.triplets");
    CHECK(m2.rows() == m.rows());
    CHECK(m2.n_cols == m.n_cols);
    CHECK(m2.row_offsets == m.row_offsets);
    CHECK(m2.indices == m.indices);
    for (std::size_t i = 0; i < m.values.size(); ++i) {
        CHECK(m2.values[i] == m.values[i]);
    }

    const SparseMatrix sub = m.select_rows({3, 1});
    CHECK(sub.rows() == 2);
    CHECK(sub.row_offsets[1] == m.row_offsets[4] - m.row_offsets[3]);
    CHECK_THROWS(Vocabulary::from_tsv("garbage", "x"));
}

TEST_CASE("token statistics") {
    const TokenStats s = TokenStats::compute({"a b c", "a", "a b", "a b c d"});
    CHECK(s.counts() == std::vector<std::size_t>{3, 1, 2, 4});
    CHECK(s.mean() == doctest::Approx(2.5));
    CHECK(s.stddev() == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(s.percentile(50) == 2);
    CHECK(s.percentile(100) == 4);
    CHECK(s.percentile(0) == 1);
    CHECK(s.histogram().at(1) == 1);
    const TokenStats w = TokenStats::compute({"xx yy"}, [](std::string_view t) { return t.size(); });
    CHECK(w.counts()[0] == 5);
}

TEST_CASE("dataset split") {
    SplitConfig c;
    c.seed = 1;
    const DatasetSplit s = split_dataset(1000, c);
    CHECK(s.test.size() == 50);
    CHECK(s.validation.size() == 48);
    CHECK(s.train.size() == 902);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.validation.begin(), s.validation.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == 1000);
    CHECK(std::is_sorted(s.test.begin(), s.test.end()));

    const DatasetSplit again = split_dataset(1000, c);
    CHECK(again.test == s.test);
    c.seed = 2;
    CHECK(split_dataset(1000, c).test != s.test);

    c.train_cap = 100;
    CHECK(split_dataset(1000, c).train.size() == 100);
    c.train_cap = 5000;
    CHECK_THROWS_AS(split_dataset(1000, c), SplitError);

    const auto dir = testing::scratch_dir("split");
    save_split(dir / "s.json", s);
    const DatasetSplit back = load_split(dir / "s.json");
    CHECK(back.train == s.train);
    CHECK(back.validation == s.validation);
    CHECK(back.test == s.test);
}

}
