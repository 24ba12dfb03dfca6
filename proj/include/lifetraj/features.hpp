#pragma once

#include "lifetraj/error.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lifetraj {

class FitError : public Error {
public:
    using Error::Error;
};

class SplitError : public Error {
public:
    using Error::Error;
};

// Lowercased alphanumeric runs. Non-ASCII letters (Latin-1 and Latin
// Extended-A) stay inside words and are lowercased too.
std::vector<std::string> word_tokens(std::string_view text);

struct NgramRange {
    int min = 1;
    int max = 2;
};

// Appends the space-joined n-grams of `tokens` for every n in range.
void append_ngrams(const std::vector<std::string>& tokens, NgramRange range, std::vector<std::string>& out);

struct SparseVector {
    std::vector<std::uint32_t> indices;  // strictly increasing
    std::vector<double> values;

    std::size_t size() const noexcept { return indices.size(); }
    double norm() const;
};

class Vocabulary {
public:
    static constexpr std::size_t kDefaultMaxFeatures = 300000;

    static Vocabulary fit(const std::vector<std::string>& corpus, NgramRange range = {},
                          std::size_t max_features = kDefaultMaxFeatures);

    std::size_t size() const noexcept { return terms_.size(); }
    std::size_t n_documents() const noexcept { return n_documents_; }
    NgramRange ngram_range() const noexcept { return range_; }
    const std::vector<std::string>& terms() const noexcept { return terms_; }
    const std::vector<std::uint32_t>& document_frequencies() const noexcept { return df_; }
    std::optional<std::uint32_t> index_of(std::string_view ngram) const;
    double idf(std::uint32_t index) const { return idf_[index]; }

    SparseVector transform(std::string_view text) const;

    std::string to_tsv() const;
    static Vocabulary from_tsv(std::string_view text, const std::string& source);
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

private:
    void finalize();

    NgramRange range_;
    std::size_t n_documents_ = 0;
    std::vector<std::string> terms_;  // lexicographic; position is the feature index
    std::vector<std::uint32_t> df_;
    std::vector<double> idf_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

// Compressed rows.
struct SparseMatrix {
    std::size_t n_cols = 0;
    std::vector<std::size_t> row_offsets{0};
    std::vector<std::uint32_t> indices;
    std::vector<double> values;

    std::size_t rows() const noexcept { return row_offsets.size() - 1; }
    void append_row(const SparseVector& row);
    SparseMatrix select_rows(const std::vector<std::size_t>& rows) const;
};

SparseMatrix transform_all(const Vocabulary& vocabulary, const std::vector<std::string>& texts);

// "rows cols nnz" header, then one "row col value" line per stored entry.
void save_triplets(const std::filesystem::path& path, const SparseMatrix& matrix);
SparseMatrix load_triplets(const std::filesystem::path& path);

using TokenCounter = std::function<std::size_t(std::string_view)>;
std::size_t whitespace_token_count(std::string_view text);

class TokenStats {
public:
    static TokenStats compute(const std::vector<std::string>& corpus, const TokenCounter& counter = whitespace_token_count);

    const std::vector<std::size_t>& counts() const noexcept { return counts_; }
    const std::map<std::size_t, std::size_t>& histogram() const noexcept { return histogram_; }
    // Nearest-rank percentile, p in [0, 100].
    std::size_t percentile(double p) const;
    double mean() const;
    double stddev() const;

private:
    std::vector<std::size_t> counts_;
    std::vector<std::size_t> sorted_;
    std::map<std::size_t, std::size_t> histogram_;
};

struct SplitConfig {
    double test_fraction = 0.05;
    double validation_fraction = 0.05;  // of the non-test pool
    std::optional<std::size_t> train_cap;
    std::uint64_t seed = 0;
};

struct DatasetSplit {
    // Row indices into the corpus, each ascending.
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

DatasetSplit split_dataset(std::size_t n, const SplitConfig& config);

void save_split(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit load_split(const std::filesystem::path& path);

} // namespace lifetraj
