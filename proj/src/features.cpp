#include "lifetraj/features.hpp"

#include "lifetraj/io.hpp"
#include "lifetraj/parallel.hpp"
#include "lifetraj/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace lifetraj {

namespace {

// Decodes one UTF-8 sequence at text[pos]; returns 0xFFFD for malformed input.
char32_t decode(std::string_view text, std::size_t& pos) {
    const auto b0 = static_cast<unsigned char>(text[pos]);
    std::size_t len = 1;
    char32_t cp = b0;
    if (b0 >= 0xF0 && b0 < 0xF8) {
        len = 4;
        cp = b0 & 0x07;
    } else if (b0 >= 0xE0) {
        len = b0 < 0xF0 ? 3 : 1;
        cp = b0 & 0x0F;
    } else if (b0 >= 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if (b0 >= 0x80) {
        ++pos;
        return 0xFFFD;
    }
    if (len == 1) {
        ++pos;
        return b0 < 0x80 ? cp : 0xFFFD;
    }
    if (pos + len > text.size()) {
        pos = text.size();
        return 0xFFFD;
    }
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(text[pos + k]);
        if ((b & 0xC0) != 0x80) {
            pos += k;
            return 0xFFFD;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    pos += len;
    return cp;
}

void encode(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

bool is_word_char(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
    }
    if (cp < 0xC0 || cp == 0xD7 || cp == 0xF7 || cp == 0xFFFD) {
        return false;
    }
    if (cp >= 0x2000 && cp <= 0x2BFF) {
        return false;  // punctuation, symbols, arrows
    }
    if (cp >= 0x3000 && cp <= 0x303F) {
        return false;
    }
    return true;
}

char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') {
        return cp + 32;
    }
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) {
        return cp + 32;
    }
    if ((cp >= 0x100 && cp <= 0x137) || (cp >= 0x14A && cp <= 0x177)) {
        return cp | 1;
    }
    if ((cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E)) {
        return (cp & 1) != 0 ? cp + 1 : cp;
    }
    if (cp == 0x178) {
        return 0xFF;
    }
    return cp;
}

void for_each_ngram(const std::vector<std::string>& tokens, NgramRange range, std::string& buffer,
                    const std::function<void(const std::string&)>& fn) {
    for (int n = range.min; n <= range.max; ++n) {
        const auto un = static_cast<std::size_t>(n);
        for (std::size_t i = 0; i + un <= tokens.size(); ++i) {
            buffer = tokens[i];
            for (std::size_t k = 1; k < un; ++k) {
                buffer += ' ';
                buffer += tokens[i + k];
            }
            fn(buffer);
        }
    }
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto tab = line.find('\t', pos);
        out.push_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
        if (tab == std::string_view::npos) {
            return out;
        }
        pos = tab + 1;
    }
}

template <typename T>
T parse_number(std::string_view s, const std::string& source, std::size_t line) {
    T v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ParseError(source, line, 1, "invalid number '" + std::string(s) + "'");
    }
    return v;
}

} // namespace

std::vector<std::string> word_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = decode(text, pos);
        if (is_word_char(cp)) {
            encode(to_lower(cp), current);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

void append_ngrams(const std::vector<std::string>& tokens, NgramRange range, std::vector<std::string>& out) {
    std::string buffer;
    for_each_ngram(tokens, range, buffer, [&](const std::string& g) { out.push_back(g); });
}

double SparseVector::norm() const {
    double s = 0.0;
    for (double v : values) {
        s += v * v;
    }
    return std::sqrt(s);
}

Vocabulary Vocabulary::fit(const std::vector<std::string>& corpus, NgramRange range, std::size_t max_features) {
    if (corpus.empty()) {
        throw FitError("cannot fit a vocabulary on an empty corpus");
    }
    if (range.min < 1 || range.max < range.min) {
        throw FitError("invalid n-gram range");
    }
    if (max_features == 0) {
        throw FitError("max_features must be positive");
    }
    // Per-chunk document frequencies, merged afterwards; addition is
    // order-free so the result does not depend on the partition.
    const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(thread_limit(), corpus.size()));
    std::vector<std::unordered_map<std::string, std::uint32_t>> partial(chunks);
    const std::size_t per = (corpus.size() + chunks - 1) / chunks;
    parallel_for(chunks, [&](std::size_t c) {
        auto& counts = partial[c];
        std::vector<std::string> grams;
        const std::size_t end = std::min(corpus.size(), (c + 1) * per);
        for (std::size_t d = c * per; d < end; ++d) {
            grams.clear();
            append_ngrams(word_tokens(corpus[d]), range, grams);
            std::sort(grams.begin(), grams.end());
            grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
            for (auto& g : grams) {
                ++counts[std::move(g)];
            }
        }
    });
    auto& df = partial[0];
    for (std::size_t c = 1; c < chunks; ++c) {
        for (auto& [term, n] : partial[c]) {
            df[term] += n;
        }
    }

    if (df.empty()) {
        throw FitError("corpus contains no tokens");
    }
    std::vector<std::pair<std::string, std::uint32_t>> ranked(df.begin(), df.end());
    auto by_df = [](const auto& a, const auto& b) { return a.second != b.second ? a.second > b.second : a.first < b.first; };
    if (ranked.size() > max_features) {
        std::nth_element(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(max_features), ranked.end(), by_df);
        ranked.resize(max_features);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    Vocabulary v;
    v.range_ = range;
    v.n_documents_ = corpus.size();
    v.terms_.reserve(ranked.size());
    v.df_.reserve(ranked.size());
    for (auto& [term, n] : ranked) {
        v.terms_.push_back(std::move(term));
        v.df_.push_back(n);
    }
    v.finalize();
    return v;
}

void Vocabulary::finalize() {
    idf_.resize(terms_.size());
    index_.clear();
    index_.reserve(terms_.size());
    const double n = static_cast<double>(n_documents_);
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        idf_[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df_[i]))) + 1.0;
        index_.emplace(terms_[i], static_cast<std::uint32_t>(i));
    }
}

std::optional<std::uint32_t> Vocabulary::index_of(std::string_view ngram) const {
    const auto it = index_.find(std::string(ngram));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

SparseVector Vocabulary::transform(std::string_view text) const {
    std::vector<std::uint32_t> hits;
    std::string buffer;
    for_each_ngram(word_tokens(text), range_, buffer, [&](const std::string& g) {
        const auto it = index_.find(g);
        if (it != index_.end()) {
            hits.push_back(it->second);
        }
    });
    std::sort(hits.begin(), hits.end());
    SparseVector out;
    for (std::size_t i = 0; i < hits.size();) {
        std::size_t j = i;
        while (j < hits.size() && hits[j] == hits[i]) {
            ++j;
        }
        const double tf = 1.0 + std::log(static_cast<double>(j - i));
        out.indices.push_back(hits[i]);
        out.values.push_back(tf * idf_[hits[i]]);
        i = j;
    }
    const double norm = out.norm();
    if (norm > 0.0) {
        for (double& v : out.values) {
            v /= norm;
        }
    }
    return out;
}

std::string Vocabulary::to_tsv() const {
    std::string out = "n_documents\t" + std::to_string(n_documents_) + "\n";
    out += "ngram_range\t" + std::to_string(range_.min) + "\t" + std::to_string(range_.max) + "\n";
    out += "ngram\tindex\tdf\n";
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        out += terms_[i];
        out += '\t';
        out += std::to_string(i);
        out += '\t';
        out += std::to_string(df_[i]);
        out += '\n';
    }
    return out;
}

Vocabulary Vocabulary::from_tsv(std::string_view text, const std::string& source) {
    Vocabulary v;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        const std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        const auto cols = split_tabs(line);
        if (line_no == 1) {
            if (cols.size() != 2 || cols[0] != "n_documents") {
                throw ParseError(source, 1, 1, "expected 'n_documents<TAB>N' header");
            }
            v.n_documents_ = parse_number<std::size_t>(cols[1], source, 1);
        } else if (line_no == 2) {
            if (cols.size() != 3 || cols[0] != "ngram_range") {
                throw ParseError(source, 2, 1, "expected 'ngram_range<TAB>min<TAB>max' header");
            }
            v.range_ = {parse_number<int>(cols[1], source, 2), parse_number<int>(cols[2], source, 2)};
        } else if (line_no == 3) {
            if (line != "ngram\tindex\tdf") {
                throw ParseError(source, 3, 1, "expected column header 'ngram<TAB>index<TAB>df'");
            }
        } else {
            if (cols.size() != 3) {
                throw ParseError(source, line_no, 1, "expected 3 columns");
            }
            if (parse_number<std::size_t>(cols[1], source, line_no) != v.terms_.size()) {
                throw ParseError(source, line_no, cols[0].size() + 2, "indices must be dense and in order");
            }
            v.terms_.emplace_back(cols[0]);
            v.df_.push_back(parse_number<std::uint32_t>(cols[2], source, line_no));
        }
    }
    if (line_no < 3) {
        throw ParseError(source, line_no + 1, 1, "truncated vocabulary file");
    }
    v.finalize();
    return v;
}

void Vocabulary::save(const std::filesystem::path& path) const { write_file(path, to_tsv()); }

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return from_tsv(read_file(path), path.string()); }

void SparseMatrix::append_row(const SparseVector& row) {
    indices.insert(indices.end(), row.indices.begin(), row.indices.end());
    values.insert(values.end(), row.values.begin(), row.values.end());
    row_offsets.push_back(indices.size());
}

SparseMatrix SparseMatrix::select_rows(const std::vector<std::size_t>& rows) const {
    SparseMatrix out;
    out.n_cols = n_cols;
    for (std::size_t r : rows) {
        out.indices.insert(out.indices.end(), indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[r]),
                           indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[r + 1]));
        out.values.insert(out.values.end(), values.begin() + static_cast<std::ptrdiff_t>(row_offsets[r]),
                          values.begin() + static_cast<std::ptrdiff_t>(row_offsets[r + 1]));
        out.row_offsets.push_back(out.indices.size());
    }
    return out;
}

SparseMatrix transform_all(const Vocabulary& vocabulary, const std::vector<std::string>& texts) {
    std::vector<SparseVector> rows(texts.size());
    parallel_for(texts.size(), [&](std::size_t i) { rows[i] = vocabulary.transform(texts[i]); });
    SparseMatrix m;
    m.n_cols = vocabulary.size();
    for (const auto& r : rows) {
        m.append_row(r);
    }
    return m;
}

void save_triplets(const std::filesystem::path& path, const SparseMatrix& matrix) {
    AtomicFile file(path);
    auto& out = file.stream();
    out << matrix.rows() << ' ' << matrix.n_cols << ' ' << matrix.indices.size() << '\n';
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
        for (std::size_t k = matrix.row_offsets[r]; k < matrix.row_offsets[r + 1]; ++k) {
            out << r << ' ' << matrix.indices[k] << ' ' << format_double(matrix.values[k]) << '\n';
        }
    }
    file.commit();
}

SparseMatrix load_triplets(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    const std::string source = path.string();
    std::istringstream in(text);
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t nnz = 0;
    if (!(in >> rows >> cols >> nnz)) {
        throw ParseError(source, 1, 1, "expected 'rows cols nnz' header");
    }
    SparseMatrix m;
    m.n_cols = cols;
    m.indices.reserve(nnz);
    m.values.reserve(nnz);
    std::size_t current = 0;
    for (std::size_t k = 0; k < nnz; ++k) {
        std::size_t r = 0;
        std::size_t c = 0;
        std::string value;
        if (!(in >> r >> c >> value)) {
            throw ParseError(source, k + 2, 1, "expected 'row col value'");
        }
        if (r >= rows || c >= cols || r < current ||
            (r == current && m.indices.size() > m.row_offsets.back() && c <= m.indices.back())) {
            throw ParseError(source, k + 2, 1, "entries must be in row-major order and within bounds");
        }
        while (current < r) {
            m.row_offsets.push_back(m.indices.size());
            ++current;
        }
        m.indices.push_back(static_cast<std::uint32_t>(c));
        m.values.push_back(parse_number<double>(value, source, k + 2));
    }
    while (m.rows() < rows) {
        m.row_offsets.push_back(m.indices.size());
    }
    return m;
}

std::size_t whitespace_token_count(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
        if (!space && !in_word) {
            ++n;
        }
        in_word = !space;
    }
    return n;
}

TokenStats TokenStats::compute(const std::vector<std::string>& corpus, const TokenCounter& counter) {
    TokenStats s;
    s.counts_.resize(corpus.size());
    parallel_for(corpus.size(), [&](std::size_t i) { s.counts_[i] = counter(corpus[i]); });
    for (std::size_t c : s.counts_) {
        ++s.histogram_[c];
    }
    s.sorted_ = s.counts_;
    std::sort(s.sorted_.begin(), s.sorted_.end());
    return s;
}

std::size_t TokenStats::percentile(double p) const {
    if (sorted_.empty()) {
        return 0;
    }
    const double clamped = std::clamp(p, 0.0, 100.0);
    const auto rank = static_cast<std::size_t>(std::ceil(clamped / 100.0 * static_cast<double>(sorted_.size())));
    return sorted_[std::max<std::size_t>(rank, 1) - 1];
}

double TokenStats::mean() const {
    if (counts_.empty()) {
        return 0.0;
    }
    const double total = std::accumulate(counts_.begin(), counts_.end(), 0.0);
    return total / static_cast<double>(counts_.size());
}

double TokenStats::stddev() const {
    if (counts_.size() < 2) {
        return 0.0;
    }
    const double m = mean();
    double ss = 0.0;
    for (std::size_t c : counts_) {
        ss += (static_cast<double>(c) - m) * (static_cast<double>(c) - m);
    }
    return std::sqrt(ss / static_cast<double>(counts_.size() - 1));
}

DatasetSplit split_dataset(std::size_t n, const SplitConfig& config) {
    if (!(config.test_fraction > 0.0 && config.test_fraction < 1.0)) {
        throw SplitError("test fraction must lie in (0, 1)");
    }
    if (!(config.validation_fraction > 0.0 && config.validation_fraction < 1.0)) {
        throw SplitError("validation fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(config.seed);
    rng.shuffle(std::span<std::size_t>(order));

    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.test_fraction));
    const std::size_t pool = n - n_test;
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(pool) * config.validation_fraction));
    const std::size_t available = pool - n_val;
    std::size_t n_train = available;
    if (config.train_cap) {
        if (*config.train_cap > available) {
            throw SplitError("train cap " + std::to_string(*config.train_cap) + " exceeds the " +
                             std::to_string(available) + " samples left after test and validation");
        }
        n_train = *config.train_cap;
    }
    DatasetSplit s;
    auto take = [&](std::size_t from, std::size_t count) {
        std::vector<std::size_t> part(order.begin() + static_cast<std::ptrdiff_t>(from),
                                      order.begin() + static_cast<std::ptrdiff_t>(from + count));
        std::sort(part.begin(), part.end());
        return part;
    };
    s.test = take(0, n_test);
    s.validation = take(n_test, n_val);
    s.train = take(n_test + n_val, n_train);
    return s;
}

void save_split(const std::filesystem::path& path, const DatasetSplit& split) {
    nlohmann::ordered_json j{{"train", split.train}, {"validation", split.validation}, {"test", split.test}};
    write_file(path, j.dump() + "\n");
}

DatasetSplit load_split(const std::filesystem::path& path) {
    try {
        const auto j = nlohmann::json::parse(read_file(path));
        return DatasetSplit{j.at("train").get<std::vector<std::size_t>>(),
                            j.at("validation").get<std::vector<std::size_t>>(),
                            j.at("test").get<std::vector<std::size_t>>()};
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 1, 1, e.what());
    }
}

} // namespace lifetraj
