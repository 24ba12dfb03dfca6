#include "lifetraj/kvfile.hpp"

#include "lifetraj/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace lifetraj {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool valid_key(std::string_view key) {
    if (key.empty()) {
        return false;
    }
    for (char c : key) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                        c == '-' || c == '.' || c == '@';
        if (!ok) {
            return false;
        }
    }
    return true;
}

} // namespace

KvFile KvFile::parse(std::string_view text, const std::string& source) {
    KvFile file;
    file.source_ = source;
    std::string section;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto eol = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_no;

        const std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const std::size_t indent = raw.find_first_not_of(" \t") + 1;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw ParseError(source, line_no, indent, "unterminated section header");
            }
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (!valid_key(section)) {
                throw ParseError(source, line_no, indent + 1, "invalid section name");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw ParseError(source, line_no, indent, "expected 'key = value'");
        }
        const std::string_view key = trim(line.substr(0, eq));
        if (!valid_key(key)) {
            throw ParseError(source, line_no, indent, "invalid key");
        }
        std::string_view rest = trim(line.substr(eq + 1));
        const std::size_t value_col = indent + eq + 1 + (line.substr(eq + 1).find_first_not_of(" \t") + 1);

        KvEntry entry;
        entry.key = section.empty() ? std::string(key) : section + "." + std::string(key);
        entry.line = line_no;
        if (!rest.empty() && rest.front() == '"') {
            entry.quoted = true;
            std::size_t i = 1;
            bool closed = false;
            for (; i < rest.size(); ++i) {
                const char c = rest[i];
                if (c == '"') {
                    closed = true;
                    break;
                }
                if (c == '\\') {
                    if (i + 1 >= rest.size()) {
                        break;
                    }
                    const char e = rest[++i];
                    switch (e) {
                    case '"': entry.value += '"'; break;
                    case '\\': entry.value += '\\'; break;
                    case 'n': entry.value += '\n'; break;
                    case 't': entry.value += '\t'; break;
                    default: throw ParseError(source, line_no, value_col + i, "unknown escape sequence");
                    }
                    continue;
                }
                entry.value += c;
            }
            if (!closed) {
                throw ParseError(source, line_no, value_col, "unterminated string");
            }
            const std::string_view tail = trim(rest.substr(i + 1));
            if (!tail.empty() && tail.front() != '#') {
                throw ParseError(source, line_no, value_col + i + 1, "unexpected text after string");
            }
        } else {
            const auto hash = rest.find('#');
            rest = trim(rest.substr(0, hash));
            if (rest.empty()) {
                throw ParseError(source, line_no, value_col, "missing value");
            }
            entry.value = std::string(rest);
        }
        for (const auto& existing : file.entries_) {
            if (existing.key == entry.key) {
                throw ParseError(source, line_no, indent, "duplicate key '" + entry.key + "'");
            }
        }
        file.entries_.push_back(std::move(entry));
    }
    return file;
}

KvFile KvFile::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

const KvEntry* KvFile::find(std::string_view key) const {
    for (const auto& e : entries_) {
        if (e.key == key) {
            return &e;
        }
    }
    return nullptr;
}

std::optional<std::string> KvFile::get_string(std::string_view key) const {
    const KvEntry* e = find(key);
    if (e == nullptr) {
        return std::nullopt;
    }
    return e->value;
}

std::optional<std::int64_t> KvFile::get_int(std::string_view key) const {
    const KvEntry* e = find(key);
    if (e == nullptr) {
        return std::nullopt;
    }
    std::int64_t v = 0;
    const auto* end = e->value.data() + e->value.size();
    const auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
    if (e->quoted || ec != std::errc() || ptr != end) {
        throw ParseError(source_, e->line, 1, "expected an integer for '" + e->key + "'");
    }
    return v;
}

std::optional<double> KvFile::get_double(std::string_view key) const {
    const KvEntry* e = find(key);
    if (e == nullptr) {
        return std::nullopt;
    }
    double v = 0;
    const auto* end = e->value.data() + e->value.size();
    const auto [ptr, ec] = std::from_chars(e->value.data(), end, v);
    if (e->quoted || ec != std::errc() || ptr != end) {
        throw ParseError(source_, e->line, 1, "expected a number for '" + e->key + "'");
    }
    return v;
}

std::optional<bool> KvFile::get_bool(std::string_view key) const {
    const KvEntry* e = find(key);
    if (e == nullptr) {
        return std::nullopt;
    }
    if (!e->quoted && e->value == "true") {
        return true;
    }
    if (!e->quoted && e->value == "false") {
        return false;
    }
    throw ParseError(source_, e->line, 1, "expected true or false for '" + e->key + "'");
}

} // namespace lifetraj
