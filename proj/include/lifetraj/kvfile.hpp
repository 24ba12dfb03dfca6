#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lifetraj {

// Flat TOML subset shared by template files and experiment configs:
//
//   # comment
//   [section]
//   key = "string with \"escapes\""
//   other = 42
//
// Keys are reported as "section.key". Entry order is preserved.
struct KvEntry {
    std::string key;
    std::string value;
    bool quoted = false;
    std::size_t line = 0;
};

class KvFile {
public:
    static KvFile parse(std::string_view text, const std::string& source);
    static KvFile load(const std::filesystem::path& path);

    const std::vector<KvEntry>& entries() const noexcept { return entries_; }
    const std::string& source() const noexcept { return source_; }

    const KvEntry* find(std::string_view key) const;
    std::optional<std::string> get_string(std::string_view key) const;
    std::optional<std::int64_t> get_int(std::string_view key) const;
    std::optional<double> get_double(std::string_view key) const;
    std::optional<bool> get_bool(std::string_view key) const;

private:
    std::string source_;
    std::vector<KvEntry> entries_;
};

} // namespace lifetraj
