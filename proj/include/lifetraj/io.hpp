#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>

namespace lifetraj {

std::string read_file(const std::filesystem::path& path);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Writes into "<path>.partial" and renames on commit(). If the object is
// destroyed without commit() (an exception unwound past it), the partial file
// is removed so no truncated artifact is left behind.
class AtomicFile {
public:
    explicit AtomicFile(std::filesystem::path path);
    ~AtomicFile();

    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;

    std::ostream& stream() { return out_; }
    void commit();

private:
    std::filesystem::path path_;
    std::filesystem::path partial_;
    std::ofstream out_;
    bool committed_ = false;
};

void write_file(const std::filesystem::path& path, std::string_view content);

} // namespace lifetraj
