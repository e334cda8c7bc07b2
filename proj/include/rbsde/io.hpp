#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rbsde/common.hpp"

namespace rbsde {

/// Small CSV builder with fixed formatting (%.12g) so identical runs emit
/// identical bytes.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    CsvTable& row(const std::vector<double>& values) {
        require(values.size() == columns_.size(), "CsvTable: row width mismatch");
        rows_.push_back(values);
        return *this;
    }

    std::string to_string() const {
        std::string out;
        for (std::size_t c = 0; c < columns_.size(); ++c) {
            if (c) out += ",";
            out += columns_[c];
        }
        out += "\n";
        char buf[64];
        for (const auto& r : rows_) {
            for (std::size_t c = 0; c < r.size(); ++c) {
                if (c) out += ",";
                std::snprintf(buf, sizeof(buf), "%.12g", r[c]);
                out += buf;
            }
            out += "\n";
        }
        return out;
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<double>> rows_;
};

/// Write-then-rename so readers never observe a half-written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ConfigError("cannot open '" + tmp.string() + "' for writing");
        os << content;
        if (!os) throw ConfigError("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read '" + path.string() + "'");
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

/// FNV-1a content hash, hex-formatted; identifies the exact config bytes in
/// emitted reports.
inline std::string content_hash(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace rbsde
