#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace laminhom {

inline constexpr std::string_view kVersion = "0.1.0";

/// Column layout of one output file. The version is bumped whenever the
/// columns change.
struct CsvSchema {
    std::string_view name;
    int version;
    std::vector<std::string_view> columns;

    std::string header() const;
};

const CsvSchema& schema(std::string_view name);
const std::vector<CsvSchema>& all_schemas();

/// What a '#' header block records about a run.
struct RunMetadata {
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::string canonical_config;  ///< echoed line by line
    std::vector<std::pair<std::string, std::string>> extra;
};

/// Writes '#' metadata, the header row and then rows of already formatted
/// fields. The file appears under its final name only after close().
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const CsvSchema& schema, const RunMetadata& meta);
    ~CsvWriter();
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void row(const std::vector<std::string>& fields);
    void close();

private:
    std::filesystem::path path_;
    std::filesystem::path tmp_;
    std::size_t columns_;
    std::ofstream out_;
    bool closed_ = false;
};

/// 17 significant digits; nan and inf spelled as such.
std::string csv_number(double x);

/// First line of `path` that does not start with '#'.
std::string read_header_line(const std::filesystem::path& path);

}  // namespace laminhom
