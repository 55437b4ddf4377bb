#include "laminhom/csv.hpp"

#include "laminhom/random.hpp"

#include <fmt/format.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace laminhom {

std::string CsvSchema::header() const {
    std::string s;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) s += ',';
        s += columns[i];
    }
    return s;
}

const std::vector<CsvSchema>& all_schemas() {
    static const std::vector<CsvSchema> schemas = {
        {"quantities", 1, {"quantity", "i", "j", "k", "l", "value"}},
        {"corrector", 1, {"cell", "x", "omega", "component", "p"}},
        {"checks", 1, {"check", "value", "tolerance", "status"}},
        {"fluctuations", 1, {"order", "L", "samples", "sd", "ci_lo", "ci_hi"}},
        {"systematic", 1, {"order", "L", "reference", "bias", "se", "underpowered"}},
        {"rates", 1, {"order", "kind", "slope", "intercept", "ci_half_width", "r_squared", "points", "status"}},
        {"mc", 1, {"L", "N", "batches", "rmse", "ci_lo", "ci_hi", "bias", "random", "envelope", "ratio"}},
        {"mc_summary", 1, {"quantity", "value"}},
        {"field", 1, {"x", "omega"}},
        {"validate", 1, {"suite", "invariant", "value", "tolerance", "status"}},
    };
    return schemas;
}

const CsvSchema& schema(std::string_view name) {
    for (const auto& s : all_schemas())
        if (s.name == name) return s;
    throw std::invalid_argument(fmt::format("no CSV schema named '{}'", name));
}

std::string csv_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", x);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const CsvSchema& schema, const RunMetadata& meta)
    : path_(path), tmp_(path.string() + ".partial"), columns_(schema.columns.size()) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write " + tmp_.string());
    out_ << "# laminhom " << kVersion << '\n';
    out_ << "# schema: " << schema.name << " v" << schema.version << '\n';
    out_ << "# command: " << meta.command << '\n';
    out_ << fmt::format("# config_hash: fnv1a64:{:016x}\n", meta.config_hash);
    out_ << "# seed: " << meta.seed << '\n';
    out_ << "# prng: " << kPrngName << '\n';
    for (const auto& [k, v] : meta.extra) out_ << "# " << k << ": " << v << '\n';
    std::istringstream cfg(meta.canonical_config);
    for (std::string line; std::getline(cfg, line);) out_ << "# config: " << line << '\n';
    out_ << schema.header() << '\n';
}

CsvWriter::~CsvWriter() {
    try {
        close();
    } catch (...) {
    }
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_)
        throw std::logic_error(fmt::format("CSV row has {} fields, schema has {}", fields.size(), columns_));
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << fields[i];
    }
    out_ << '\n';
}

void CsvWriter::close() {
    if (closed_) return;
    closed_ = true;
    out_.close();
    if (!out_) throw std::runtime_error("failed writing " + tmp_.string());
    std::filesystem::rename(tmp_, path_);
}

std::string read_header_line(const std::filesystem::path& path) {
    std::ifstream in(path);
    for (std::string line; std::getline(in, line);)
        if (line.empty() || line[0] != '#') return line;
    return {};
}

}  // namespace laminhom
