#pragma once

// Small I/O helpers: RFC 4180 record splitting, locale-free number
// parsing/formatting and content checksums for cache coherence.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pfcast {

/// Reads a whole file; throws IoError naming the path on failure.
std::string read_file(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames into place.
void write_file(const std::filesystem::path& path, std::string_view content);

/// Calls `on_record(fields, line_number)` for each record. Quoted fields may
/// contain commas, doubled quotes and newlines. Blank lines are skipped.
void for_each_csv_record(std::string_view content,
                         const std::function<void(std::span<const std::string>, std::size_t)>& on_record);

/// Header lookup helper: maps required column names to positions.
class CsvHeader {
 public:
  CsvHeader(std::span<const std::string> fields, std::string source);
  /// Throws SchemaError naming the column and the source.
  std::size_t require(std::string_view column) const;
  std::optional<std::size_t> find(std::string_view column) const;

 private:
  std::vector<std::string> names_;
  std::string source_;
};

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Shortest round-trip decimal form; the missing sentinel becomes "".
std::string format_double(double v);
void append_double(std::string& out, double v);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string to_hex(std::uint64_t v);
std::string file_checksum(const std::filesystem::path& path);

}  // namespace pfcast
