#include "pfcast/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pfcast/error.hpp"
#include "pfcast/panel.hpp"

namespace pfcast {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("error writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

void for_each_csv_record(std::string_view content,
                         const std::function<void(std::span<const std::string>, std::size_t)>& on_record) {
  std::vector<std::string> fields;
  std::string field;
  std::size_t line = 1;
  std::size_t record_line = 1;
  bool in_quotes = false;
  bool record_has_data = false;

  auto finish_record = [&] {
    fields.push_back(std::move(field));
    field.clear();
    if (record_has_data) on_record(fields, record_line);
    fields.clear();
    record_has_data = false;
  };

  std::size_t i = 0;
  if (content.size() >= 3 && content.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // UTF-8 BOM
  for (; i < content.size(); ++i) {
    const char ch = content[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        record_has_data = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        record_has_data = true;
        break;
      case '\r':
        break;
      case '\n':
        finish_record();
        ++line;
        record_line = line;
        break;
      default:
        field.push_back(ch);
        record_has_data = true;
    }
  }
  if (record_has_data || !field.empty()) finish_record();
}

CsvHeader::CsvHeader(std::span<const std::string> fields, std::string source)
    : names_(fields.begin(), fields.end()), source_(std::move(source)) {
  for (auto& n : names_) {
    while (!n.empty() && (n.back() == ' ' || n.back() == '\t')) n.pop_back();
    while (!n.empty() && (n.front() == ' ' || n.front() == '\t')) n.erase(n.begin());
  }
}

std::optional<std::size_t> CsvHeader::find(std::string_view column) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == column) return i;
  }
  return std::nullopt;
}

std::size_t CsvHeader::require(std::string_view column) const {
  if (auto i = find(column)) return *i;
  throw SchemaError(source_ + ": missing required column '" + std::string(column) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size()) return v;
  // Integral values written as reals, e.g. "5.0".
  if (auto d = parse_double(s); d && std::isfinite(*d) && std::floor(*d) == *d && std::fabs(*d) < 9e15) {
    return static_cast<long long>(*d);
  }
  return std::nullopt;
}

void append_double(std::string& out, double v) {
  if (is_missing(v)) return;
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

std::string file_checksum(const std::filesystem::path& path) { return to_hex(fnv1a64(read_file(path))); }

}  // namespace pfcast
