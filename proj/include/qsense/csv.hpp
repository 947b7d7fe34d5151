#pragma once

#include <charconv>
#include <cstdint>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace qsense {

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

/// Comma-separated, LF-terminated, unquoted cells.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(columns.size()) {
    row_begin();
    for (const auto& c : columns) cell(c);
    row_end();
  }

  CsvWriter& comment(std::string_view key, std::string_view value) {
    header_ += "# ";
    header_ += key;
    header_ += " = ";
    header_ += value;
    header_ += '\n';
    return *this;
  }

  CsvWriter& cell(std::string_view s) {
    if (in_row_++ > 0) body_ += ',';
    body_ += s;
    return *this;
  }
  CsvWriter& cell(double v) { return cell(std::string_view{format_double(v)}); }
  CsvWriter& cell(std::int64_t v) { return cell(std::string_view{std::to_string(v)}); }
  CsvWriter& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
  CsvWriter& cell(std::size_t v) { return cell(static_cast<std::int64_t>(v)); }

  void row_begin() { in_row_ = 0; }
  void row_end() {
    body_ += '\n';
    in_row_ = 0;
  }

  template <class... Cells>
  void row(const Cells&... cells) {
    row_begin();
    (cell(cells), ...);
    row_end();
  }

  std::string str() const { return header_ + body_; }
  std::size_t columns() const { return columns_; }

 private:
  std::size_t columns_;
  std::size_t in_row_ = 0;
  std::string header_;
  std::string body_;
};

/// Splits one CSV line on commas (no quoting).
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace qsense
