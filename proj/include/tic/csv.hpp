#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace tic {

/// CSV writer: comma-separated, UTF-8, LF line endings, one header row,
/// doubles serialized with 17 significant digits so reruns are
/// byte-identical.
class CsvWriter {
 public:
  using Cell = std::variant<double, long long, std::string>;

  explicit CsvWriter(const std::string& path)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
  }

  void header(std::initializer_list<std::string> cols) {
    write_row(std::vector<std::string>(cols));
  }

  void row(std::initializer_list<Cell> cells) {
    std::vector<std::string> parts;
    parts.reserve(cells.size());
    for (const auto& c : cells) parts.push_back(to_string(c));
    write_row(parts);
  }

  static std::string format(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

 private:
  static std::string to_string(const Cell& c) {
    if (std::holds_alternative<double>(c)) {
      return format(std::get<double>(c));
    }
    if (std::holds_alternative<long long>(c)) {
      return std::to_string(std::get<long long>(c));
    }
    return std::get<std::string>(c);
  }

  void write_row(const std::vector<std::string>& parts) {
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out_ << ',';
      out_ << parts[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
};

}  // namespace tic
