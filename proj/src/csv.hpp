#pragma once

// Minimal reader/writer for the comma-separated, dot-decimal, unquoted CSV
// dialect used by highD.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trajcrit/error.hpp"

namespace trajcrit::csv {

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path) {
    if (!in_) throw DataError("cannot open " + path.string());
    std::string header;
    if (!std::getline(in_, header)) throw SchemaError(path.filename().string() + ": missing header row");
    strip_cr(header);
    header_ = split(header);
    for (std::size_t i = 0; i < header_.size(); ++i) columns_.emplace(header_[i], i);
    line_ = 1;
  }

  // Index of a required column; throws SchemaError naming it when absent.
  std::size_t column(std::string_view name) const {
    auto it = columns_.find(std::string(name));
    if (it == columns_.end()) {
      throw SchemaError(path_.filename().string() + ": missing column '" + std::string(name) + "'");
    }
    return it->second;
  }

  bool has_column(std::string_view name) const { return columns_.count(std::string(name)) > 0; }

  // Reads the next non-empty row. Returns false at end of file.
  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, buffer_)) {
      ++line_;
      strip_cr(buffer_);
      if (buffer_.empty()) continue;
      split_into(buffer_, fields);
      return true;
    }
    return false;
  }

  long line() const { return line_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  static void strip_cr(std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  }

  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const auto pos = s.find(',', start);
      out.emplace_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return out;
  }

  static void split_into(const std::string& s, std::vector<std::string_view>& out) {
    out.clear();
    std::string_view view(s);
    std::size_t start = 0;
    while (true) {
      const auto pos = view.find(',', start);
      out.push_back(view.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
      if (pos == std::string_view::npos) break;
      start = pos + 1;
    }
  }

  std::filesystem::path path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::unordered_map<std::string, std::size_t> columns_;
  std::string buffer_;
  long line_ = 0;
};

inline std::optional<double> to_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::optional<long> to_long(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) return v;
  // Integer columns are occasionally written as "3.0".
  if (auto d = to_double(s); d && *d == static_cast<double>(static_cast<long>(*d))) return static_cast<long>(*d);
  return std::nullopt;
}

// Shortest representation that parses back to the same double.
inline std::string format(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace trajcrit::csv
