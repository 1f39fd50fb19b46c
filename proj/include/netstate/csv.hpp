#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "netstate/errors.hpp"

namespace netstate {

// Shortest-exact decimal for a double: 17 significant digits round-trip
// bit-exactly through text.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// Line-oriented CSV reader that keeps file/line context for error messages.
class CsvReader {
 public:
  explicit CsvReader(const std::filesystem::path& path) : path_(path.string()), in_(path) {
    if (!in_) throw IoError("cannot open " + path_);
  }

  // Reads the next non-empty line split on commas; returns false at EOF.
  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      fields = split_fields(line, ',');
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError(path_ + ":" + std::to_string(line_no_) + ": " + what);
  }

  double parse_double(const std::string& s) const {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) fail("trailing characters in number '" + s + "'");
      return v;
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      fail("expected a number, got '" + s + "'");
    }
  }

  long long parse_int(const std::string& s) const {
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(s, &pos);
      if (pos != s.size()) fail("trailing characters in integer '" + s + "'");
      return v;
    } catch (const DataError&) {
      throw;
    } catch (const std::exception&) {
      fail("expected an integer, got '" + s + "'");
    }
  }

  const std::string& path() const { return path_; }
  int line() const { return line_no_; }

 private:
  std::string path_;
  std::ifstream in_;
  int line_no_ = 0;
};

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace netstate
