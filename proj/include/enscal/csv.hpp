#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace enscal {

class CsvError : public std::runtime_error {
 public:
  CsvError(const std::string& path, long line, const std::string& what)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Minimal comma-separated reader for the fixed file schemas. No quoting: the
/// schemas carry only identifiers, ISO timestamps, and numbers.
class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw std::runtime_error("cannot open file: " + path);
  }

  /// Reads the next row into `fields` (views into an internal buffer).
  /// Returns false at end of input. Blank lines are skipped.
  bool next(std::vector<std::string_view>& fields) {
    while (std::getline(in_, buf_)) {
      ++line_;
      if (!buf_.empty() && buf_.back() == '\r') buf_.pop_back();
      if (buf_.empty()) continue;
      fields.clear();
      std::string_view rest = buf_;
      for (;;) {
        const auto pos = rest.find(',');
        if (pos == std::string_view::npos) {
          fields.push_back(rest);
          break;
        }
        fields.push_back(rest.substr(0, pos));
        rest.remove_prefix(pos + 1);
      }
      return true;
    }
    return false;
  }

  /// Validates the header row (first row) against the expected field names.
  void expect_header(std::initializer_list<std::string_view> expected) {
    std::vector<std::string_view> fields;
    if (!next(fields)) throw CsvError(path_, line_, "missing header row");
    if (fields.size() != expected.size() ||
        !std::equal(fields.begin(), fields.end(), expected.begin())) {
      throw CsvError(path_, line_, "unexpected header: '" + buf_ + "'");
    }
  }

  void require_fields(const std::vector<std::string_view>& fields, std::size_t n) {
    if (fields.size() != n) {
      throw CsvError(path_, line_,
                     "expected " + std::to_string(n) + " fields, got " +
                         std::to_string(fields.size()));
    }
  }

  double to_double(std::string_view s, const char* what) const {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw CsvError(path_, line_, std::string("malformed ") + what + ": '" + std::string(s) + "'");
    }
    return v;
  }

  double to_finite(std::string_view s, const char* what) const {
    const double v = to_double(s, what);
    if (!std::isfinite(v)) {
      throw CsvError(path_, line_, std::string("non-finite ") + what + ": '" + std::string(s) + "'");
    }
    return v;
  }

  long to_long(std::string_view s, const char* what) const {
    long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw CsvError(path_, line_, std::string("malformed ") + what + ": '" + std::string(s) + "'");
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const { throw CsvError(path_, line_, what); }

  const std::string& path() const { return path_; }
  long line() const { return line_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::string buf_;
  long line_ = 0;
};

/// Shortest round-trip decimal rendering; parsing it back recovers the exact
/// double, which is what the serialization fidelity guarantees rest on.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : path_(path), out_(path) {
    if (!out_) throw std::runtime_error("cannot open file for writing: " + path);
  }

  void row(std::initializer_list<std::string_view> fields) {
    bool first = true;
    for (auto f : fields) {
      if (!first) out_ << ',';
      out_ << f;
      first = false;
    }
    out_ << '\n';
  }

  void raw_line(std::string_view line) { out_ << line << '\n'; }

  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace enscal
