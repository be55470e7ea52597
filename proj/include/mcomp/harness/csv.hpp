#pragma once

#include <charconv>
#include <concepts>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace mcomp::harness {

/// Shortest decimal that round-trips; "inf", "-inf", "nan" for non-finite values.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

/// One CSV row under construction. Fields containing ',', '"' or a newline are quoted.
class CsvRow {
 public:
  CsvRow& add(std::string_view s) {
    if (s.find_first_of(",\"\n\r") == std::string_view::npos) {
      fields_.emplace_back(s);
    } else {
      std::string q = "\"";
      for (char c : s) {
        if (c == '"') q += '"';
        q += c;
      }
      q += '"';
      fields_.push_back(std::move(q));
    }
    return *this;
  }
  CsvRow& add(const char* s) { return add(std::string_view(s)); }
  CsvRow& add(const std::string& s) { return add(std::string_view(s)); }
  CsvRow& add(double x) { return add(format_double(x)); }
  template <std::integral T>
  CsvRow& add(T x) {
    return add(std::to_string(x));
  }
  template <class T>
  CsvRow& add(const std::optional<T>& x) {
    if (x) return add(*x);
    fields_.emplace_back();
    return *this;
  }
  CsvRow& blank() {
    fields_.emplace_back();
    return *this;
  }

  std::size_t size() const { return fields_.size(); }

  void write(std::ostream& out) const {
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      if (i) out << ',';
      out << fields_[i];
    }
    out << '\n';
  }

 private:
  std::vector<std::string> fields_;
};

inline void write_header(std::ostream& out, const std::vector<std::string_view>& names) {
  CsvRow row;
  for (auto n : names) row.add(n);
  row.write(out);
}

}  // namespace mcomp::harness
