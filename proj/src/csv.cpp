#include "exfl/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>

#include "exfl/error.hpp"

namespace exfl::csv {

std::string fmt(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view field) {
  double v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    // from_chars rejects "inf"/"nan" spellings produced by some writers.
    if (field == "inf") return HUGE_VAL;
    if (field == "-inf") return -HUGE_VAL;
    throw Error(ErrorCode::Parse, "not a number: '" + std::string(field) + "'");
  }
  return v;
}

long long parse_int(std::string_view field) {
  long long v = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw Error(ErrorCode::Parse, "not an integer: '" + std::string(field) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

Reader::Reader(std::istream& is, std::string_view expected_header) : is_(is) {
  if (!next_line()) throw Error(ErrorCode::Parse, "missing CSV header");
  if (line_ != expected_header)
    throw Error(ErrorCode::Parse, "unexpected CSV header '" + line_ + "', expected '" +
                                      std::string(expected_header) + "'");
  columns_ = split(expected_header).size();
}

bool Reader::next_line() {
  while (std::getline(is_, line_)) {
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    if (line_.empty() || line_.front() == '#') continue;
    return true;
  }
  return false;
}

bool Reader::next(std::vector<std::string_view>& fields) {
  if (!next_line()) return false;
  fields = split(line_);
  if (fields.size() != columns_)
    throw Error(ErrorCode::Parse, "line " + std::to_string(line_no_) + ": expected " +
                                      std::to_string(columns_) + " fields, got " +
                                      std::to_string(fields.size()));
  return true;
}

}  // namespace exfl::csv
