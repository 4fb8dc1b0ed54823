#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace exfl::csv {

/// 17 significant digits, '.' decimal point regardless of locale.
std::string fmt(double v);

double parse_double(std::string_view field);
long long parse_int(std::string_view field);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Line-oriented reader that skips '#' comment lines and blank lines and
/// checks the header against the expected schema.
class Reader {
 public:
  Reader(std::istream& is, std::string_view expected_header);

  /// Fills `fields` with the next record; false at end of input.
  bool next(std::vector<std::string_view>& fields);
  std::size_t line_number() const { return line_no_; }

 private:
  bool next_line();

  std::istream& is_;
  std::string line_;
  std::size_t columns_ = 0;
  std::size_t line_no_ = 0;
};

}  // namespace exfl::csv
