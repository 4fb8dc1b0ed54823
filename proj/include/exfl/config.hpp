#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>

namespace exfl::config {

/// Flat `key=value` lines. '#' starts a comment, blank lines are skipped,
/// dotted keys express nesting. Later duplicates are an error.
using KeyValues = std::map<std::string, std::string, std::less<>>;

KeyValues parse(std::istream& is, std::string_view source = "<config>");
KeyValues parse_file(const std::string& path);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex(std::uint64_t v);

}  // namespace exfl::config
