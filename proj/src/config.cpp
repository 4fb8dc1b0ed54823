#include "exfl/config.hpp"

#include <cstdio>
#include <fstream>
#include <istream>

#include "exfl/error.hpp"

namespace exfl::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues parse(std::istream& is, std::string_view source) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view s = line;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    const auto where = std::string(source) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw Error(ErrorCode::Parse, where + ": expected key=value");
    const auto key = trim(s.substr(0, eq));
    const auto value = trim(s.substr(eq + 1));
    if (key.empty()) throw Error(ErrorCode::Parse, where + ": empty key");
    if (!kv.emplace(std::string(key), std::string(value)).second)
      throw Error(ErrorCode::Parse, where + ": duplicate key '" + std::string(key) + "'");
  }
  return kv;
}

KeyValues parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file '" + path + "'");
  return parse(in, path);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace exfl::config
