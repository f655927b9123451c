#include "superrotor/text_format.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "superrotor/error.hpp"

namespace superrotor {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string_view strip_comment(std::string_view line) {
  const auto hash = line.find('#');
  return hash == std::string_view::npos ? line : line.substr(0, hash);
}

std::string location(std::string_view source, int line) {
  std::ostringstream os;
  os << source << ":" << line;
  return os.str();
}

}  // namespace

std::vector<TextSection> parse_sections(std::string_view text, std::string_view source) {
  std::vector<TextSection> sections;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = text.find('\n', pos);
    const auto raw = text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos);
    pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;

    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(location(source, line_no) + ": unterminated section header");
      }
      const auto inner = trim(line.substr(1, line.size() - 2));
      if (inner.empty()) throw ConfigError(location(source, line_no) + ": empty section header");
      TextSection section;
      section.line = line_no;
      const auto space = inner.find_first_of(" \t");
      section.kind = std::string(inner.substr(0, space));
      if (space != std::string_view::npos) section.label = std::string(trim(inner.substr(space)));
      sections.push_back(std::move(section));
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(location(source, line_no) + ": expected 'key = value'");
    }
    if (sections.empty()) {
      throw ConfigError(location(source, line_no) + ": entry outside of any [section]");
    }
    TextEntry entry{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))),
                    line_no};
    if (entry.key.empty()) throw ConfigError(location(source, line_no) + ": empty key");
    auto& entries = sections.back().entries;
    const bool duplicate = std::any_of(entries.begin(), entries.end(),
                                       [&](const TextEntry& e) { return e.key == entry.key; });
    if (duplicate) {
      throw ConfigError(location(source, line_no) + ": duplicate key '" + entry.key + "'");
    }
    entries.push_back(std::move(entry));
  }
  return sections;
}

double parse_double(std::string_view token, std::string_view context) {
  token = trim(token);
  double value = 0.0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || token.empty()) {
    throw ConfigError(std::string(context) + ": '" + std::string(token) + "' is not a number");
  }
  if (!std::isfinite(value)) {
    throw ConfigError(std::string(context) + ": '" + std::string(token) + "' is not finite");
  }
  return value;
}

std::vector<double> parse_double_list(std::string_view value, std::string_view context) {
  std::vector<double> out;
  std::string normalized(value);
  std::replace(normalized.begin(), normalized.end(), ',', ' ');
  std::istringstream is(normalized);
  std::string token;
  while (is >> token) out.push_back(parse_double(token, context));
  return out;
}

SectionReader::SectionReader(const TextSection& section, std::string source)
    : section_(section), source_(std::move(source)) {}

const TextEntry* SectionReader::find(std::string_view key) const {
  for (const auto& e : section_.entries) {
    if (e.key == key) {
      used_.emplace(key);
      return &e;
    }
  }
  return nullptr;
}

bool SectionReader::has(std::string_view key) const {
  return std::any_of(section_.entries.begin(), section_.entries.end(),
                     [&](const TextEntry& e) { return e.key == key; });
}

void SectionReader::fail(std::string_view key, std::string_view message) const {
  std::ostringstream os;
  os << location(source_, section_.line) << ": [" << section_.kind;
  if (!section_.label.empty()) os << " " << section_.label;
  os << "] " << key << ": " << message;
  throw ConfigError(os.str());
}

std::string SectionReader::text(std::string_view key) const {
  const auto* e = find(key);
  if (!e) fail(key, "required key missing");
  return e->value;
}

std::string SectionReader::text(std::string_view key, std::string_view fallback) const {
  const auto* e = find(key);
  return e ? e->value : std::string(fallback);
}

double SectionReader::number(std::string_view key) const {
  const auto* e = find(key);
  if (!e) fail(key, "required key missing");
  return parse_double(e->value, location(source_, e->line) + " " + std::string(key));
}

double SectionReader::number(std::string_view key, double fallback) const {
  return optional_number(key).value_or(fallback);
}

std::optional<double> SectionReader::optional_number(std::string_view key) const {
  const auto* e = find(key);
  if (!e) return std::nullopt;
  return parse_double(e->value, location(source_, e->line) + " " + std::string(key));
}

long SectionReader::integer(std::string_view key) const {
  const double v = number(key);
  if (v != static_cast<double>(static_cast<long>(v))) fail(key, "expected an integer");
  return static_cast<long>(v);
}

long SectionReader::integer(std::string_view key, long fallback) const {
  return has(key) ? integer(key) : fallback;
}

bool SectionReader::boolean(std::string_view key, bool fallback) const {
  const auto* e = find(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "yes" || e->value == "1") return true;
  if (e->value == "false" || e->value == "no" || e->value == "0") return false;
  fail(key, "expected true/false");
}

std::vector<double> SectionReader::numbers(std::string_view key) const {
  const auto* e = find(key);
  if (!e) fail(key, "required key missing");
  return parse_double_list(e->value, location(source_, e->line) + " " + std::string(key));
}

void SectionReader::finish() const {
  for (const auto& e : section_.entries) {
    if (!used_.contains(e.key)) {
      throw ConfigError(location(source_, e.line) + ": unknown key '" + e.key + "' in [" +
                        section_.kind + "]");
    }
  }
}

}  // namespace superrotor
