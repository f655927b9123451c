#ifndef SUPERROTOR_TEXT_FORMAT_HPP
#define SUPERROTOR_TEXT_FORMAT_HPP

// Block-oriented plain text shared by the molecule database and run configs:
//
//   # comment
//   [kind optional-label]
//   key = value        # trailing comment
//
// Sections keep file order; keys are unique within a section.

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace superrotor {

struct TextEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct TextSection {
  std::string kind;
  std::string label;
  int line = 0;
  std::vector<TextEntry> entries;
};

std::vector<TextSection> parse_sections(std::string_view text, std::string_view source);

// Typed, schema-checked access to one section. Every getter marks its key as
// consumed; finish() rejects keys that nobody asked for.
class SectionReader {
 public:
  SectionReader(const TextSection& section, std::string source);

  bool has(std::string_view key) const;
  std::string text(std::string_view key) const;
  std::string text(std::string_view key, std::string_view fallback) const;
  double number(std::string_view key) const;
  double number(std::string_view key, double fallback) const;
  std::optional<double> optional_number(std::string_view key) const;
  long integer(std::string_view key) const;
  long integer(std::string_view key, long fallback) const;
  bool boolean(std::string_view key, bool fallback) const;
  std::vector<double> numbers(std::string_view key) const;

  void finish() const;

  const TextSection& section() const { return section_; }
  [[noreturn]] void fail(std::string_view key, std::string_view message) const;

 private:
  const TextEntry* find(std::string_view key) const;

  const TextSection& section_;
  std::string source_;
  mutable std::set<std::string, std::less<>> used_;
};

double parse_double(std::string_view token, std::string_view context);
std::vector<double> parse_double_list(std::string_view value, std::string_view context);

}  // namespace superrotor

#endif  // SUPERROTOR_TEXT_FORMAT_HPP
