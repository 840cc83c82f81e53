#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <regex>
#include <string>
#include <string_view>

#include "ensconf/core/json.hpp"
#include "ensconf/core/types.hpp"
#include "ensconf/util/text.hpp"

namespace ensconf::orchestration {

namespace detail {

inline std::optional<std::string> last_match(const std::string& s, const std::regex& re,
                                             std::size_t group,
                                             bool (*accept)(const std::string&, int), int arg) {
  std::optional<std::string> found;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    std::string m = (*it)[group].str();
    if (accept(m, arg)) found = std::move(m);
  }
  return found;
}

inline bool letter_in_range(const std::string& m, int choice_count) {
  if (m.size() != 1) return false;
  const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(m[0])));
  return c >= 'A' && c < 'A' + choice_count;
}

inline bool accept_any(const std::string&, int) { return true; }

}  // namespace detail

// Final answer label from free text; nullopt when no unambiguous label is found.
// yes/no: the last "answer is/: yes|no" statement, else the last standalone yes/no.
// multiple choice: the last "Answer: X" / "answer is (X)" in range, else the last
// parenthesized letter, else the last standalone capital letter in range.
inline std::optional<Label> parse_answer(std::string_view raw, AnswerFormat format,
                                         int choice_count) {
  const std::string s(raw);
  if (format == AnswerFormat::yes_no) {
    static const std::regex stated(R"(answer\s*(?:is|:)?\s*[:\-]?\s*\**\s*(yes|no)\b)",
                                   std::regex::icase);
    static const std::regex bare(R"(\b(yes|no)\b)", std::regex::icase);
    auto m = detail::last_match(s, stated, 1, detail::accept_any, 0);
    if (!m) m = detail::last_match(s, bare, 1, detail::accept_any, 0);
    if (!m) return std::nullopt;
    return text::to_lower(*m);
  }
  // Only capital letters count as labels; "the answer is a ..." is prose.
  static const std::regex stated(
      R"([Aa][Nn][Ss][Ww][Ee][Rr]\s*(?:[Ii][Ss])?\s*[:\-]?\s*\**\s*\(?([A-Z])\)?(?![A-Za-z]))");
  static const std::regex paren(R"(\(([A-Z])\))");
  static const std::regex bare(R"((?:^|[^A-Za-z'])([A-Z])(?![A-Za-z']))");
  auto m = detail::last_match(s, stated, 1, detail::letter_in_range, choice_count);
  if (!m) m = detail::last_match(s, paren, 1, detail::letter_in_range, choice_count);
  if (!m) m = detail::last_match(s, bare, 1, detail::letter_in_range, choice_count);
  if (!m) return std::nullopt;
  return std::string(1, static_cast<char>(std::toupper(static_cast<unsigned char>((*m)[0]))));
}

// Verbalized confidence on a 0-100 scale mapped to [0,1]. Scale descriptions
// ("0 to 100", "out of 100") are ignored; explicit percentages and
// "confidence: N" statements take precedence over bare numbers.
inline std::optional<double> parse_confidence(std::string_view raw) {
  std::string s = text::to_lower(raw);
  static const std::regex scale(
      R"((?:scale\s+(?:of|from)\s+)?\b0\s*(?:-|–|to)\s*100\b|\bout\s+of\s+100\b|/\s*100\b)");
  static const std::regex marked(
      R"((\d+(?:\.\d+)?)\s*(?:%|percent|out\s+of\s+100|/\s*100))");
  static const std::regex labeled(R"(confiden\w*\D{0,20}?(\d+(?:\.\d+)?))");
  static const std::regex number(R"((\d+(?:\.\d+)?))");

  auto value_of = [](const std::string& m) {
    double v = std::stod(m);
    if (m.find('.') != std::string::npos && v <= 1.0) v *= 100.0;
    return std::clamp(v, 0.0, 100.0) / 100.0;
  };

  std::smatch sm;
  if (std::regex_search(s, sm, marked)) return value_of(sm[1].str());
  const std::string stripped = std::regex_replace(s, scale, " ");
  if (std::regex_search(stripped, sm, labeled)) return value_of(sm[1].str());
  std::optional<std::string> last;
  for (auto it = std::sregex_iterator(stripped.begin(), stripped.end(), number);
       it != std::sregex_iterator(); ++it) {
    last = (*it)[1].str();
  }
  if (!last) return std::nullopt;
  return value_of(*last);
}

// First JSON object in a reply, tolerating code fences and surrounding prose.
inline std::optional<json> extract_json_object(std::string_view raw) {
  const std::string s(raw);
  auto try_parse = [](const std::string& t) -> std::optional<json> {
    json j = json::parse(t, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
  };
  if (auto j = try_parse(s)) return j;
  for (std::size_t start = s.find('{'); start != std::string::npos;
       start = s.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escape = false;
    for (std::size_t i = start; i < s.size(); ++i) {
      const char c = s[i];
      if (in_string) {
        if (escape) {
          escape = false;
        } else if (c == '\\') {
          escape = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}' && --depth == 0) {
        if (auto j = try_parse(s.substr(start, i - start + 1))) return j;
        break;
      }
    }
  }
  return std::nullopt;
}

// Number from a JSON value that may be a number or numeric string.
inline std::optional<double> json_number(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      std::size_t used = 0;
      const std::string s = text::trim(j.get<std::string>());
      double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
  }
  return std::nullopt;
}

}  // namespace ensconf::orchestration
