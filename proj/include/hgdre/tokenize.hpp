#pragma once

#include <algorithm>
#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace hgdre {

inline bool is_punct_char(char c) {
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

inline std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

namespace detail {

// Contraction suffixes split off as their own tokens, longest first.
inline const std::vector<std::string>& contraction_suffixes() {
  static const std::vector<std::string> kSuffixes = {"n't", "'re", "'ve", "'ll",
                                                     "'s",  "'d",  "'m"};
  return kSuffixes;
}

inline bool ends_with_ci(std::string_view s, std::string_view suffix) {
  if (s.size() < suffix.size()) return false;
  for (size_t i = 0; i < suffix.size(); ++i) {
    char a = static_cast<char>(std::tolower(static_cast<unsigned char>(s[s.size() - suffix.size() + i])));
    if (a != suffix[i]) return false;
  }
  return true;
}

inline void emit_core(std::string_view core, std::vector<std::string>& out) {
  if (core.empty()) return;
  for (const auto& suf : contraction_suffixes()) {
    if (core.size() > suf.size() && ends_with_ci(core, suf)) {
      emit_core(core.substr(0, core.size() - suf.size()), out);
      out.emplace_back(core.substr(core.size() - suf.size()));
      return;
    }
  }
  out.emplace_back(core);
}

}  // namespace detail

// Deterministic whitespace + punctuation tokenizer. Leading/trailing
// punctuation characters become single-character tokens; common English
// contraction suffixes are split off. Apostrophes and periods inside a
// token (e.g. "Mr." keeps its dot peeled, "o'clock" stays whole) follow
// from these two rules only, so output is stable across runs.
inline std::vector<std::string> rule_tokenize(std::string_view text) {
  std::vector<std::string> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= n) break;
    size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view chunk = text.substr(i, j - i);
    i = j;

    // Peel leading punctuation.
    size_t b = 0;
    while (b < chunk.size() && is_punct_char(chunk[b]) && chunk[b] != '\'') {
      out.emplace_back(1, chunk[b]);
      ++b;
    }
    // Find trailing punctuation run (kept aside, emitted after the core).
    size_t e = chunk.size();
    while (e > b && is_punct_char(chunk[e - 1]) && chunk[e - 1] != '\'') --e;
    detail::emit_core(chunk.substr(b, e - b), out);
    for (size_t k = e; k < chunk.size(); ++k) out.emplace_back(1, chunk[k]);
  }
  return out;
}

}  // namespace hgdre
