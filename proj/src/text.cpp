#include "sensenet/text.hpp"

#include <cctype>

namespace sensenet {

namespace {

// Bytes >= 0x80 are treated as word characters so UTF-8 sequences are
// never split mid-codepoint.
bool is_word_char(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

bool is_space(unsigned char c) { return std::isspace(c) != 0; }

bool is_digit_char(unsigned char c) { return std::isdigit(c) != 0; }

char lower(unsigned char c) { return static_cast<char>(std::tolower(c)); }

bool all_digits(const std::string& s, size_t b, size_t e) {
  if (b >= e) return false;
  for (size_t i = b; i < e; ++i)
    if (!is_digit_char(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

// Case-insensitive match of `tok` at position i, requiring a non-word
// character (or end of text) right after it.
bool protected_at(const std::string& text, size_t i, const std::string& tok) {
  if (i + tok.size() > text.size()) return false;
  for (size_t k = 0; k < tok.size(); ++k)
    if (lower(static_cast<unsigned char>(text[i + k])) != tok[k]) return false;
  size_t after = i + tok.size();
  return after == text.size() ||
         !is_word_char(static_cast<unsigned char>(text[after]));
}

}  // namespace

const std::vector<std::string>& protected_tokens() {
  static const std::vector<std::string> toks = {
      "e.g.", "i.e.", "<digit>", "<peos>", "<sep>", "<eos>", "<unk>", "<pad>"};
  return toks;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  const size_t n = text.size();
  size_t i = 0;
  while (i < n) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      ++i;
      continue;
    }
    bool matched = false;
    for (const auto& tok : protected_tokens()) {
      if (protected_at(text, i, tok)) {
        out.push_back(tok);
        i += tok.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (is_word_char(c)) {
      size_t j = i;
      while (j < n && is_word_char(static_cast<unsigned char>(text[j]))) ++j;
      if (all_digits(text, i, j)) {
        // Extend over decimal/thousands groups: digits ('.'|',') digits ...
        size_t k = j;
        while (k < n && (text[k] == '.' || text[k] == ',')) {
          size_t m = k + 1;
          size_t m2 = m;
          while (m2 < n && is_word_char(static_cast<unsigned char>(text[m2])))
            ++m2;
          if (m2 > m && all_digits(text, m, m2))
            k = m2;
          else
            break;
        }
        out.push_back("<digit>");
        i = k;
      } else {
        std::string w;
        w.reserve(j - i);
        for (size_t k = i; k < j; ++k)
          w.push_back(lower(static_cast<unsigned char>(text[k])));
        out.push_back(w);
        i = j;
      }
    } else {
      out.push_back(std::string(1, static_cast<char>(c)));
      ++i;
    }
  }
  return out;
}

std::vector<Span> split_sentences(const std::vector<std::string>& tokens) {
  std::vector<Span> spans;
  int start = 0;
  const int n = static_cast<int>(tokens.size());
  for (int t = 0; t < n; ++t) {
    if (tokens[t] == ".") {
      spans.emplace_back(start, t + 1);
      start = t + 1;
    }
  }
  if (start < n) spans.emplace_back(start, n);
  return spans;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string s;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) s.push_back(' ');
    s += tokens[i];
  }
  return s;
}

}  // namespace sensenet
