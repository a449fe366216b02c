#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "fakescope/error.hpp"
#include "fakescope/vocabulary.hpp"

namespace fakescope {

struct Token {
  /// Normalized form used for vocabulary lookup (lower-cased when folding).
  std::string text;
  /// Byte offsets [start, end) into the source text.
  std::size_t start = 0;
  std::size_t end = 0;
  TokenId vocab_id = -1;

  friend bool operator==(const Token&, const Token&) = default;
};

namespace unicode {

struct Decoded {
  char32_t code = 0;
  std::size_t length = 0;
};

/// Decodes one UTF-8 scalar at `pos`. Rejects overlong forms, surrogates and
/// values past U+10FFFF.
inline Decoded decode(std::string_view text, std::size_t pos) {
  auto byte = [&](std::size_t i) { return static_cast<unsigned char>(text[i]); };
  const unsigned char lead = byte(pos);
  if (lead < 0x80) return {lead, 1};
  std::size_t length = 0;
  char32_t code = 0;
  char32_t min = 0;
  if ((lead & 0xE0) == 0xC0) {
    length = 2, code = lead & 0x1F, min = 0x80;
  } else if ((lead & 0xF0) == 0xE0) {
    length = 3, code = lead & 0x0F, min = 0x800;
  } else if ((lead & 0xF8) == 0xF0) {
    length = 4, code = lead & 0x07, min = 0x10000;
  } else {
    throw DataError("invalid UTF-8 at byte " + std::to_string(pos));
  }
  if (pos + length > text.size()) throw DataError("invalid UTF-8 at byte " + std::to_string(pos));
  for (std::size_t i = 1; i < length; ++i) {
    const unsigned char cont = byte(pos + i);
    if ((cont & 0xC0) != 0x80) throw DataError("invalid UTF-8 at byte " + std::to_string(pos));
    code = (code << 6) | (cont & 0x3F);
  }
  if (code < min || code > 0x10FFFF || (code >= 0xD800 && code <= 0xDFFF)) {
    throw DataError("invalid UTF-8 at byte " + std::to_string(pos));
  }
  return {code, length};
}

inline void encode(char32_t code, std::string& out) {
  if (code < 0x80) {
    out += static_cast<char>(code);
  } else if (code < 0x800) {
    out += static_cast<char>(0xC0 | (code >> 6));
    out += static_cast<char>(0x80 | (code & 0x3F));
  } else if (code < 0x10000) {
    out += static_cast<char>(0xE0 | (code >> 12));
    out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (code & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (code >> 18));
    out += static_cast<char>(0x80 | ((code >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((code >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (code & 0x3F));
  }
}

inline bool is_space(char32_t c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\r': case U'\v': case U'\f':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029: case 0x202F:
    case 0x205F: case 0x3000: case 0x200B: case 0xFEFF:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

/// Letters, digits and combining marks. Outside ASCII this works by block:
/// punctuation, symbol, arrow, box-drawing and emoji blocks are excluded and
/// everything else counts as a word character.
inline bool is_word(char32_t c) {
  if (c < 0x80) return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9');
  if (c <= 0xBF) return c == 0xAA || c == 0xB5 || c == 0xBA;
  if (c == 0xD7 || c == 0xF7) return false;
  if (c >= 0x2000 && c <= 0x2BFF) return false;
  if (c >= 0x2E00 && c <= 0x2E7F) return false;
  if (c >= 0x3000 && c <= 0x303F) return false;
  if (c >= 0xFE10 && c <= 0xFE1F) return false;
  if (c >= 0xFE30 && c <= 0xFE4F) return false;
  if ((c >= 0xFF01 && c <= 0xFF0F) || (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
      (c >= 0xFF5B && c <= 0xFF65)) {
    return false;
  }
  if (c >= 0x1F000 && c <= 0x1FAFF) return false;
  return true;
}

/// Simple lower-casing for ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
inline char32_t fold(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 0x20;
  if (c < 0xC0) return c;
  if (c <= 0xDE) return c == 0xD7 ? c : c + 0x20;
  if (c >= 0x100 && c <= 0x137) return c | 1U;
  if (c >= 0x139 && c <= 0x148) return (c & 1U) ? c + 1 : c;
  if (c >= 0x14A && c <= 0x177) return c | 1U;
  if (c == 0x178) return 0xFF;
  if (c >= 0x179 && c <= 0x17E) return (c & 1U) ? c + 1 : c;
  if (c >= 0x391 && c <= 0x3A9 && c != 0x3A2) return c + 0x20;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

}  // namespace unicode

/// Splits UTF-8 text into word tokens (maximal runs of letters/digits) and
/// single-character punctuation tokens; whitespace separates.
inline std::vector<Token> tokenize(std::string_view text, bool case_fold = true) {
  std::vector<Token> tokens;
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t pos = 0;
  std::size_t word = kNone;
  while (pos < text.size()) {
    const auto [code, length] = unicode::decode(text, pos);
    if (unicode::is_space(code)) {
      word = kNone;
    } else if (unicode::is_word(code)) {
      if (word == kNone) {
        tokens.push_back(Token{{}, pos, pos, -1});
        word = tokens.size() - 1;
      }
      Token& current = tokens[word];
      if (case_fold) {
        unicode::encode(unicode::fold(code), current.text);
      } else {
        current.text.append(text.substr(pos, length));
      }
      current.end = pos + length;
    } else {
      word = kNone;
      tokens.push_back(Token{std::string(text.substr(pos, length)), pos, pos + length, -1});
    }
    pos += length;
  }
  if (tokens.empty()) throw DataError("no tokens");
  return tokens;
}

/// Same as tokenize, with vocabulary ids filled in (unknown id for OOV).
inline std::vector<Token> tokenize(std::string_view text, const Vocabulary& vocabulary, bool case_fold) {
  auto tokens = tokenize(text, case_fold);
  for (auto& token : tokens) token.vocab_id = vocabulary.lookup(token.text);
  return tokens;
}

/// Token strings only; empty text yields an empty list instead of an error.
inline std::vector<std::string> split_words(std::string_view text, bool case_fold = true) {
  std::vector<std::string> words;
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) return words;
  try {
    for (auto& token : tokenize(text, case_fold)) words.push_back(std::move(token.text));
  } catch (const DataError& e) {
    if (std::string_view(e.what()) != "no tokens") throw;
  }
  return words;
}

/// Joins token strings into readable text that tokenizes back to the same
/// sequence: word tokens are always space-separated, closing punctuation
/// attaches left, opening punctuation attaches right.
inline std::string detokenize(const std::vector<std::string>& tokens) {
  auto attaches_left = [](std::string_view t) {
    return t == "." || t == "," || t == ";" || t == ":" || t == "!" || t == "?" || t == ")" || t == "]" ||
           t == "}" || t == "%" || t == "'" || t == "\xE2\x80\x99";
  };
  auto attaches_right = [](std::string_view t) {
    return t == "(" || t == "[" || t == "{" || t == "$" || t == "'" || t == "\xE2\x80\x99";
  };
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && !attaches_left(tokens[i]) && !attaches_right(tokens[i - 1])) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace fakescope
