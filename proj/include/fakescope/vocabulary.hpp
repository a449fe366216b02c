#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fakescope/error.hpp"

namespace fakescope {

using TokenId = std::int32_t;

/// Dense token <-> id mapping. The three reserved tokens (unknown, sequence
/// start, sequence end) are always present.
class Vocabulary {
 public:
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kEos = "</s>";

  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  /// Builds a vocabulary from `tokens` in the given order. Reserved tokens
  /// missing from the list are appended.
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
      if (!inserted) {
        throw ParameterError("duplicate vocabulary token '" + tokens_[i] + "'");
      }
    }
    unk_ = ensure(kUnk);
    bos_ = ensure(kBos);
    eos_ = ensure(kEos);
  }

  /// Reserved tokens first (unk, bos, eos), then `words` in the given order.
  static Vocabulary with_reserved_first(const std::vector<std::string>& words) {
    std::vector<std::string> all{std::string(kUnk), std::string(kBos), std::string(kEos)};
    all.insert(all.end(), words.begin(), words.end());
    return Vocabulary(std::move(all));
  }

  [[nodiscard]] std::size_t size() const { return tokens_.size(); }
  [[nodiscard]] TokenId unk_id() const { return unk_; }
  [[nodiscard]] TokenId bos_id() const { return bos_; }
  [[nodiscard]] TokenId eos_id() const { return eos_; }

  [[nodiscard]] bool is_reserved(TokenId id) const {
    return id == unk_ || id == bos_ || id == eos_;
  }

  [[nodiscard]] bool contains(TokenId id) const {
    return id >= 0 && static_cast<std::size_t>(id) < tokens_.size();
  }

  [[nodiscard]] const std::string& token(TokenId id) const {
    if (!contains(id)) throw ParameterError("token id out of range");
    return tokens_[static_cast<std::size_t>(id)];
  }

  [[nodiscard]] std::optional<TokenId> find(std::string_view text) const {
    auto it = index_.find(text);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  /// Id of `text`, or the unknown id when absent.
  [[nodiscard]] TokenId lookup(std::string_view text) const { return find(text).value_or(unk_); }

  [[nodiscard]] std::span<const std::string> tokens() const { return tokens_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  TokenId ensure(std::string_view reserved) {
    if (auto id = find(reserved)) return *id;
    tokens_.emplace_back(reserved);
    auto id = static_cast<TokenId>(tokens_.size() - 1);
    index_.emplace(tokens_.back(), id);
    return id;
  }

  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> index_;
  TokenId unk_ = 0;
  TokenId bos_ = 0;
  TokenId eos_ = 0;
};

}  // namespace fakescope
