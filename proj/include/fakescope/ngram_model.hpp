#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fakescope/detection_model.hpp"
#include "fakescope/distribution.hpp"
#include "fakescope/error.hpp"
#include "fakescope/vocabulary.hpp"

namespace fakescope {

struct NGramOptions {
  int order = 3;
  double discount = 0.75;
  std::uint64_t min_count = 2;
  /// Recorded in the model so callers know to lower-case text before lookup.
  bool case_fold = true;
};

namespace detail {

struct ContextHash {
  using is_transparent = void;
  std::size_t operator()(std::span<const TokenId> ids) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ ids.size();
    for (TokenId id : ids) {
      h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(id)) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h *= 0xff51afd7ed558ccdULL;
    }
    return static_cast<std::size_t>(h ^ (h >> 33));
  }
  std::size_t operator()(const std::vector<TokenId>& ids) const noexcept {
    return (*this)(std::span<const TokenId>(ids));
  }
};

struct ContextEq {
  using is_transparent = void;
  bool operator()(std::span<const TokenId> a, std::span<const TokenId> b) const noexcept {
    return std::equal(a.begin(), a.end(), b.begin(), b.end());
  }
};

template <typename Value>
using ContextMap = std::unordered_map<std::vector<TokenId>, Value, ContextHash, ContextEq>;

}  // namespace detail

/// Interpolated Kneser-Ney n-gram language model with a single absolute
/// discount.
///
/// The highest order uses raw counts. Lower orders use continuation counts
/// (number of distinct left extensions), except n-grams that begin with the
/// sequence-start token, which keep their raw counts because nothing can
/// precede them. The recursion bottoms out in the uniform distribution over
/// the whole vocabulary, so every token has strictly positive probability.
class NGramModel final : public DetectionModel {
 public:
  struct Successor {
    TokenId token = 0;
    std::uint64_t count = 0;
    friend bool operator==(const Successor&, const Successor&) = default;
  };

  /// Adjusted counts of every token observed after one context.
  struct ContextTable {
    std::vector<Successor> successors;  // sorted by token id
    std::uint64_t total = 0;
    friend bool operator==(const ContextTable&, const ContextTable&) = default;
  };

  /// levels[k] maps contexts of length k to their successor tables.
  using Level = detail::ContextMap<ContextTable>;

  NGramModel(int order, double discount, Vocabulary vocabulary, std::vector<Level> levels, bool case_folded)
      : order_(order),
        discount_(discount),
        vocabulary_(std::move(vocabulary)),
        levels_(std::move(levels)),
        case_folded_(case_folded) {
    if (order_ < 1) throw ParameterError("n-gram order must be >= 1");
    if (!(discount_ > 0.0 && discount_ < 1.0)) throw ParameterError("discount must lie in (0, 1)");
    if (levels_.size() != static_cast<std::size_t>(order_)) throw ParameterError("need one count level per order");
    for (std::size_t k = 0; k < levels_.size(); ++k) {
      for (auto& [context, table] : levels_[k]) {
        if (context.size() != k) throw ParameterError("context length does not match its level");
        std::uint64_t total = 0;
        for (const auto& s : table.successors) {
          if (!vocabulary_.contains(s.token)) throw ParameterError("token id out of range");
          if (s.count == 0) throw ParameterError("zero count in successor table");
          total += s.count;
        }
        for (TokenId id : context) {
          if (!vocabulary_.contains(id)) throw ParameterError("token id out of range");
        }
        table.total = total;
      }
    }
  }

  [[nodiscard]] int order() const { return order_; }
  [[nodiscard]] double discount() const { return discount_; }
  [[nodiscard]] const std::vector<Level>& levels() const { return levels_; }

  [[nodiscard]] std::string name() const override { return "kn" + std::to_string(order_); }
  [[nodiscard]] std::string kind() const override { return "builtin"; }
  [[nodiscard]] const Vocabulary& vocabulary() const override { return vocabulary_; }
  [[nodiscard]] bool supports(ScoringMode::Kind) const override { return true; }
  [[nodiscard]] bool case_folded() const override { return case_folded_; }

  /// p(token | context) in causal mode; `context` is the document prefix.
  [[nodiscard]] double probability(std::span<const TokenId> context, TokenId token) const {
    check_ids(context);
    check_id(token);
    std::vector<TokenId> scratch;
    return point(history(context, context.size(), scratch), token);
  }

  /// Masked mode scores the target by its exact posterior under the Markov
  /// chain: p(w | left) times the probability of the next order-1 tokens
  /// given w, renormalized over the vocabulary. Tokens beyond that reach
  /// cancel out, so only the window limit and the order matter.
  [[nodiscard]] Distribution predict(std::span<const TokenId> before, std::span<const TokenId> after,
                                     const ScoringMode& mode,
                                     std::vector<std::string>* /*warnings*/ = nullptr) const override {
    if (mode.kind == ScoringMode::Kind::causal) {
      std::vector<TokenId> scratch;
      auto tail = history(before, before.size(), scratch);
      check_ids(tail);
      return Distribution(dense(tail));
    }
    if (mode.window < 1) throw ParameterError("masked window must be >= 1");
    const auto window = static_cast<std::size_t>(mode.window);
    std::vector<TokenId> scratch;
    auto tail = history(before, window, scratch);
    check_ids(tail);
    const std::size_t reach = std::min({window, after.size(), static_cast<std::size_t>(order_ - 1)});
    auto right = after.first(reach);
    check_ids(right);

    std::vector<double> weights = dense(tail);
    if (!right.empty()) {
      std::vector<TokenId> seq(tail.begin(), tail.end());
      const std::size_t target = seq.size();
      seq.push_back(0);
      seq.insert(seq.end(), right.begin(), right.end());
      const std::size_t keep = static_cast<std::size_t>(order_ - 1);
      for (std::size_t w = 0; w < weights.size(); ++w) {
        seq[target] = static_cast<TokenId>(w);
        double p = weights[w];
        for (std::size_t j = 0; j < right.size(); ++j) {
          const std::size_t pos = target + 1 + j;
          const std::size_t start = pos > keep ? pos - keep : 0;
          p *= point(std::span<const TokenId>(seq).subspan(start, pos - start), right[j]);
        }
        weights[w] = p;
      }
    }
    return Distribution(std::move(weights));
  }

 private:
  void check_id(TokenId id) const {
    if (!vocabulary_.contains(id)) throw ParameterError("token id out of range");
  }
  void check_ids(std::span<const TokenId> ids) const {
    for (TokenId id : ids) check_id(id);
  }

  /// The last order-1 tokens of the visible history. The sequence-start
  /// token is prepended when the whole prefix fits inside `limit`.
  std::span<const TokenId> history(std::span<const TokenId> prefix, std::size_t limit,
                                   std::vector<TokenId>& scratch) const {
    const std::size_t keep = static_cast<std::size_t>(order_ - 1);
    const bool from_start = prefix.size() <= limit;
    const auto visible = from_start ? prefix : prefix.last(limit);
    if (visible.size() >= keep) return visible.last(keep);
    scratch.clear();
    if (from_start) scratch.push_back(vocabulary_.bos_id());
    scratch.insert(scratch.end(), visible.begin(), visible.end());
    return scratch;
  }

  const ContextTable* find(std::span<const TokenId> context) const {
    const auto& level = levels_[context.size()];
    auto it = level.find(context);
    return it == level.end() ? nullptr : &it->second;
  }

  double point(std::span<const TokenId> tail, TokenId token) const {
    double p = 1.0 / static_cast<double>(vocabulary_.size());
    for (std::size_t len = 0; len <= tail.size(); ++len) {
      const ContextTable* table = find(tail.last(len));
      if (table == nullptr || table->total == 0) continue;
      const auto total = static_cast<double>(table->total);
      p *= discount_ * static_cast<double>(table->successors.size()) / total;
      auto it = std::lower_bound(table->successors.begin(), table->successors.end(), token,
                                 [](const Successor& s, TokenId t) { return s.token < t; });
      if (it != table->successors.end() && it->token == token) {
        p += (static_cast<double>(it->count) - discount_) / total;
      }
    }
    return p;
  }

  std::vector<double> dense(std::span<const TokenId> tail) const {
    std::vector<double> p(vocabulary_.size(), 1.0 / static_cast<double>(vocabulary_.size()));
    for (std::size_t len = 0; len <= tail.size(); ++len) {
      const ContextTable* table = find(tail.last(len));
      if (table == nullptr || table->total == 0) continue;
      const auto total = static_cast<double>(table->total);
      const double backoff = discount_ * static_cast<double>(table->successors.size()) / total;
      for (double& x : p) x *= backoff;
      for (const auto& s : table->successors) {
        p[static_cast<std::size_t>(s.token)] += (static_cast<double>(s.count) - discount_) / total;
      }
    }
    return p;
  }

  int order_;
  double discount_;
  Vocabulary vocabulary_;
  std::vector<Level> levels_;
  bool case_folded_;
};

/// Trains an interpolated Kneser-Ney model on tokenized sequences. Each
/// sequence is wrapped in sequence-start/end tokens. Tokens seen fewer than
/// `min_count` times map to the unknown token.
inline NGramModel train_ngram(const std::vector<std::vector<std::string>>& corpus, const NGramOptions& options = {}) {
  if (options.order < 1) throw ParameterError("n-gram order must be >= 1");
  if (!(options.discount > 0.0 && options.discount < 1.0)) throw ParameterError("discount must lie in (0, 1)");
  if (options.min_count < 1) throw ParameterError("min_count must be >= 1");
  const bool has_tokens = std::any_of(corpus.begin(), corpus.end(), [](const auto& s) { return !s.empty(); });
  if (!has_tokens) throw DataError("empty training corpus");

  std::map<std::string_view, std::uint64_t> frequency;
  for (const auto& sequence : corpus) {
    for (const auto& token : sequence) ++frequency[token];
  }
  std::vector<std::string> words;
  for (const auto& [token, count] : frequency) {
    if (count < options.min_count) continue;
    if (token == Vocabulary::kUnk || token == Vocabulary::kBos || token == Vocabulary::kEos) continue;
    words.emplace_back(token);
  }
  Vocabulary vocabulary = Vocabulary::with_reserved_first(words);

  const auto order = static_cast<std::size_t>(options.order);
  // raw[k] holds counts of n-grams of length k + 1.
  std::vector<detail::ContextMap<std::uint64_t>> raw(order);
  std::vector<TokenId> ids;
  for (const auto& sequence : corpus) {
    if (sequence.empty()) continue;
    ids.clear();
    ids.push_back(vocabulary.bos_id());
    for (const auto& token : sequence) ids.push_back(vocabulary.lookup(token));
    ids.push_back(vocabulary.eos_id());
    const std::span<const TokenId> all(ids);
    for (std::size_t end = 1; end < ids.size(); ++end) {
      for (std::size_t len = 1; len <= order && len <= end + 1; ++len) {
        auto gram = all.subspan(end + 1 - len, len);
        auto& table = raw[len - 1];
        if (auto it = table.find(gram); it != table.end()) {
          ++it->second;
        } else {
          table.emplace(std::vector<TokenId>(gram.begin(), gram.end()), 1);
        }
      }
    }
  }

  std::vector<NGramModel::Level> levels(order);
  auto add = [&](std::span<const TokenId> gram, std::uint64_t count) {
    auto context = gram.first(gram.size() - 1);
    auto& level = levels[context.size()];
    auto it = level.find(context);
    if (it == level.end()) it = level.emplace(std::vector<TokenId>(context.begin(), context.end()), NGramModel::ContextTable{}).first;
    it->second.successors.push_back({gram.back(), count});
  };
  for (const auto& [gram, count] : raw[order - 1]) add(gram, count);
  for (std::size_t len = 1; len < order; ++len) {
    detail::ContextMap<std::uint64_t> continuation;
    for (const auto& [longer, count] : raw[len]) {
      auto suffix = std::span<const TokenId>(longer).subspan(1);
      if (auto it = continuation.find(suffix); it != continuation.end()) {
        ++it->second;
      } else {
        continuation.emplace(std::vector<TokenId>(suffix.begin(), suffix.end()), 1);
      }
    }
    for (const auto& [gram, count] : raw[len - 1]) {
      if (gram.front() == vocabulary.bos_id()) {
        add(gram, count);
      } else {
        add(gram, continuation.at(gram));
      }
    }
  }
  for (auto& level : levels) {
    for (auto& [context, table] : level) {
      std::sort(table.successors.begin(), table.successors.end(),
                [](const auto& a, const auto& b) { return a.token < b.token; });
    }
  }
  return NGramModel(options.order, options.discount, std::move(vocabulary), std::move(levels), options.case_fold);
}

// ---------------------------------------------------------------------------
// Model file
//
//   FAKESCOPE-NGRAM v1
//   order=<n>
//   discount=<d>
//   casefold=<0|1>
//   vocab <size>
//   <one token per line>
//   counts <records>
//   <context ids...> TAB | TAB <token id> TAB <count>
//   end
//
// Counts are the model's adjusted counts. Records are sorted by context
// length, then context ids, then token id.
// ---------------------------------------------------------------------------

inline constexpr std::string_view kModelMagic = "FAKESCOPE-NGRAM";
inline constexpr std::string_view kModelVersion = "v1";

inline void save_model(const NGramModel& model, std::ostream& out) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, model.discount());
  out << kModelMagic << ' ' << kModelVersion << '\n';
  out << "order=" << model.order() << '\n';
  out << "discount=" << std::string_view(buffer, static_cast<std::size_t>(end - buffer)) << '\n';
  out << "casefold=" << (model.case_folded() ? 1 : 0) << '\n';
  const auto& vocab = model.vocabulary();
  out << "vocab " << vocab.size() << '\n';
  for (const auto& token : vocab.tokens()) {
    if (token.find_first_of("\r\n") != std::string::npos || token.empty()) {
      throw ParameterError("vocabulary token cannot be stored in the model file");
    }
    out << token << '\n';
  }

  std::vector<const std::pair<const std::vector<TokenId>, NGramModel::ContextTable>*> entries;
  std::size_t records = 0;
  for (const auto& level : model.levels()) {
    for (const auto& entry : level) {
      entries.push_back(&entry);
      records += entry.second.successors.size();
    }
  }
  std::sort(entries.begin(), entries.end(), [](const auto* a, const auto* b) {
    if (a->first.size() != b->first.size()) return a->first.size() < b->first.size();
    return a->first < b->first;
  });
  out << "counts " << records << '\n';
  for (const auto* entry : entries) {
    std::string prefix;
    for (TokenId id : entry->first) prefix += std::to_string(id) + '\t';
    for (const auto& s : entry->second.successors) {
      out << prefix << "|\t" << s.token << '\t' << s.count << '\n';
    }
  }
  out << "end\n";
  if (!out) throw ModelError("failed writing model");
}

inline void save_model(const NGramModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot open '" + path.string() + "' for writing");
  save_model(model, out);
}

namespace detail {

[[noreturn]] inline void format_error(const std::string& what) {
  throw FormatError(what + " (expected " + std::string(kModelMagic) + " " + std::string(kModelVersion) + " model file)");
}

template <typename Int>
Int parse_int(std::string_view text, const std::string& what) {
  Int value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) format_error("bad " + what + " '" + std::string(text) + "'");
  return value;
}

inline std::string_view after_prefix(std::string_view line, std::string_view prefix, const std::string& what) {
  if (line.substr(0, prefix.size()) != prefix) format_error("missing " + what + " line");
  return line.substr(prefix.size());
}

}  // namespace detail

/// Reads a model written by save_model. Throws FormatError on any
/// corruption; no partially loaded model escapes.
inline NGramModel load_model(std::istream& in) {
  std::string line;
  auto next = [&](const std::string& what) -> std::string_view {
    if (!std::getline(in, line)) detail::format_error("truncated file: missing " + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  std::string_view header = next("header");
  const auto space = header.find(' ');
  if (space == std::string_view::npos || header.substr(0, space) != kModelMagic) detail::format_error("not a model file");
  if (header.substr(space + 1) != kModelVersion) {
    detail::format_error("unsupported model format version '" + std::string(header.substr(space + 1)) + "'");
  }
  const int order = detail::parse_int<int>(detail::after_prefix(next("order"), "order=", "order"), "order");
  if (order < 1) detail::format_error("bad order");
  const std::string_view discount_text = detail::after_prefix(next("discount"), "discount=", "discount");
  double discount = 0.0;
  {
    auto [ptr, ec] = std::from_chars(discount_text.data(), discount_text.data() + discount_text.size(), discount);
    if (ec != std::errc{} || ptr != discount_text.data() + discount_text.size() || !(discount > 0.0 && discount < 1.0)) {
      detail::format_error("bad discount");
    }
  }
  const auto casefold = detail::parse_int<int>(detail::after_prefix(next("casefold"), "casefold=", "casefold"), "casefold");
  const auto vocab_size = detail::parse_int<std::size_t>(detail::after_prefix(next("vocab"), "vocab ", "vocab"), "vocab size");
  std::vector<std::string> tokens;
  tokens.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) tokens.emplace_back(next("vocabulary entry"));

  Vocabulary vocabulary;
  try {
    vocabulary = Vocabulary(std::move(tokens));
  } catch (const ParameterError& e) {
    detail::format_error(e.what());
  }
  if (vocabulary.size() != vocab_size) detail::format_error("vocabulary lacks reserved tokens");

  const auto records = detail::parse_int<std::size_t>(detail::after_prefix(next("counts"), "counts ", "counts"), "record count");
  std::vector<NGramModel::Level> levels(static_cast<std::size_t>(order));
  std::vector<TokenId> context;
  for (std::size_t r = 0; r < records; ++r) {
    std::string_view record = next("count record");
    context.clear();
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = record.find('\t', start);
      fields.push_back(record.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 3 || fields[fields.size() - 3] != "|") detail::format_error("malformed count record");
    for (std::size_t i = 0; i + 3 < fields.size(); ++i) context.push_back(detail::parse_int<TokenId>(fields[i], "context id"));
    if (context.size() >= static_cast<std::size_t>(order)) detail::format_error("context longer than order - 1");
    const auto token = detail::parse_int<TokenId>(fields[fields.size() - 2], "token id");
    const auto count = detail::parse_int<std::uint64_t>(fields.back(), "count");
    if (count == 0 || !vocabulary.contains(token)) detail::format_error("bad count record");
    for (TokenId id : context) {
      if (!vocabulary.contains(id)) detail::format_error("bad context id");
    }
    auto& table = levels[context.size()][context];
    if (!table.successors.empty() && table.successors.back().token >= token) detail::format_error("unsorted count records");
    table.successors.push_back({token, count});
  }
  if (next("end marker") != "end") detail::format_error("missing end marker");
  return NGramModel(order, discount, std::move(vocabulary), std::move(levels), casefold != 0);
}

inline NGramModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open model '" + path.string() + "'");
  return load_model(in);
}

}  // namespace fakescope
