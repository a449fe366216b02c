#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "fakescope/detection_model.hpp"
#include "fakescope/distribution.hpp"
#include "fakescope/parallel.hpp"
#include "fakescope/tokenizer.hpp"

namespace fakescope {

struct Prediction {
  std::string token;
  double prob = 0.0;
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Per-token statistics: probability, rank and entropy, plus the
/// probability relative to the top prediction and the top five predictions.
struct TokenScore {
  double prob = 0.0;
  std::size_t rank = 0;
  /// Nats.
  double entropy = 0.0;
  double frac_prob = 0.0;
  std::vector<Prediction> top5;
  /// The source token was out of vocabulary and scored as the unknown token.
  bool unknown = false;

  friend bool operator==(const TokenScore&, const TokenScore&) = default;
};

struct ScoredDocument {
  std::string text;
  std::vector<Token> tokens;
  std::vector<TokenScore> scores;
  std::string model_name;
  ScoringMode mode;
  std::size_t vocab_size = 0;

  [[nodiscard]] std::size_t size() const { return tokens.size(); }
};

inline constexpr std::size_t kTopPredictions = 5;

/// Scores the token `actual` under `probs`.
inline TokenScore score_position(std::span<const double> probs, TokenId actual, const Vocabulary& vocabulary) {
  TokenScore score;
  score.prob = probs[static_cast<std::size_t>(actual)];
  score.rank = rank_of(probs, actual);
  score.entropy = entropy(probs);
  const auto top = top_ids(probs, kTopPredictions);
  const double best = probs[static_cast<std::size_t>(top.front())];
  score.frac_prob = best > 0.0 ? score.prob / best : 0.0;
  for (TokenId id : top) score.top5.push_back({vocabulary.token(id), probs[static_cast<std::size_t>(id)]});
  score.unknown = actual == vocabulary.unk_id();
  return score;
}

/// Scores already-tokenized input. Tokens must carry vocabulary ids.
inline ScoredDocument score_tokens(const DetectionModel& model, std::string text, std::vector<Token> tokens,
                                   const ScoringMode& mode, std::vector<std::string>* warnings = nullptr) {
  if (tokens.empty()) throw DataError("no tokens");
  if (!model.supports(mode.kind)) {
    throw CapabilityError("model '" + model.name() + "' does not support " + std::string(to_string(mode.kind)) +
                          " scoring");
  }
  const auto& vocabulary = model.vocabulary();
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& token : tokens) ids.push_back(token.vocab_id);

  ScoredDocument doc;
  doc.model_name = model.name();
  doc.mode = mode;
  doc.vocab_size = vocabulary.size();
  doc.scores.reserve(tokens.size());
  const std::span<const TokenId> all(ids);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Distribution dist = model.predict(all.first(i), all.subspan(i + 1), mode, warnings);
    doc.scores.push_back(score_position(dist.probs(), ids[i], vocabulary));
  }
  doc.text = std::move(text);
  doc.tokens = std::move(tokens);
  return doc;
}

/// Tokenizes `text` with the model's folding rule and scores every token.
inline ScoredDocument score_document(const DetectionModel& model, std::string_view text,
                                     const ScoringMode& mode = ScoringMode::causal(),
                                     std::vector<std::string>* warnings = nullptr) {
  auto tokens = tokenize(text, model.vocabulary(), model.case_folded());
  return score_tokens(model, std::string(text), std::move(tokens), mode, warnings);
}

/// Scores many documents, spreading them over `threads` workers. Output
/// order matches input order.
inline std::vector<ScoredDocument> score_documents(const DetectionModel& model, const std::vector<std::string>& texts,
                                                   const ScoringMode& mode = ScoringMode::causal(),
                                                   unsigned threads = 0) {
  std::vector<ScoredDocument> out(texts.size());
  parallel_for(texts.size(), [&](std::size_t i) { out[i] = score_document(model, texts[i], mode); }, threads);
  return out;
}

}  // namespace fakescope
