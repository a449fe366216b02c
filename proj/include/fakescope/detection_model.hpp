#pragma once

#include <span>
#include <string>
#include <vector>

#include "fakescope/distribution.hpp"
#include "fakescope/vocabulary.hpp"

namespace fakescope {

/// Anything that yields a full next-token distribution for a position.
///
/// Implementations are immutable once constructed and may be queried from
/// several threads at once.
class DetectionModel {
 public:
  virtual ~DetectionModel() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  /// "builtin" or "external".
  [[nodiscard]] virtual std::string kind() const = 0;
  [[nodiscard]] virtual const Vocabulary& vocabulary() const = 0;
  [[nodiscard]] virtual bool supports(ScoringMode::Kind kind) const = 0;
  /// Whether input text must be lower-cased before vocabulary lookup.
  [[nodiscard]] virtual bool case_folded() const = 0;

  /// Distribution over the token at the position between `before` and
  /// `after`. `before` is the complete document prefix and `after` the
  /// complete suffix; the model applies its own context limits. Causal
  /// models ignore `after`. Non-fatal anomalies are appended to `warnings`.
  [[nodiscard]] virtual Distribution predict(std::span<const TokenId> before, std::span<const TokenId> after,
                                             const ScoringMode& mode,
                                             std::vector<std::string>* warnings = nullptr) const = 0;

  /// Causal distribution after `context`.
  [[nodiscard]] Distribution next_distribution(std::span<const TokenId> context) const {
    return predict(context, {}, ScoringMode::causal());
  }
};

}  // namespace fakescope
