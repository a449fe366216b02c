#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fakescope/error.hpp"
#include "fakescope/vocabulary.hpp"

namespace fakescope {

/// How the detection model sees the context around the scored position.
struct ScoringMode {
  enum class Kind { causal, masked };

  Kind kind = Kind::causal;
  /// Tokens on each side of the target; only read in masked mode.
  int window = 30;

  static ScoringMode causal() { return {}; }
  static ScoringMode masked(int window = 30) {
    if (window < 1) throw ParameterError("masked window must be >= 1");
    return {Kind::masked, window};
  }

  friend bool operator==(const ScoringMode& a, const ScoringMode& b) {
    if (a.kind != b.kind) return false;
    return a.kind == Kind::causal || a.window == b.window;
  }
};

inline std::string_view to_string(ScoringMode::Kind kind) {
  return kind == ScoringMode::Kind::causal ? "causal" : "masked";
}

inline ScoringMode::Kind parse_scoring_kind(std::string_view text) {
  if (text == "causal") return ScoringMode::Kind::causal;
  if (text == "masked") return ScoringMode::Kind::masked;
  throw ParameterError("unknown scoring mode '" + std::string(text) + "'");
}

/// Probability vector indexed by vocabulary id. Normalized on construction.
class Distribution {
 public:
  Distribution() = default;

  explicit Distribution(std::vector<double> weights) : probs_(std::move(weights)) {
    if (probs_.empty()) throw ParameterError("empty distribution");
    double total = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0) throw ParameterError("distribution has a negative or non-finite entry");
      total += p;
    }
    if (!(total > 0.0)) throw ParameterError("distribution has zero mass");
    if (total != 1.0) {
      for (double& p : probs_) p /= total;
    }
  }

  [[nodiscard]] std::size_t size() const { return probs_.size(); }
  [[nodiscard]] double operator[](TokenId id) const { return probs_.at(static_cast<std::size_t>(id)); }
  [[nodiscard]] std::span<const double> probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

/// Natural-log entropy; zero-probability terms contribute nothing.
inline double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

inline double entropy(const Distribution& dist) { return entropy(dist.probs()); }

/// True when `a` ranks ahead of `b`: higher probability, ties to the lower id.
inline bool ranks_before(std::span<const double> probs, TokenId a, TokenId b) {
  const double pa = probs[static_cast<std::size_t>(a)];
  const double pb = probs[static_cast<std::size_t>(b)];
  return pa > pb || (pa == pb && a < b);
}

/// 1-based rank of `id` when ids are ordered by probability descending,
/// ties broken by ascending id.
inline std::size_t rank_of(std::span<const double> probs, TokenId id) {
  if (id < 0 || static_cast<std::size_t>(id) >= probs.size()) throw ParameterError("token id out of range");
  const double target = probs[static_cast<std::size_t>(id)];
  std::size_t ahead = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    if (p > target || (p == target && static_cast<TokenId>(i) < id)) ++ahead;
  }
  return ahead + 1;
}

inline std::size_t rank_of(const Distribution& dist, TokenId id) { return rank_of(dist.probs(), id); }

/// The `k` highest-ranked ids, in rank order.
inline std::vector<TokenId> top_ids(std::span<const double> probs, std::size_t k) {
  std::vector<TokenId> ids(probs.size());
  std::iota(ids.begin(), ids.end(), TokenId{0});
  k = std::min(k, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(),
                    [&](TokenId a, TokenId b) { return ranks_before(probs, a, b); });
  ids.resize(k);
  return ids;
}

inline std::vector<TokenId> top_ids(const Distribution& dist, std::size_t k) { return top_ids(dist.probs(), k); }

}  // namespace fakescope
