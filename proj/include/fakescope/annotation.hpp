#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fakescope/error.hpp"
#include "fakescope/scoring.hpp"

namespace fakescope {

/// Rank thresholds (inclusive upper bounds) and one color per bucket; the
/// last bucket takes every rank past the final threshold.
struct BucketScheme {
  std::vector<std::size_t> thresholds{10, 100, 1000};
  std::vector<std::string> colors{"green", "yellow", "red", "purple"};

  [[nodiscard]] std::size_t bucket_count() const { return thresholds.size() + 1; }

  void validate() const {
    if (thresholds.empty()) throw ParameterError("bucket scheme needs at least one threshold");
    if (thresholds.front() < 1) throw ParameterError("bucket thresholds must be positive");
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
      if (thresholds[i] <= thresholds[i - 1]) throw ParameterError("bucket thresholds must be strictly ascending");
    }
    if (colors.size() != thresholds.size() + 1) throw ParameterError("need one color per bucket");
  }

  /// Scheme with the given thresholds and the default palette, purple last.
  static BucketScheme with_thresholds(std::vector<std::size_t> thresholds) {
    static const std::vector<std::string> palette{"green", "yellow", "red", "orange", "blue", "cyan"};
    BucketScheme scheme;
    scheme.colors.clear();
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      scheme.colors.push_back(i < palette.size() ? palette[i] : "bucket" + std::to_string(i));
    }
    scheme.colors.emplace_back("purple");
    scheme.thresholds = std::move(thresholds);
    scheme.validate();
    return scheme;
  }

  friend bool operator==(const BucketScheme&, const BucketScheme&) = default;
};

/// Smallest bucket whose threshold is >= rank, else the last bucket.
inline std::size_t bucket_of(std::size_t rank, const BucketScheme& scheme = {}) {
  if (rank < 1) throw ParameterError("rank must be >= 1");
  auto it = std::lower_bound(scheme.thresholds.begin(), scheme.thresholds.end(), rank);
  return static_cast<std::size_t>(it - scheme.thresholds.begin());
}

inline constexpr std::size_t kFracProbBins = 10;
inline constexpr std::size_t kEntropyBins = 20;

/// Equal-width bin of `value` over [0, upper]; `upper` itself lands in the
/// last bin.
inline std::size_t equal_width_bin(double value, double upper, std::size_t bins) {
  if (!(upper > 0.0) || !(value > 0.0)) return 0;
  const auto bin = static_cast<std::size_t>(std::floor(value / upper * static_cast<double>(bins)));
  return std::min(bin, bins - 1);
}

struct HistogramSet {
  std::vector<std::size_t> bucket_counts;
  /// 10 bins over [0, 1].
  std::vector<std::size_t> fracp_hist;
  /// 20 bins over [0, entropy_max].
  std::vector<std::size_t> entropy_hist;
  /// ln |V| of the scoring vocabulary.
  double entropy_max = 0.0;
};

struct AnnotatedDocument {
  ScoredDocument scored;
  BucketScheme scheme;
  std::vector<std::size_t> buckets;
  HistogramSet histograms;
};

inline AnnotatedDocument annotate(ScoredDocument scored, const BucketScheme& scheme = {}) {
  scheme.validate();
  AnnotatedDocument out;
  out.scheme = scheme;
  auto& h = out.histograms;
  h.bucket_counts.assign(scheme.bucket_count(), 0);
  h.fracp_hist.assign(kFracProbBins, 0);
  h.entropy_hist.assign(kEntropyBins, 0);
  h.entropy_max = scored.vocab_size > 1 ? std::log(static_cast<double>(scored.vocab_size)) : 0.0;
  out.buckets.reserve(scored.scores.size());
  for (const auto& score : scored.scores) {
    const std::size_t bucket = bucket_of(score.rank, scheme);
    out.buckets.push_back(bucket);
    ++h.bucket_counts[bucket];
    ++h.fracp_hist[equal_width_bin(score.frac_prob, 1.0, kFracProbBins)];
    ++h.entropy_hist[equal_width_bin(score.entropy, h.entropy_max, kEntropyBins)];
  }
  out.scored = std::move(scored);
  return out;
}

struct NextWord {
  std::string token;
  std::size_t rank = 0;
  double prob = 0.0;
};

struct Tooltip {
  std::vector<Prediction> top5;
  std::optional<NextWord> next;
};

/// Hover information for token `index`: its top predictions and how the
/// following token fared.
inline Tooltip tooltip_payload(const ScoredDocument& scored, std::ptrdiff_t index) {
  if (index < 0 || static_cast<std::size_t>(index) >= scored.scores.size()) {
    throw ParameterError("token index " + std::to_string(index) + " out of range");
  }
  const auto i = static_cast<std::size_t>(index);
  Tooltip tip{scored.scores[i].top5, std::nullopt};
  if (i + 1 < scored.scores.size()) {
    const auto& following = scored.scores[i + 1];
    tip.next = NextWord{scored.tokens[i + 1].text, following.rank, following.prob};
  }
  return tip;
}

}  // namespace fakescope
