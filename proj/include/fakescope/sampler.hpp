#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "fakescope/detection_model.hpp"
#include "fakescope/distribution.hpp"
#include "fakescope/error.hpp"

namespace fakescope {

struct SampleOptions {
  double temperature = 1.0;
  /// 0 disables truncation.
  std::size_t top_k = 0;
  std::uint64_t random_seed = 1;
  /// Ids that are never emitted (their mass is removed before truncation).
  std::vector<TokenId> banned;
};

/// The distribution a sampler actually draws from: keep the `top_k` most
/// probable ids (ties to the lower id) and renormalize, then raise to
/// 1/temperature and renormalize again.
inline std::vector<double> sampling_weights(std::span<const double> probs, double temperature, std::size_t top_k) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ParameterError("temperature must be > 0");
  std::vector<double> out(probs.begin(), probs.end());
  if (top_k > 0 && top_k < out.size()) {
    std::vector<double> kept(out.size(), 0.0);
    for (TokenId id : top_ids(probs, top_k)) kept[static_cast<std::size_t>(id)] = out[static_cast<std::size_t>(id)];
    out = std::move(kept);
  }
  double total = 0.0;
  for (double p : out) total += p;
  if (!(total > 0.0)) throw ParameterError("nothing left to sample from");
  for (double& p : out) p /= total;

  if (temperature != 1.0) {
    const double peak = *std::max_element(out.begin(), out.end());
    const double log_peak = std::log(peak);
    total = 0.0;
    for (double& p : out) {
      p = p > 0.0 ? std::exp((std::log(p) - log_peak) / temperature) : 0.0;
      total += p;
    }
    for (double& p : out) p /= total;
  }
  return out;
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every
/// platform, unlike std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Inverse-CDF draw from normalized weights.
inline TokenId draw(std::span<const double> weights, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    cumulative += weights[i];
    last_positive = i;
    if (u < cumulative) return static_cast<TokenId>(i);
  }
  return static_cast<TokenId>(last_positive);
}

/// Generates `length` tokens continuing `seed`. Deterministic given
/// `options.random_seed`.
inline std::vector<TokenId> sample(const DetectionModel& model, std::span<const TokenId> seed, std::size_t length,
                                   const SampleOptions& options = {}) {
  if (length < 1) throw ParameterError("sample length must be >= 1");
  if (!(options.temperature > 0.0)) throw ParameterError("temperature must be > 0");
  std::mt19937_64 rng(options.random_seed);
  std::vector<TokenId> context(seed.begin(), seed.end());
  std::vector<TokenId> generated;
  generated.reserve(length);
  for (std::size_t step = 0; step < length; ++step) {
    Distribution dist = model.next_distribution(context);
    std::vector<double> probs(dist.probs().begin(), dist.probs().end());
    for (TokenId id : options.banned) {
      if (id >= 0 && static_cast<std::size_t>(id) < probs.size()) probs[static_cast<std::size_t>(id)] = 0.0;
    }
    const auto weights = sampling_weights(probs, options.temperature, options.top_k);
    const TokenId next = draw(weights, rng);
    generated.push_back(next);
    context.push_back(next);
  }
  return generated;
}

}  // namespace fakescope
