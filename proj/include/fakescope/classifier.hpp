#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fakescope/annotation.hpp"
#include "fakescope/error.hpp"
#include "fakescope/scoring.hpp"

namespace fakescope {

enum class Label { real, fake };

inline std::string_view to_string(Label label) { return label == Label::real ? "real" : "fake"; }

inline Label parse_label(std::string_view text) {
  if (text == "real") return Label::real;
  if (text == "fake") return Label::fake;
  throw DataError("label must be \"real\" or \"fake\", got \"" + std::string(text) + "\"");
}

struct FeatureVector {
  std::vector<std::string> schema;
  std::vector<double> values;
};

// ---------------------------------------------------------------------------
// Document features
// ---------------------------------------------------------------------------

/// Mean per-token probability.
inline FeatureVector features_avg_prob(const ScoredDocument& doc) {
  if (doc.scores.empty()) throw DataError("no tokens");
  double sum = 0.0;
  for (const auto& s : doc.scores) sum += s.prob;
  return {{"avg_prob"}, {sum / static_cast<double>(doc.scores.size())}};
}

/// Mean per-token natural-log probability.
inline FeatureVector features_avg_log_prob(const ScoredDocument& doc) {
  if (doc.scores.empty()) throw DataError("no tokens");
  double sum = 0.0;
  for (const auto& s : doc.scores) sum += std::log(std::max(s.prob, 1e-300));
  return {{"avg_log_prob"}, {sum / static_cast<double>(doc.scores.size())}};
}

/// Human-readable name of each bucket, e.g. "rank<=10" ... "rank>1000".
inline std::vector<std::string> bucket_feature_names(const BucketScheme& scheme) {
  std::vector<std::string> names;
  for (std::size_t t : scheme.thresholds) names.push_back("rank<=" + std::to_string(t));
  names.push_back("rank>" + std::to_string(scheme.thresholds.back()));
  return names;
}

/// Fraction of tokens falling in each rank bucket.
inline FeatureVector features_topk_buckets(const ScoredDocument& doc, const BucketScheme& scheme = {}) {
  if (doc.scores.empty()) throw DataError("no tokens");
  scheme.validate();
  std::vector<double> fractions(scheme.bucket_count(), 0.0);
  for (const auto& s : doc.scores) fractions[bucket_of(s.rank, scheme)] += 1.0;
  for (double& f : fractions) f /= static_cast<double>(doc.scores.size());
  return {bucket_feature_names(scheme), std::move(fractions)};
}

/// Word list for bag-of-words features, fixed from training documents.
class BowVocabulary {
 public:
  explicit BowVocabulary(std::vector<std::string> words) : words_(std::move(words)) {
    if (words_.empty()) throw ParameterError("bag-of-words vocabulary is empty");
    std::sort(words_.begin(), words_.end());
    words_.erase(std::unique(words_.begin(), words_.end()), words_.end());
    for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
  }

  /// Every token type that occurs in at least `min_docs` of `documents`.
  static BowVocabulary from_documents(const std::vector<const ScoredDocument*>& documents, std::size_t min_docs = 1) {
    std::map<std::string, std::size_t> doc_freq;
    for (const auto* doc : documents) {
      std::set<std::string_view> seen;
      for (const auto& t : doc->tokens) seen.insert(t.text);
      for (auto word : seen) ++doc_freq[std::string(word)];
    }
    std::vector<std::string> words;
    for (const auto& [word, df] : doc_freq) {
      if (df >= min_docs) words.push_back(word);
    }
    return BowVocabulary(std::move(words));
  }

  [[nodiscard]] const std::vector<std::string>& words() const { return words_; }
  [[nodiscard]] bool contains(std::string_view word) const { return index_.find(word) != index_.end(); }

  /// Length-normalized counts; words outside the vocabulary are ignored.
  [[nodiscard]] FeatureVector features(const std::vector<Token>& tokens) const {
    FeatureVector fv{words_, std::vector<double>(words_.size(), 0.0)};
    if (tokens.empty()) return fv;
    for (const auto& t : tokens) {
      if (auto it = index_.find(t.text); it != index_.end()) fv.values[it->second] += 1.0;
    }
    for (double& v : fv.values) v /= static_cast<double>(tokens.size());
    return fv;
  }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

inline FeatureVector features_bow(const std::vector<Token>& tokens, const BowVocabulary& vocabulary) {
  return vocabulary.features(tokens);
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

struct LogRegOptions {
  double l2 = 1.0;
  std::size_t max_iter = 1000;
  double tol = 1e-6;
};

/// Design matrix in row-major order with labels in {0, 1} (1 = fake).
struct Dataset {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> x;
  std::vector<double> y;

  [[nodiscard]] std::span<const double> row(std::size_t i) const { return std::span<const double>(x).subspan(i * cols, cols); }
};

inline double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Mean negative log-likelihood plus (l2 / 2) * |w|^2. `params[0]` is the
/// unpenalized intercept.
inline double logistic_loss(std::span<const double> params, const Dataset& data, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    const auto r = data.row(i);
    double z = params[0];
    for (std::size_t j = 0; j < data.cols; ++j) z += params[j + 1] * r[j];
    loss += softplus(z) - data.y[i] * z;
  }
  loss /= static_cast<double>(data.rows);
  double penalty = 0.0;
  for (std::size_t j = 1; j < params.size(); ++j) penalty += params[j] * params[j];
  return loss + 0.5 * l2 * penalty;
}

inline std::vector<double> logistic_gradient(std::span<const double> params, const Dataset& data, double l2) {
  std::vector<double> grad(params.size(), 0.0);
  for (std::size_t i = 0; i < data.rows; ++i) {
    const auto r = data.row(i);
    double z = params[0];
    for (std::size_t j = 0; j < data.cols; ++j) z += params[j + 1] * r[j];
    const double residual = sigmoid(z) - data.y[i];
    grad[0] += residual;
    for (std::size_t j = 0; j < data.cols; ++j) grad[j + 1] += residual * r[j];
  }
  for (double& g : grad) g /= static_cast<double>(data.rows);
  for (std::size_t j = 1; j < params.size(); ++j) grad[j] += l2 * params[j];
  return grad;
}

struct TrainingTrace {
  std::size_t iterations = 0;
  double final_loss = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  /// Loss after every accepted step, starting with the initial loss.
  std::vector<double> losses;
};

/// Full-batch gradient descent with Armijo backtracking from zero.
inline std::vector<double> minimize_logistic(const Dataset& data, const LogRegOptions& options, TrainingTrace& trace) {
  std::vector<double> params(data.cols + 1, 0.0);
  double loss = logistic_loss(params, data, options.l2);
  trace = {};
  trace.losses.push_back(loss);
  double step = 1.0;
  std::vector<double> candidate(params.size());
  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    const auto grad = logistic_gradient(params, data, options.l2);
    double norm2 = 0.0;
    for (double g : grad) norm2 += g * g;
    trace.gradient_norm = std::sqrt(norm2);
    if (trace.gradient_norm < options.tol) {
      trace.converged = true;
      break;
    }
    step = std::min(step * 2.0, 1e6);
    double next_loss = loss;
    bool accepted = false;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t j = 0; j < params.size(); ++j) candidate[j] = params[j] - step * grad[j];
      next_loss = logistic_loss(candidate, data, options.l2);
      if (next_loss <= loss - 0.5 * step * norm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    params.swap(candidate);
    loss = next_loss;
    trace.losses.push_back(loss);
    trace.iterations = iter + 1;
  }
  trace.final_loss = loss;
  return params;
}

/// Logistic regression on standardized features; P(fake) is the positive
/// class.
class TrainedClassifier {
 public:
  TrainedClassifier() = default;
  TrainedClassifier(std::vector<std::string> schema, std::vector<double> mean, std::vector<double> scale,
                    std::vector<double> weights, double l2, std::size_t iterations, double final_loss)
      : schema_(std::move(schema)),
        mean_(std::move(mean)),
        scale_(std::move(scale)),
        weights_(std::move(weights)),
        l2_(l2),
        iterations_(iterations),
        final_loss_(final_loss) {
    if (weights_.size() != schema_.size() + 1 || mean_.size() != schema_.size() || scale_.size() != schema_.size()) {
      throw ParameterError("classifier parameters do not match its schema");
    }
  }

  [[nodiscard]] const std::vector<std::string>& schema() const { return schema_; }
  /// Intercept first, then one weight per standardized feature.
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<double>& mean() const { return mean_; }
  [[nodiscard]] const std::vector<double>& scale() const { return scale_; }
  [[nodiscard]] double l2() const { return l2_; }
  [[nodiscard]] std::size_t iterations() const { return iterations_; }
  [[nodiscard]] double final_loss() const { return final_loss_; }

  [[nodiscard]] double decision(std::span<const double> values) const {
    if (values.size() != schema_.size()) throw ParameterError("feature vector does not match classifier schema");
    double z = weights_[0];
    for (std::size_t j = 0; j < values.size(); ++j) z += weights_[j + 1] * (values[j] - mean_[j]) / scale_[j];
    return z;
  }

  /// P(fake | features).
  [[nodiscard]] double predict(const FeatureVector& fv) const {
    if (fv.schema != schema_) throw ParameterError("feature vector does not match classifier schema");
    return sigmoid(decision(fv.values));
  }

  /// Weight per one-unit change of the raw (unstandardized) feature.
  [[nodiscard]] std::vector<double> raw_weights() const {
    std::vector<double> out(schema_.size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = weights_[j + 1] / scale_[j];
    return out;
  }

 private:
  std::vector<std::string> schema_;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::vector<double> weights_;
  double l2_ = 0.0;
  std::size_t iterations_ = 0;
  double final_loss_ = 0.0;
};

struct LabeledFeatures {
  FeatureVector features;
  Label label = Label::real;
};

/// Standardizes with training statistics, then minimizes the regularized
/// loss. Zero-variance features get scale 1.
inline TrainedClassifier train_logreg(const std::vector<LabeledFeatures>& examples, const LogRegOptions& options = {},
                                      TrainingTrace* trace_out = nullptr) {
  if (examples.empty()) throw DataError("no training examples");
  if (options.l2 < 0.0) throw ParameterError("l2 must be >= 0");
  const auto& schema = examples.front().features.schema;
  bool has_real = false;
  bool has_fake = false;
  for (const auto& e : examples) {
    if (e.features.schema != schema || e.features.values.size() != schema.size()) {
      throw DataError("training examples use different feature schemas");
    }
    for (double v : e.features.values) {
      if (!std::isfinite(v)) throw DataError("non-finite feature value");
    }
    (e.label == Label::fake ? has_fake : has_real) = true;
  }
  if (!has_real || !has_fake) throw DataError("training data must contain both real and fake examples");

  const std::size_t n = examples.size();
  const std::size_t d = schema.size();
  std::vector<double> mean(d, 0.0);
  std::vector<double> scale(d, 0.0);
  for (const auto& e : examples) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += e.features.values[j];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (const auto& e : examples) {
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = e.features.values[j] - mean[j];
      scale[j] += diff * diff;
    }
  }
  for (double& s : scale) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 1e-12)) s = 1.0;
  }

  Dataset data{n, d, std::vector<double>(n * d), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) data.x[i * d + j] = (examples[i].features.values[j] - mean[j]) / scale[j];
    data.y[i] = examples[i].label == Label::fake ? 1.0 : 0.0;
  }
  TrainingTrace trace;
  auto params = minimize_logistic(data, options, trace);
  if (trace_out != nullptr) *trace_out = trace;
  return TrainedClassifier(schema, std::move(mean), std::move(scale), std::move(params), options.l2, trace.iterations,
                           trace.final_loss);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Computed from mid-ranks of the pooled scores.
inline double auc(std::span<const double> positives, std::span<const double> negatives) {
  if (positives.empty() || negatives.empty()) throw ParameterError("AUC needs at least one score on each side");
  struct Item {
    double score;
    bool positive;
  };
  std::vector<Item> items;
  items.reserve(positives.size() + negatives.size());
  for (double s : positives) items.push_back({s, true});
  for (double s : negatives) items.push_back({s, false});
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < items.size();) {
    std::size_t j = i;
    while (j < items.size() && items[j].score == items[i].score) ++j;
    // ranks i+1 .. j share the mid-rank (i + 1 + j) / 2
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (items[k].positive) rank_sum += mid;
    }
    i = j;
  }
  const auto np = static_cast<double>(positives.size());
  const auto nn = static_cast<double>(negatives.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

struct OddsRatio {
  std::string feature;
  /// Multiplicative change in the odds of `fake` per unit of the raw feature.
  double fake = 1.0;
  /// Same for the odds of `real` (1 / fake).
  double real = 1.0;
};

inline std::vector<OddsRatio> odds_ratios(const TrainedClassifier& classifier) {
  std::vector<OddsRatio> out;
  const auto raw = classifier.raw_weights();
  for (std::size_t j = 0; j < raw.size(); ++j) {
    out.push_back({classifier.schema()[j], std::exp(raw[j]), std::exp(-raw[j])});
  }
  return out;
}

inline nlohmann::json to_json(const TrainedClassifier& c) {
  return {
      {"schema", c.schema()},
      {"mean", c.mean()},
      {"scale", c.scale()},
      {"weights", c.weights()},
      {"l2", c.l2()},
      {"training", {{"iterations", c.iterations()}, {"final_loss", c.final_loss()}}},
  };
}

inline TrainedClassifier classifier_from_json(const nlohmann::json& j) {
  try {
    return TrainedClassifier(j.at("schema").get<std::vector<std::string>>(), j.at("mean").get<std::vector<double>>(),
                             j.at("scale").get<std::vector<double>>(), j.at("weights").get<std::vector<double>>(),
                             j.at("l2").get<double>(), j.at("training").at("iterations").get<std::size_t>(),
                             j.at("training").at("final_loss").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad classifier JSON: ") + e.what());
  }
}

}  // namespace fakescope
