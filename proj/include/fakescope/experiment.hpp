#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fakescope/annotation.hpp"
#include "fakescope/classifier.hpp"
#include "fakescope/corpus.hpp"
#include "fakescope/detection_model.hpp"
#include "fakescope/parallel.hpp"
#include "fakescope/scoring.hpp"
#include "fakescope/stats.hpp"

namespace fakescope {

enum class FeatureSet { bow, avg_prob, avg_log_prob, topk_buckets };

inline std::string_view to_string(FeatureSet fs) {
  switch (fs) {
    case FeatureSet::bow: return "bow";
    case FeatureSet::avg_prob: return "avg-prob";
    case FeatureSet::avg_log_prob: return "avg-log-prob";
    case FeatureSet::topk_buckets: return "topk-buckets";
  }
  return "?";
}

inline std::string_view display_name(FeatureSet fs) {
  switch (fs) {
    case FeatureSet::bow: return "Bag of Words";
    case FeatureSet::avg_prob: return "Average Probability";
    case FeatureSet::avg_log_prob: return "Average Log-Probability";
    case FeatureSet::topk_buckets: return "Top-K Buckets";
  }
  return "?";
}

inline FeatureSet parse_feature_set(std::string_view text) {
  for (auto fs : {FeatureSet::bow, FeatureSet::avg_prob, FeatureSet::avg_log_prob, FeatureSet::topk_buckets}) {
    if (text == to_string(fs)) return fs;
  }
  throw ParameterError("unknown feature set '" + std::string(text) + "'");
}

/// A scored document with its corpus label and source.
struct LabeledDocument {
  std::string id;
  ScoredDocument scored;
  Label label = Label::real;
  std::string source;
};

struct ExperimentOptions {
  LogRegOptions logreg;
  BucketScheme scheme;
  ScoringMode mode;
  std::size_t tail_threshold = 100;
  /// Minimum training-document frequency for a bag-of-words term.
  std::size_t bow_min_docs = 1;
  unsigned threads = 0;
};

inline std::vector<LabeledDocument> score_corpus(const Corpus& corpus, const DetectionModel& model,
                                                 const ScoringMode& mode = {}, unsigned threads = 0) {
  corpus.validate();
  std::vector<LabeledDocument> out(corpus.documents.size());
  parallel_for(
      corpus.documents.size(),
      [&](std::size_t i) {
        const auto& d = corpus.documents[i];
        try {
          out[i] = {d.id, score_document(model, d.text, mode), d.label, d.source};
        } catch (const DataError& e) {
          throw DataError("document '" + d.id + "': " + e.what());
        }
      },
      threads);
  return out;
}

/// A classifier together with whatever was fitted to build its features.
struct FeatureModel {
  FeatureSet feature_set = FeatureSet::topk_buckets;
  BucketScheme scheme;
  std::optional<BowVocabulary> bow;
  TrainedClassifier classifier;

  [[nodiscard]] FeatureVector features(const ScoredDocument& doc) const {
    switch (feature_set) {
      case FeatureSet::bow: return features_bow(doc.tokens, *bow);
      case FeatureSet::avg_prob: return features_avg_prob(doc);
      case FeatureSet::avg_log_prob: return features_avg_log_prob(doc);
      case FeatureSet::topk_buckets: return features_topk_buckets(doc, scheme);
    }
    throw ParameterError("unknown feature set");
  }

  /// P(fake).
  [[nodiscard]] double predict(const ScoredDocument& doc) const { return classifier.predict(features(doc)); }
};

/// Fits the feature extractor and classifier on `train` only.
inline FeatureModel fit_feature_model(std::span<const LabeledDocument* const> train, FeatureSet feature_set,
                                      const ExperimentOptions& options = {}) {
  FeatureModel model;
  model.feature_set = feature_set;
  model.scheme = options.scheme;
  if (feature_set == FeatureSet::bow) {
    std::vector<const ScoredDocument*> docs;
    for (const auto* d : train) docs.push_back(&d->scored);
    model.bow = BowVocabulary::from_documents(docs, options.bow_min_docs);
  }
  std::vector<LabeledFeatures> examples;
  examples.reserve(train.size());
  for (const auto* d : train) examples.push_back({model.features(d->scored), d->label});
  model.classifier = train_logreg(examples, options.logreg);
  return model;
}

struct FoldResult {
  std::string real_source;
  std::string fake_source;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double auc = 0.0;
};

struct CrossValidation {
  FeatureSet feature_set = FeatureSet::topk_buckets;
  std::vector<FoldResult> folds;
  double mean = 0.0;
  /// Population standard deviation across folds.
  double std = 0.0;
};

inline void summarize(CrossValidation& cv) {
  const auto n = static_cast<double>(cv.folds.size());
  double sum = 0.0;
  for (const auto& f : cv.folds) sum += f.auc;
  cv.mean = sum / n;
  double var = 0.0;
  for (const auto& f : cv.folds) var += (f.auc - cv.mean) * (f.auc - cv.mean);
  cv.std = std::sqrt(var / n);
}

/// Source-level cross-validation: every (real source, fake source) pair is
/// held out once while the classifier trains on all remaining sources. AUC
/// treats fake as the positive class. Folds are ordered by real source,
/// then fake source.
inline CrossValidation cross_validate(const std::vector<LabeledDocument>& docs, FeatureSet feature_set,
                                      const ExperimentOptions& options = {}) {
  std::map<std::string, std::vector<const LabeledDocument*>> by_source;
  std::map<std::string, Label> source_label;
  for (const auto& d : docs) {
    if (auto [it, inserted] = source_label.emplace(d.source, d.label); !inserted && it->second != d.label) {
      throw DataError("source '" + d.source + "' mixes real and fake documents");
    }
    by_source[d.source].push_back(&d);
  }
  std::vector<std::string> real_sources;
  std::vector<std::string> fake_sources;
  for (auto& [source, members] : by_source) {
    if (members.size() < 2) throw DataError("source '" + source + "' has fewer than 2 documents");
    // Document order inside a source must not influence training.
    std::sort(members.begin(), members.end(), [](auto* a, auto* b) { return a->id < b->id; });
    (source_label[source] == Label::real ? real_sources : fake_sources).push_back(source);
  }
  if (real_sources.size() < 2 || fake_sources.size() < 2) {
    throw DataError("cross-validation needs at least 2 real and 2 fake sources");
  }

  CrossValidation cv;
  cv.feature_set = feature_set;
  for (const auto& r : real_sources) {
    for (const auto& f : fake_sources) cv.folds.push_back({r, f});
  }
  parallel_for(
      cv.folds.size(),
      [&](std::size_t k) {
        auto& fold = cv.folds[k];
        std::vector<const LabeledDocument*> train;
        for (const auto& [source, members] : by_source) {
          if (source == fold.real_source || source == fold.fake_source) continue;
          train.insert(train.end(), members.begin(), members.end());
        }
        const auto model = fit_feature_model(train, feature_set, options);
        std::vector<double> fake_scores;
        std::vector<double> real_scores;
        for (const auto* d : by_source.at(fold.fake_source)) fake_scores.push_back(model.predict(d->scored));
        for (const auto* d : by_source.at(fold.real_source)) real_scores.push_back(model.predict(d->scored));
        fold.n_train = train.size();
        fold.n_test = fake_scores.size() + real_scores.size();
        fold.auc = auc(fake_scores, real_scores);
      },
      options.threads);
  summarize(cv);
  return cv;
}

inline CrossValidation cross_validate(const Corpus& corpus, FeatureSet feature_set, const DetectionModel& model,
                                      const ExperimentOptions& options = {}) {
  return cross_validate(score_corpus(corpus, model, options.mode, options.threads), feature_set, options);
}

struct ExperimentReport {
  std::string model_name;
  std::size_t n_documents = 0;
  std::vector<std::string> real_sources;
  std::vector<std::string> fake_sources;
  /// Bag of Words, Average Probability, Top-K Buckets.
  std::vector<CrossValidation> table;
  /// Mean log-probability, reported next to the table.
  std::vector<CrossValidation> supplementary;
  /// Bucket-feature classifier trained on every source.
  std::vector<OddsRatio> odds_ratios;
  std::vector<RankDistribution> rank_distributions;
  TailRatio tail;
  BucketScheme scheme;
};

inline ExperimentReport run_table1(const std::vector<LabeledDocument>& docs, const ExperimentOptions& options = {}) {
  if (docs.empty()) throw DataError("empty corpus");
  ExperimentReport report;
  report.model_name = docs.front().scored.model_name;
  report.n_documents = docs.size();
  report.scheme = options.scheme;
  for (auto fs : {FeatureSet::bow, FeatureSet::avg_prob, FeatureSet::topk_buckets}) {
    report.table.push_back(cross_validate(docs, fs, options));
  }
  report.supplementary.push_back(cross_validate(docs, FeatureSet::avg_log_prob, options));

  std::vector<const LabeledDocument*> all;
  std::map<std::string, std::vector<const ScoredDocument*>> by_source;
  std::vector<const ScoredDocument*> real_pool;
  std::vector<const ScoredDocument*> fake_pool;
  for (const auto& d : docs) {
    all.push_back(&d);
    by_source[d.source].push_back(&d.scored);
    (d.label == Label::real ? real_pool : fake_pool).push_back(&d.scored);
  }
  std::sort(all.begin(), all.end(), [](auto* a, auto* b) { return a->id < b->id; });
  report.odds_ratios = odds_ratios(fit_feature_model(all, FeatureSet::topk_buckets, options).classifier);
  for (const auto& [source, members] : by_source) {
    report.rank_distributions.push_back(rank_distribution(members, options.scheme, source));
  }
  for (const auto& d : docs) {
    auto& list = d.label == Label::real ? report.real_sources : report.fake_sources;
    if (std::find(list.begin(), list.end(), d.source) == list.end()) list.push_back(d.source);
  }
  std::sort(report.real_sources.begin(), report.real_sources.end());
  std::sort(report.fake_sources.begin(), report.fake_sources.end());
  report.tail = tail_ratio(real_pool, fake_pool, options.tail_threshold);
  return report;
}

/// Scores the corpus under `model`, then runs the full report.
inline ExperimentReport run_table1(const Corpus& corpus, const DetectionModel& model,
                                   const ExperimentOptions& options = {}) {
  return run_table1(score_corpus(corpus, model, options.mode, options.threads), options);
}

inline nlohmann::json to_json(const CrossValidation& cv) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : cv.folds) {
    folds.push_back({{"real_source", f.real_source},
                     {"fake_source", f.fake_source},
                     {"n_train", f.n_train},
                     {"n_test", f.n_test},
                     {"auc", f.auc}});
  }
  return {{"feature_set", to_string(cv.feature_set)},
          {"name", display_name(cv.feature_set)},
          {"mean_auc", cv.mean},
          {"std_auc", cv.std},
          {"folds", folds}};
}

inline nlohmann::json to_json(const ExperimentReport& report) {
  nlohmann::json table = nlohmann::json::array();
  for (const auto& cv : report.table) table.push_back(to_json(cv));
  nlohmann::json supplementary = nlohmann::json::array();
  for (const auto& cv : report.supplementary) supplementary.push_back(to_json(cv));
  nlohmann::json odds = nlohmann::json::array();
  for (const auto& o : report.odds_ratios) odds.push_back({{"feature", o.feature}, {"fake", o.fake}, {"real", o.real}});
  nlohmann::json ranks = nlohmann::json::array();
  for (const auto& r : report.rank_distributions) ranks.push_back(to_json(r));
  nlohmann::json tail = {{"threshold", report.tail.threshold},
                         {"real_fraction", report.tail.real_fraction},
                         {"fake_fraction", report.tail.fake_fraction}};
  if (std::isfinite(report.tail.ratio)) {
    tail["ratio"] = report.tail.ratio;
  } else {
    tail["ratio"] = "inf";
    tail["warning"] = report.tail.warning;
  }
  return {{"model", report.model_name},
          {"n_documents", report.n_documents},
          {"real_sources", report.real_sources},
          {"fake_sources", report.fake_sources},
          {"std_definition", "population standard deviation across folds"},
          {"table", table},
          {"supplementary", supplementary},
          {"odds_ratios", odds},
          {"rank_distributions", ranks},
          {"tail_ratio", tail},
          {"scheme", {{"thresholds", report.scheme.thresholds}, {"colors", report.scheme.colors}}}};
}

/// Plain-text table: feature, mean AUC, std.
inline void write_table(std::ostream& out, const ExperimentReport& report) {
  char line[128];
  std::snprintf(line, sizeof line, "%-26s %9s %7s\n", "feature", "mean AUC", "std");
  out << line;
  auto row = [&](const CrossValidation& cv) {
    std::snprintf(line, sizeof line, "%-26s %9.3f %7.3f\n", std::string(display_name(cv.feature_set)).c_str(), cv.mean,
                  cv.std);
    out << line;
  };
  for (const auto& cv : report.table) row(cv);
  for (const auto& cv : report.supplementary) {
    out << "(alongside)\n";
    row(cv);
  }
  out << "folds: " << (report.table.empty() ? 0 : report.table.front().folds.size())
      << ", std is the population std across folds\n";
  std::snprintf(line, sizeof line, "tail ratio (rank > %zu, real/fake): %.3f\n", report.tail.threshold,
                report.tail.ratio);
  out << line;
}

}  // namespace fakescope
