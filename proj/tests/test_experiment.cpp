#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fakescope/corpus.hpp"
#include "fakescope/experiment.hpp"
#include "fakescope/ngram_model.hpp"

using namespace fakescope;
namespace fsys = std::filesystem;

namespace {

fsys::path temp_dir(const std::string& name) {
  auto dir = fsys::temp_directory_path() / ("fakescope-test-" + name);
  fsys::remove_all(dir);
  fsys::create_directories(dir);
  return dir;
}

void write(const fsys::path& path, const std::string& text) {
  fsys::create_directories(path.parent_path());
  std::ofstream(path) << text;
}

NGramModel small_model() {
  std::mt19937_64 rng(12);
  std::vector<std::vector<std::string>> corpus;
  const std::vector<std::string> words{"the", "a", "cat", "dog", "sat", "ran", "on", "mat", "log", ".", "and", "big"};
  for (int s = 0; s < 200; ++s) {
    std::vector<std::string> seq;
    for (int i = 0; i < 12; ++i) seq.push_back(words[rng() % words.size()]);
    seq.push_back(".");
    corpus.push_back(seq);
  }
  NGramOptions o;
  o.order = 3;
  o.min_count = 1;
  return train_ngram(corpus, o);
}

/// Synthetic labeled documents whose bucket fractions separate the classes.
std::vector<LabeledDocument> synthetic_docs(std::size_t sources_per_label, std::size_t docs_per_source,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<LabeledDocument> docs;
  for (Label label : {Label::real, Label::fake}) {
    for (std::size_t s = 0; s < sources_per_label; ++s) {
      const std::string source = std::string(to_string(label)) + std::to_string(s);
      for (std::size_t d = 0; d < docs_per_source; ++d) {
        ScoredDocument doc;
        doc.model_name = "synthetic";
        doc.vocab_size = 5000;
        for (int t = 0; t < 40; ++t) {
          TokenScore score;
          const bool tail = (rng() % 100) < (label == Label::real ? 35U : 10U);
          score.rank = tail ? 200 + rng() % 3000 : 1 + rng() % 10;
          score.prob = tail ? 0.001 : 0.2;
          score.entropy = 2.0;
          doc.scores.push_back(score);
          doc.tokens.push_back({"w" + std::to_string(rng() % 30), 0, 1});
        }
        docs.push_back({source + "-" + std::to_string(d), std::move(doc), label, source});
      }
    }
  }
  return docs;
}

}  // namespace

TEST(Corpus, ReadsJsonl) {
  std::istringstream in(
      R"({"id":"a","text":"hello there","label":"real","source":"nyt"})"
      "\n\n"
      R"({"id":"b","text":"general kenobi","label":"fake","source":"gen"})"
      "\n");
  const auto corpus = read_corpus_jsonl(in, "mem");
  ASSERT_EQ(corpus.documents.size(), 2u);
  EXPECT_EQ(corpus.documents[1].label, Label::fake);
  EXPECT_EQ(corpus.sources(Label::real), std::vector<std::string>{"nyt"});
}

TEST(Corpus, JsonlErrorsNameTheLine) {
  auto error_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      (void)read_corpus_jsonl(in, "c.jsonl");
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_EQ(error_of(R"({"id":"a","text":"x","label":"real","source":"s"})"
                     "\n"
                     R"({"id":"b","text":"x","label":"real"})"),
            "c.jsonl:2: missing field \"source\"");
  EXPECT_NE(error_of("{oops").find("c.jsonl:1: invalid JSON"), std::string::npos);
  EXPECT_NE(error_of(R"({"id":"a","text":"x","label":"maybe","source":"s"})").find("label"), std::string::npos);
  EXPECT_NE(error_of(R"({"id":1,"text":"x","label":"real","source":"s"})").find("must be a string"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"id":"a","text":"x","label":"real","source":"s"})"
                     "\n"
                     R"({"id":"a","text":"y","label":"real","source":"s"})")
                .find("duplicate document id 'a'"),
            std::string::npos);
  EXPECT_NE(error_of(R"({"id":"a","text":"  ","label":"real","source":"s"})").find("empty"), std::string::npos);
}

TEST(Corpus, DirectoryLayout) {
  const auto root = temp_dir("dir");
  write(root / "real" / "nyt" / "one.txt", "first text");
  write(root / "real" / "nyt" / "two.txt", "second text");
  write(root / "fake" / "gpt" / "x.txt", "third text");
  write(root / "real" / "nyt" / "notes.md", "ignored");
  const auto corpus = load_corpus(root);
  ASSERT_EQ(corpus.documents.size(), 3u);
  EXPECT_EQ(corpus.documents[0].id, "fake/gpt/x");
  EXPECT_EQ(corpus.documents[1].source, "nyt");
  EXPECT_EQ(corpus.documents[1].label, Label::real);

  write(root / "other" / "s" / "y.txt", "bad label");
  EXPECT_THROW(load_corpus(root), DataError);
  EXPECT_THROW(load_corpus(root / "missing"), DataError);
  fsys::remove_all(root);
}

TEST(Corpus, ChunkingKeepsWholeChunks) {
  Corpus c;
  c.documents.push_back({"d", "a b c d e f g", Label::real, "s"});
  c.documents.push_back({"e", "h i j k l", Label::real, "s"});
  const auto chunks = chunk_corpus(c, 3);
  ASSERT_EQ(chunks.documents.size(), 3u);
  EXPECT_EQ(chunks.documents[0].text, "a b c");
  EXPECT_EQ(chunks.documents[1].id, "d#1");
  EXPECT_EQ(chunks.documents[2].text, "h i j");
  EXPECT_EQ(chunk_corpus(c, 3, 2).documents.size(), 2u);
  EXPECT_THROW(chunk_corpus(c, 0), ParameterError);
}

TEST(Corpus, TrainingSequencesSplitOnBlankLines) {
  const auto root = temp_dir("train");
  write(root / "a.txt", "One two.\nthree\n\nFour five.\n");
  write(root / "b.txt", "six");
  const auto seqs = read_training_sequences(root);
  ASSERT_EQ(seqs.size(), 3u);
  EXPECT_EQ(seqs[0], (std::vector<std::string>{"one", "two", ".", "three"}));
  EXPECT_EQ(seqs[2], std::vector<std::string>{"six"});
  write(root / "empty" / "c.txt", "");
  EXPECT_THROW(read_training_sequences(root / "empty"), DataError);
  fsys::remove_all(root);
}

TEST(FakeSources, CountsIdsAndDeterminism) {
  const auto m = small_model();
  FakeSourceOptions o;
  o.n_docs = 5;
  o.doc_len = 20;
  const auto a = build_fake_sources(m, {}, o);
  const auto b = build_fake_sources(m, {}, o);
  ASSERT_EQ(a.documents.size(), 10u);
  EXPECT_EQ(a.sources(Label::fake), (std::vector<std::string>{"gen-k40", "gen-t0.7"}));
  EXPECT_EQ(a.documents[0].id, "gen-t0.7-000");
  for (std::size_t i = 0; i < a.documents.size(); ++i) EXPECT_EQ(a.documents[i].text, b.documents[i].text);
  for (const auto& d : a.documents) EXPECT_EQ(tokenize(d.text).size(), 20u);
  o.random_seed = 2;
  EXPECT_NE(build_fake_sources(m, {}, o).documents[0].text, a.documents[0].text);
}

TEST(FakeSources, SingleTokenDocumentsScore) {
  const auto m = small_model();
  FakeSourceOptions o;
  o.n_docs = 3;
  o.doc_len = 1;
  for (const auto& d : build_fake_sources(m, {}, o).documents) EXPECT_EQ(score_document(m, d.text).size(), 1u);
}

TEST(SamplerConfig, SourceIds) {
  EXPECT_EQ((SamplerConfig{0.7, 0}.source_id()), "gen-t0.7");
  EXPECT_EQ((SamplerConfig{1.0, 40}.source_id()), "gen-k40");
  EXPECT_EQ((SamplerConfig{0.5, 5}.source_id()), "gen-t0.5-k5");
  EXPECT_EQ((SamplerConfig{}.source_id()), "gen");
}

TEST(CrossValidation, FoldCountsAndOrder) {
  const auto docs = synthetic_docs(3, 6, 1);
  const auto cv = cross_validate(docs, FeatureSet::topk_buckets);
  ASSERT_EQ(cv.folds.size(), 9u);
  EXPECT_EQ(cv.folds[0].real_source, "real0");
  EXPECT_EQ(cv.folds[0].fake_source, "fake0");
  EXPECT_EQ(cv.folds[1].fake_source, "fake1");
  EXPECT_EQ(cv.folds[0].n_test, 12u);
  EXPECT_EQ(cv.folds[0].n_train, 24u);
  EXPECT_GT(cv.mean, 0.9);
  EXPECT_EQ(cross_validate(synthetic_docs(2, 4, 2), FeatureSet::avg_prob).folds.size(), 4u);
}

TEST(CrossValidation, MeanAndPopulationStd) {
  const auto cv = cross_validate(synthetic_docs(2, 5, 3), FeatureSet::bow);
  double mean = 0, var = 0;
  for (const auto& f : cv.folds) mean += f.auc;
  mean /= static_cast<double>(cv.folds.size());
  for (const auto& f : cv.folds) var += (f.auc - mean) * (f.auc - mean);
  EXPECT_NEAR(cv.mean, mean, 1e-15);
  EXPECT_NEAR(cv.std, std::sqrt(var / static_cast<double>(cv.folds.size())), 1e-15);
}

TEST(CrossValidation, IndependentOfDocumentOrder) {
  auto docs = synthetic_docs(2, 5, 4);
  const auto a = cross_validate(docs, FeatureSet::bow);
  std::mt19937_64 rng(1);
  std::shuffle(docs.begin(), docs.end(), rng);
  const auto b = cross_validate(docs, FeatureSet::bow);
  for (std::size_t k = 0; k < a.folds.size(); ++k) EXPECT_EQ(a.folds[k].auc, b.folds[k].auc);
}

TEST(CrossValidation, BowVocabularyComesFromTrainingSourcesOnly) {
  auto docs = synthetic_docs(2, 3, 5);
  // A word that only the held-out real0 source uses.
  for (auto& d : docs) {
    if (d.source == "real0") d.scored.tokens.push_back({"leak", 0, 1});
  }
  std::vector<const LabeledDocument*> train;
  for (const auto& d : docs) {
    if (d.source != "real0" && d.source != "fake0") train.push_back(&d);
  }
  const auto model = fit_feature_model(train, FeatureSet::bow);
  ASSERT_TRUE(model.bow.has_value());
  EXPECT_FALSE(model.bow->contains("leak"));
  std::vector<const LabeledDocument*> all;
  for (const auto& d : docs) all.push_back(&d);
  EXPECT_TRUE(fit_feature_model(all, FeatureSet::bow).bow->contains("leak"));
}

TEST(CrossValidation, Errors) {
  auto docs = synthetic_docs(2, 3, 6);
  EXPECT_THROW(cross_validate(synthetic_docs(1, 3, 6), FeatureSet::avg_prob), DataError);
  docs.push_back(docs.front());
  docs.back().id = "single";
  docs.back().source = "lonely";
  EXPECT_THROW(cross_validate(docs, FeatureSet::avg_prob), DataError);
}

TEST(CrossValidation, IdenticalCorporaGiveChanceLevel) {
  auto docs = synthetic_docs(2, 20, 7);
  // Fake sources become copies of real ones.
  std::vector<LabeledDocument> copies;
  for (const auto& d : docs) {
    if (d.label != Label::real) continue;
    auto c = d;
    c.label = Label::fake;
    c.source = "copy-" + d.source;
    c.id = "copy-" + d.id;
    copies.push_back(std::move(c));
  }
  std::erase_if(docs, [](const auto& d) { return d.label == Label::fake; });
  docs.insert(docs.end(), copies.begin(), copies.end());
  const auto cv = cross_validate(docs, FeatureSet::topk_buckets);
  EXPECT_NEAR(cv.mean, 0.5, 0.2);
}

TEST(CrossValidation, GreedyTextIsSeparable) {
  const auto m = small_model();
  FakeSourceOptions o;
  o.n_docs = 6;
  o.doc_len = 30;
  o.configs = {{1.0, 1}, {0.7, 1}};
  Corpus corpus = build_fake_sources(m, {}, o);
  // Greedy decoding picks the top non-reserved token, so only reserved
  // tokens can outrank it under the generating model.
  for (const auto& d : corpus.documents) {
    for (const auto& s : score_document(m, d.text).scores) {
      ASSERT_LE(s.rank, 3u);
      for (std::size_t k = 0; k + 1 < s.rank; ++k) EXPECT_TRUE(s.top5[k].token == "</s>" || s.top5[k].token == "<unk>");
    }
  }
  std::mt19937_64 rng(3);
  const std::vector<std::string> words{"the", "a", "cat", "dog", "sat", "ran", "on", "mat", "log", ".", "and", "big"};
  for (int s = 0; s < 2; ++s) {
    for (int d = 0; d < 6; ++d) {
      std::string text;
      for (int i = 0; i < 30; ++i) text += words[rng() % words.size()] + " ";
      corpus.documents.push_back({"r" + std::to_string(s) + "-" + std::to_string(d), text, Label::real,
                                  "real" + std::to_string(s)});
    }
  }
  const auto cv = cross_validate(corpus, FeatureSet::topk_buckets, m);
  EXPECT_GE(cv.mean, 0.9);
}

TEST(Report, ShapeAndJson) {
  const auto docs = synthetic_docs(3, 5, 8);
  const auto report = run_table1(docs);
  ASSERT_EQ(report.table.size(), 3u);
  EXPECT_EQ(report.table[0].feature_set, FeatureSet::bow);
  EXPECT_EQ(report.table[2].feature_set, FeatureSet::topk_buckets);
  EXPECT_EQ(report.odds_ratios.size(), 4u);
  EXPECT_EQ(report.rank_distributions.size(), 6u);
  EXPECT_GT(report.tail.ratio, 1.5);
  EXPECT_GT(report.odds_ratios[3].real, 1.0);
  EXPECT_LT(report.odds_ratios[0].real, 1.0);
  const auto j = to_json(report);
  EXPECT_EQ(j["table"].size(), 3u);
  EXPECT_EQ(j["table"][0]["folds"].size(), 9u);
  EXPECT_EQ(to_json(run_table1(docs)).dump(), j.dump());
  std::ostringstream table;
  write_table(table, report);
  EXPECT_NE(table.str().find("Top-K Buckets"), std::string::npos);
}

TEST(Report, FeatureSetNames) {
  EXPECT_EQ(parse_feature_set("topk-buckets"), FeatureSet::topk_buckets);
  EXPECT_EQ(parse_feature_set("bow"), FeatureSet::bow);
  EXPECT_THROW(parse_feature_set("nope"), ParameterError);
}
