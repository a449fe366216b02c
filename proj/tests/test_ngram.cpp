#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fakescope/ngram_model.hpp"
#include "fakescope/sampler.hpp"
#include "oracles.hpp"

using namespace fakescope;

namespace {

std::vector<std::vector<std::string>> tiny_corpus() { return {{"the", "cat", "sat", "."}, {"the", "cat", "ran", "."}}; }

NGramOptions options(int order, std::uint64_t min_count = 1) {
  NGramOptions o;
  o.order = order;
  o.min_count = min_count;
  return o;
}

std::vector<TokenId> ids(const NGramModel& m, const std::vector<std::string>& words) {
  std::vector<TokenId> out;
  for (const auto& w : words) out.push_back(m.vocabulary().lookup(w));
  return out;
}

/// Random corpus over a small alphabet, so some words fall below min_count.
std::vector<std::vector<std::string>> random_corpus(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> len(1, 7);
  std::uniform_int_distribution<int> n(2, 6);
  std::geometric_distribution<int> word(0.35);
  std::vector<std::vector<std::string>> corpus(static_cast<std::size_t>(n(rng)));
  for (auto& s : corpus) {
    const int l = len(rng);
    for (int i = 0; i < l; ++i) s.push_back("w" + std::to_string(std::min(word(rng), 9)));
  }
  return corpus;
}

}  // namespace

TEST(NGram, FrozenBigramValues) {
  const auto m = train_ngram(tiny_corpus(), options(2));
  EXPECT_EQ(m.vocabulary().size(), 8u);
  EXPECT_NEAR(m.probability(ids(m, {"the"}), m.vocabulary().lookup("cat")), 599.0 / 896.0, 1e-12);
  EXPECT_NEAR(m.probability(ids(m, {"."}), m.vocabulary().lookup("the")), 39.0 / 896.0, 1e-12);
  EXPECT_NEAR(m.probability({}, m.vocabulary().lookup("the")), 599.0 / 896.0, 1e-12);
  EXPECT_NEAR(m.probability(ids(m, {"cat"}), m.vocabulary().lookup(".")), 174.0 / 896.0, 1e-12);
}

TEST(NGram, UnseenContextBacksOffToLowerOrder) {
  const auto m = train_ngram(tiny_corpus(), options(3));
  const auto cat = m.vocabulary().lookup("cat");
  // Neither "sat ran" nor "the ran" occurs, so both reduce to the "ran" level.
  EXPECT_DOUBLE_EQ(m.probability(ids(m, {"sat", "ran"}), cat), m.probability(ids(m, {"the", "ran"}), cat));
  EXPECT_NE(m.probability(ids(m, {"sat", "the"}), cat), m.probability(ids(m, {"sat", "ran"}), cat));
}

TEST(NGram, MatchesBruteForceOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const auto corpus = random_corpus(rng);
    const int order = 1 + trial % 3;
    const std::uint64_t min_count = 1 + static_cast<std::uint64_t>(trial % 2);
    const double discount = 0.3 + 0.1 * (trial % 6);
    NGramOptions o = options(order, min_count);
    o.discount = discount;
    const auto m = train_ngram(corpus, o);
    const oracle::KneserNey ref(corpus, order, discount, min_count);
    ASSERT_EQ(m.vocabulary().size(), ref.vocab().size());
    // Every history reachable from the vocabulary, including sentence starts.
    std::vector<std::vector<std::string>> histories{{}};
    for (int len = 1; len < order; ++len) {
      std::vector<std::vector<std::string>> next;
      for (const auto& h : histories) {
        if (static_cast<int>(h.size()) != len - 1) continue;
        for (const auto& w : ref.vocab()) {
          if (w == "</s>") continue;
          auto g = h;
          g.push_back(w);
          next.push_back(g);
        }
      }
      histories.insert(histories.end(), next.begin(), next.end());
    }
    for (const auto& h : histories) {
      // The model takes a document prefix; a history starting with <s> is
      // the start of a document, any other is a truncated prefix.
      std::vector<TokenId> prefix;
      std::vector<std::string> oracle_history;
      if (!h.empty() && h.front() == "<s>") {
        if (std::count(h.begin(), h.end(), "<s>") > 1) continue;
        for (std::size_t i = 1; i < h.size(); ++i) prefix.push_back(m.vocabulary().lookup(h[i]));
        oracle_history = h;
      } else if (static_cast<int>(h.size()) == order - 1) {
        if (std::count(h.begin(), h.end(), "<s>") > 0) continue;
        std::vector<TokenId> filler{m.vocabulary().lookup(ref.vocab().back())};
        prefix = filler;
        for (const auto& w : h) prefix.push_back(m.vocabulary().lookup(w));
        oracle_history = h;
        if (order == 1) prefix.clear();
      } else {
        continue;
      }
      double total = 0.0;
      const auto dist = m.next_distribution(prefix);
      for (const auto& w : ref.vocab()) {
        const double expected = ref.prob(oracle_history, w);
        EXPECT_NEAR(m.probability(prefix, m.vocabulary().lookup(w)), expected, 1e-12) << "trial " << trial;
        EXPECT_NEAR(dist[m.vocabulary().lookup(w)], expected, 1e-12);
        total += expected;
      }
      EXPECT_NEAR(total, 1.0, 1e-9);
    }
  }
}

TEST(NGram, EveryContextNormalizes) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto m = train_ngram(random_corpus(rng), options(3));
    for (const auto& level : m.levels()) {
      for (const auto& [context, table] : level) {
        const auto d = m.next_distribution(context);
        double raw = 0.0;
        for (std::size_t w = 0; w < m.vocabulary().size(); ++w) raw += m.probability(context, static_cast<TokenId>(w));
        EXPECT_NEAR(raw, 1.0, 1e-9);
        for (double p : d.probs()) EXPECT_GT(p, 0.0);
      }
    }
  }
}

TEST(NGram, MinCountMapsRareWordsToUnknown) {
  const auto m = train_ngram(tiny_corpus(), options(2, 2));
  EXPECT_EQ(m.vocabulary().size(), 6u);  // reserved + "the", "cat", "."
  EXPECT_EQ(m.vocabulary().lookup("sat"), m.vocabulary().unk_id());
}

TEST(NGram, ParameterErrors) {
  EXPECT_THROW(train_ngram({}, {}), DataError);
  EXPECT_THROW(train_ngram({{}, {}}, {}), DataError);
  auto o = options(3);
  o.discount = 1.0;
  EXPECT_THROW(train_ngram(tiny_corpus(), o), ParameterError);
  o.discount = 0.0;
  EXPECT_THROW(train_ngram(tiny_corpus(), o), ParameterError);
  EXPECT_THROW(train_ngram(tiny_corpus(), options(0)), ParameterError);
  EXPECT_THROW(train_ngram(tiny_corpus(), options(3, 0)), ParameterError);
  const auto m = train_ngram(tiny_corpus(), options(2));
  EXPECT_THROW((void)m.probability({}, 100), ParameterError);
  EXPECT_THROW((void)m.next_distribution(std::vector<TokenId>{-3}), ParameterError);
}

TEST(NGram, MaskedModeIsTheMarkovPosterior) {
  const auto m = train_ngram(tiny_corpus(), options(2));
  const auto& v = m.vocabulary();
  const auto before = ids(m, {"the"});
  const auto after = ids(m, {"sat", "."});
  const auto posterior = m.predict(before, after, ScoringMode::masked(3));
  std::vector<double> expected(v.size());
  double total = 0.0;
  for (std::size_t w = 0; w < v.size(); ++w) {
    std::vector<TokenId> ctx = before;
    ctx.push_back(static_cast<TokenId>(w));
    expected[w] = m.probability(before, static_cast<TokenId>(w)) * m.probability(ctx, after[0]);
    total += expected[w];
  }
  for (std::size_t w = 0; w < v.size(); ++w) EXPECT_NEAR(posterior[static_cast<TokenId>(w)], expected[w] / total, 1e-12);
  // "cat" is the only word seen before "sat".
  EXPECT_EQ(rank_of(posterior, v.lookup("cat")), 1u);
  // With no right context masked mode reduces to causal.
  const auto causal = m.predict(before, {}, ScoringMode::causal());
  const auto masked = m.predict(before, {}, ScoringMode::masked(3));
  for (std::size_t w = 0; w < v.size(); ++w) EXPECT_NEAR(causal[static_cast<TokenId>(w)], masked[static_cast<TokenId>(w)], 1e-15);
}

TEST(NGram, MaskedWindowLimitsLeftContext) {
  const auto m = train_ngram(tiny_corpus(), options(2));
  const auto before = ids(m, {"the", "cat"});
  // Window 1 hides the sentence start; the last token still conditions.
  const auto a = m.predict(before, {}, ScoringMode::masked(1));
  const auto b = m.next_distribution(before);
  for (std::size_t w = 0; w < a.size(); ++w) EXPECT_NEAR(a[static_cast<TokenId>(w)], b[static_cast<TokenId>(w)], 1e-15);
}

TEST(NGram, SaveLoadRoundTrip) {
  std::mt19937_64 rng(5);
  const auto m = train_ngram(random_corpus(rng), options(3));
  std::stringstream buffer;
  save_model(m, buffer);
  const std::string first = buffer.str();
  const auto loaded = load_model(buffer);
  EXPECT_EQ(loaded.vocabulary(), m.vocabulary());
  EXPECT_EQ(loaded.order(), 3);
  EXPECT_EQ(loaded.discount(), 0.75);
  EXPECT_EQ(loaded.levels(), m.levels());
  std::stringstream again;
  save_model(loaded, again);
  EXPECT_EQ(again.str(), first);
  EXPECT_EQ(first.rfind("FAKESCOPE-NGRAM v1\n", 0), 0u);
}

TEST(NGram, LoadRejectsCorruptFiles) {
  const auto m = train_ngram(tiny_corpus(), options(2));
  std::stringstream buffer;
  save_model(m, buffer);
  const std::string good = buffer.str();

  auto load = [](const std::string& text) {
    std::istringstream in(text);
    return load_model(in);
  };
  auto expect_format_error = [&](const std::string& text, const std::string& fragment) {
    try {
      (void)load(text);
      ADD_FAILURE() << "expected FormatError for: " << fragment;
    } catch (const FormatError& e) {
      const std::string what = e.what();
      EXPECT_NE(what.find(fragment), std::string::npos) << what;
      EXPECT_NE(what.find("expected FAKESCOPE-NGRAM v1 model file"), std::string::npos) << what;
    }
  };
  expect_format_error("", "truncated");
  expect_format_error("hello\n", "not a model file");
  expect_format_error("FAKESCOPE-NGRAM v9\n", "unsupported model format version 'v9'");
  expect_format_error(good.substr(0, good.size() / 2), "");
  expect_format_error(good.substr(0, good.size() - 4), "end");
  std::string bad = good;
  bad.replace(bad.find("discount=0.75"), 13, "discount=1.75");
  expect_format_error(bad, "discount");
  bad = good;
  bad.replace(bad.find("|\t"), 2, "#\t");
  expect_format_error(bad, "malformed count record");
}

TEST(Sampler, TemperatureExample) {
  const auto w = sampling_weights(std::vector<double>{0.5, 0.25, 0.25}, 0.5, 0);
  EXPECT_NEAR(w[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(w[1], 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(w[2], 1.0 / 6.0, 1e-12);
}

TEST(Sampler, TopKKeepsHighestWithLowIdTies) {
  const auto w = sampling_weights(std::vector<double>{0.1, 0.3, 0.3, 0.3}, 1.0, 2);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NEAR(w[1], 0.5, 1e-12);
  EXPECT_NEAR(w[2], 0.5, 1e-12);
  EXPECT_EQ(w[3], 0.0);
  const auto all = sampling_weights(std::vector<double>{0.1, 0.9}, 1.0, 10);
  EXPECT_NEAR(all[1], 0.9, 1e-12);
}

TEST(Sampler, Errors) {
  EXPECT_THROW(sampling_weights(std::vector<double>{1.0}, 0.0, 0), ParameterError);
  EXPECT_THROW(sampling_weights(std::vector<double>{1.0}, -1.0, 0), ParameterError);
  const auto m = train_ngram(tiny_corpus(), options(2));
  EXPECT_THROW(sample(m, {}, 0), ParameterError);
}

TEST(Sampler, DeterministicAndTopOneIsGreedy) {
  const auto m = train_ngram(tiny_corpus(), options(2));
  SampleOptions o;
  o.random_seed = 42;
  EXPECT_EQ(sample(m, {}, 20, o), sample(m, {}, 20, o));
  o.top_k = 1;
  const auto greedy = sample(m, {}, 5, o);
  std::vector<TokenId> context;
  for (TokenId id : greedy) {
    EXPECT_EQ(id, top_ids(m.next_distribution(context), 1).front());
    context.push_back(id);
  }
}

TEST(Sampler, EmpiricalFrequenciesFollowWeights) {
  const std::vector<double> w{0.5, 0.3, 0.2};
  std::mt19937_64 rng(9);
  std::vector<int> counts(3, 0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(draw(w, rng))];
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(counts[i] / double(n), w[i], 0.015);
}

TEST(Sampler, BannedTokensNeverAppear) {
  const auto m = train_ngram(tiny_corpus(), options(2));
  SampleOptions o;
  o.banned = {m.vocabulary().unk_id(), m.vocabulary().bos_id(), m.vocabulary().eos_id()};
  for (std::uint64_t seed = 1; seed < 20; ++seed) {
    o.random_seed = seed;
    for (TokenId id : sample(m, {}, 30, o)) EXPECT_FALSE(m.vocabulary().is_reserved(id));
  }
}
