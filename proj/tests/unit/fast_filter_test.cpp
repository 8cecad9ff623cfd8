#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "propmatch/errors.hpp"
#include "propmatch/fast_filter.hpp"
#include "support/corpora.hpp"

namespace propmatch {
namespace {

using testing::DocSpec;
using testing::MakeCorpus;

EmbeddingTable ToyTable() {
  EmbeddingTable t(3);
  t.Add("dog", std::vector<double>{1, 0, 0});
  t.Add("cat", std::vector<double>{0.8, 0.6, 0});
  t.Add("runs", std::vector<double>{0, 0, 1});
  t.Add("sleeps", std::vector<double>{0, 1, 1});
  return t;
}

TEST(FastScore, IdenticalTextScoresOne) {
  const EmbeddingTable t = ToyTable();
  const FastScorer avg = FastScorer::Averaging(t);
  const Corpus c = MakeCorpus({{"d", std::nullopt, {"dog runs"}}});
  const auto q = PropositionQuery::FromText("q", "dog runs");
  EXPECT_NEAR(FastScore(q, c.sentence(0), avg), 1.0, 1e-9);
}

TEST(FastScore, NoOverlapScoresZero) {
  const EmbeddingTable t = ToyTable();
  const FastScorer avg = FastScorer::Averaging(t);
  const Corpus c = MakeCorpus({{"d", std::nullopt, {"dog runs"}}});
  const auto q = PropositionQuery::FromText("q", "unknown words only");
  EXPECT_EQ(FastScore(q, c.sentence(0), avg), 0.0);
}

TEST(FastScore, ToyCorpusOrder) {
  // Hand values (the table stores floats, so .8 and .6 are inexact):
  // query "dog runs" averages to (.5, 0, .5).
  //   "cat sleeps" -> (.4, .8, .5): cos = .45 / (.7071 * 1.0247) = .6211
  //   "dog"        -> (1, 0, 0):    cos = .7071
  //   "sleeps"     -> (0, 1, 1):    cos = .5
  const EmbeddingTable t = ToyTable();
  const FastScorer avg = FastScorer::Averaging(t);
  const Corpus c = MakeCorpus({{"d", std::nullopt, {"cat sleeps", "dog", "sleeps"}}});
  const auto q = PropositionQuery::FromText("q", "dog runs");
  EXPECT_NEAR(FastScore(q, c.sentence(0), avg), 0.45 / (std::sqrt(0.5) * std::sqrt(1.05)), 1e-6);
  EXPECT_NEAR(FastScore(q, c.sentence(1), avg), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(FastScore(q, c.sentence(2), avg), 0.5, 1e-12);
  const auto top = TopK(q, c, avg, 3);
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(top[0].global_index, 1u);
  EXPECT_EQ(top[1].global_index, 0u);
  EXPECT_EQ(top[2].global_index, 2u);
  const auto best = TopK(q, c, avg, 1);
  ASSERT_EQ(best.size(), 1u);
  EXPECT_EQ(best[0].ref.key(), "d:1");
  EXPECT_EQ(best[0].rank, 1);
}

TEST(TopK, TiesGoToEarlierSentence) {
  const EmbeddingTable t = ToyTable();
  const Corpus c = MakeCorpus({{"a", std::nullopt, {"runs", "dog"}}, {"b", std::nullopt, {"dog"}}});
  const auto q = PropositionQuery::FromText("q", "dog");
  const auto top = TopK(q, c, FastScorer::Averaging(t), 3);
  EXPECT_EQ(top[0].ref.key(), "a:1");
  EXPECT_EQ(top[1].ref.key(), "b:0");
  EXPECT_EQ(top[2].ref.key(), "a:0");
}

TEST(TopK, Errors) {
  const EmbeddingTable t = ToyTable();
  const auto q = PropositionQuery::FromText("q", "dog");
  EXPECT_THROW(TopK(q, Corpus{}, FastScorer::Averaging(t), 1), EmptyCorpus);
  const Corpus c = MakeCorpus({{"a", std::nullopt, {"dog"}}});
  EXPECT_THROW(TopK(q, c, FastScorer::Averaging(t), 0), BadInput);
  EXPECT_THROW(PropositionQuery::FromText("q", " ... "), BadInput);
}

// Brute-force order: every score, stable sort descending.
std::vector<std::size_t> Oracle(const PropositionQuery& q, const Corpus& c, const FastScorer& s) {
  std::vector<double> scores;
  for (std::size_t i = 0; i < c.sentence_count(); ++i) scores.push_back(FastScore(q, c.sentence(i), s));
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

TEST(TopK, MatchesFullSortAndIsPrefixClosed) {
  std::mt19937_64 rng(17);
  const auto vocab = testing::Vocabulary(40);
  const EmbeddingTable table = testing::RandomTable(rng, vocab, 8);
  for (int trial = 0; trial < 5; ++trial) {
    const Corpus c = testing::RandomCorpus(rng, vocab, 100);
    const TfIdfModel tfidf = FitTfIdf(c);
    const auto q = PropositionQuery::FromText("q", testing::RandomText(rng, vocab, 2, 6));
    for (const FastScorer& s : {FastScorer::Averaging(table), FastScorer::TfIdf(tfidf)}) {
      const auto oracle = Oracle(q, c, s);
      std::vector<ScoredSentence> prev;
      for (std::size_t k = 1; k <= 101; ++k) {
        const auto top = TopK(q, c, s, k);
        ASSERT_EQ(top.size(), std::min<std::size_t>(k, 100));
        for (std::size_t i = 0; i < top.size(); ++i) {
          EXPECT_EQ(top[i].global_index, oracle[i]);
          EXPECT_EQ(top[i].rank, static_cast<int>(i + 1));
          if (i > 0) EXPECT_GE(top[i - 1].fast_score, top[i].fast_score);
        }
        for (std::size_t i = 0; i < prev.size(); ++i) EXPECT_EQ(prev[i].global_index, top[i].global_index);
        prev = top;
      }
    }
  }
}

TEST(TopK, SelfScoreIsOne) {
  std::mt19937_64 rng(23);
  const auto vocab = testing::Vocabulary(30);
  const EmbeddingTable table = testing::RandomTable(rng, vocab, 6);
  const Corpus c = testing::RandomCorpus(rng, vocab, 50);
  const TfIdfModel tfidf = FitTfIdf(c);
  for (std::size_t i = 0; i < c.sentence_count(); ++i) {
    const auto q = PropositionQuery::FromText("q", c.sentence(i).text);
    EXPECT_NEAR(FastScore(q, c.sentence(i), FastScorer::Averaging(table)), 1.0, 1e-9);
    EXPECT_NEAR(FastScore(q, c.sentence(i), FastScorer::TfIdf(tfidf)), 1.0, 1e-9);
  }
}

TEST(TopK, Deterministic) {
  std::mt19937_64 rng(29);
  const auto vocab = testing::Vocabulary(10);
  const EmbeddingTable table = testing::RandomTable(rng, vocab, 4);
  const Corpus c = testing::RandomCorpus(rng, vocab, 60);
  const auto q = PropositionQuery::FromText("q", "w1 w2");
  const auto a = TopK(q, c, FastScorer::Averaging(table), 20);
  const auto b = TopK(q, c, FastScorer::Averaging(table), 20);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].global_index, b[i].global_index);
    EXPECT_EQ(a[i].fast_score, b[i].fast_score);
  }
}

TEST(FilterKind, Names) {
  EXPECT_EQ(ParseFilterKind("averaging"), FilterKind::kAveraging);
  EXPECT_EQ(ParseFilterKind("tfidf"), FilterKind::kTfIdf);
  EXPECT_EQ(FilterName(FilterKind::kTfIdf), "tfidf");
  EXPECT_THROW(ParseFilterKind("bm25"), BadInput);
}

}  // namespace
}  // namespace propmatch
