#include "propmatch/fast_filter.hpp"

#include <algorithm>
#include <numeric>

#include "propmatch/errors.hpp"

namespace propmatch {

PropositionQuery PropositionQuery::FromText(std::string id, std::string text) {
  PropositionQuery q;
  q.id = std::move(id);
  q.tokens = FallbackTokenize(text);
  q.text = std::move(text);
  if (q.tokens.empty()) throw BadInput("query '" + q.id + "' has no tokens");
  return q;
}

PropositionQuery PropositionQuery::FromParse(std::string id, std::string text,
                                             ParsedSentence parse) {
  PropositionQuery q;
  q.id = std::move(id);
  q.text = std::move(text);
  q.tokens = std::move(parse.tokens);
  if (q.tokens.empty()) throw BadInput("query '" + q.id + "' has no tokens");
  q.tree = std::move(parse.tree);
  return q;
}

std::string_view FilterName(FilterKind kind) {
  return kind == FilterKind::kAveraging ? "averaging" : "tfidf";
}

FilterKind ParseFilterKind(std::string_view name) {
  if (name == "averaging") return FilterKind::kAveraging;
  if (name == "tfidf") return FilterKind::kTfIdf;
  throw BadInput("unknown filter '" + std::string(name) + "' (expected averaging|tfidf)");
}

FastScorer FastScorer::Averaging(const EmbeddingTable& table) {
  FastScorer s;
  s.kind_ = FilterKind::kAveraging;
  s.table_ = &table;
  return s;
}

FastScorer FastScorer::TfIdf(const TfIdfModel& model) {
  FastScorer s;
  s.kind_ = FilterKind::kTfIdf;
  s.tfidf_ = &model;
  return s;
}

FastScorer::Prepared FastScorer::Prepare(std::span<const Token> query_tokens) const {
  Prepared p;
  p.scorer_ = this;
  if (kind_ == FilterKind::kAveraging) {
    p.dense_ = AvgVector(query_tokens, *table_);
  } else {
    p.sparse_ = tfidf_->Vectorize(query_tokens);
  }
  return p;
}

double FastScorer::Prepared::Score(std::span<const Token> sentence_tokens) const {
  if (scorer_->kind_ == FilterKind::kAveraging) {
    return Cosine(dense_, AvgVector(sentence_tokens, *scorer_->table_));
  }
  return SparseCosine(sparse_, scorer_->tfidf_->Vectorize(sentence_tokens));
}

double FastScore(const PropositionQuery& query, const Sentence& sentence,
                 const FastScorer& scorer) {
  return scorer.Prepare(query.tokens).Score(sentence.tokens);
}

std::vector<ScoredSentence> TopK(const PropositionQuery& query, const Corpus& corpus,
                                 const FastScorer& scorer, std::size_t k) {
  if (k < 1) throw BadInput("k must be >= 1");
  if (corpus.empty()) throw EmptyCorpus("corpus has no sentences");
  const auto prepared = scorer.Prepare(query.tokens);
  const std::size_t n = corpus.sentence_count();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = prepared.Score(corpus.sentence(i).tokens);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t keep = std::min(k, n);
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                    better);

  std::vector<ScoredSentence> out;
  out.reserve(keep);
  for (std::size_t r = 0; r < keep; ++r) {
    const std::size_t i = order[r];
    out.push_back(ScoredSentence{corpus.sentence_index()[i], i, scores[i], static_cast<int>(r) + 1});
  }
  return out;
}

}  // namespace propmatch
