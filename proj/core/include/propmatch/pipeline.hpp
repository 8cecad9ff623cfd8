#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "propmatch/corpus.hpp"
#include "propmatch/embedding.hpp"
#include "propmatch/fast_filter.hpp"
#include "propmatch/models.hpp"
#include "propmatch/tree_edit.hpp"

namespace propmatch {

enum class RerankerKind { kNone, kLr, kLstm };

std::string_view RerankerName(RerankerKind kind);
RerankerKind ParseRerankerKind(std::string_view name);

struct PipelineConfig {
  FilterKind filter = FilterKind::kAveraging;
  RerankerKind reranker = RerankerKind::kNone;
  std::size_t k = 250;  // filter width
  std::size_t n = 25;  // output size
  SearchConfig search;

  // Throws BadInput unless 1 <= n <= k.
  void Validate() const;
};

// Borrowed scoring resources. Only the ones the configuration names are
// required: embeddings for averaging or the LSTM, tfidf for the tf-idf
// filter, lr / lstm for the matching reranker.
struct MatchResources {
  const EmbeddingTable* embeddings = nullptr;
  const TfIdfModel* tfidf = nullptr;
  const LRModel* lr = nullptr;
  const LSTMModel* lstm = nullptr;
};

struct RankedMatch {
  SentenceRef ref;
  std::size_t global_index = 0;
  double fast_score = 0;
  std::optional<double> rerank_score;
  // True when the reranker was asked for but the candidate (or query) had no
  // tree, so rerank_score repeats fast_score.
  bool flagged_no_parse = false;
  int final_rank = 0;  // 1-based
};

FastScorer MakeFastScorer(FilterKind kind, const MatchResources& resources);

// Entailment score m(query, sentence) in (0,1). Throws BadInput when the
// trees or the model are missing.
double RerankScore(const PropositionQuery& query, const Sentence& sentence,
                   RerankerKind reranker, const MatchResources& resources,
                   const SearchConfig& search = {});

// Filter to the top k by fast score, rerank the survivors, keep the top n.
// k larger than the corpus is clamped. Ties go to the earlier sentence.
std::vector<RankedMatch> Match(const PropositionQuery& query, const Corpus& corpus,
                               const PipelineConfig& config, const MatchResources& resources);

// ---------------------------------------------------------------- measurement

struct MeasurementSeries {
  std::vector<Date> bin_start;  // calendar quarter starts, contiguous
  std::vector<std::size_t> counts;
  std::size_t undated_matches = 0;
};

Date QuarterStart(const Date& date);

MeasurementSeries Measure(std::span<const RankedMatch> matches, const Corpus& corpus);

std::string MeasurementToCsv(const MeasurementSeries& series);
nlohmann::json MeasurementToJson(const MeasurementSeries& series);

// ---------------------------------------------------------------- evaluation

// Scores one sentence for one query; higher is better.
using SentenceScorer = std::function<double(const PropositionQuery&, const Sentence&)>;

SentenceScorer FastSentenceScorer(const FastScorer& scorer);

// Indices of the n best sentences (score descending, ties by position).
std::vector<std::size_t> RankSentences(const PropositionQuery& query,
                                       std::span<const Sentence> sentences,
                                       const SentenceScorer& scorer, std::size_t n);

struct RecallInstance {
  PropositionQuery query;
  std::vector<Sentence> sentences;  // the instance's document
  std::set<std::size_t> relevant;  // indices into sentences
};

// Fraction of instances whose top n holds a relevant sentence. Throws
// BadInstance on an empty or out-of-range relevant set, BadInput for n < 1
// or no instances.
double RecallAtN(std::span<const RecallInstance> instances, const SentenceScorer& scorer,
                 std::size_t n);

// Reads recall fixture JSONL: {"query","sentences":[...],"relevant":[...]}.
std::vector<RecallInstance> LoadRecallFixture(std::istream& in);

struct FrameQuery {
  PropositionQuery query;
  std::string frame;
};

struct PrecisionResult {
  std::vector<double> per_query;
  double macro_average = 0;
};

// Annotations map sentence keys ("doc:position") to frame labels. Per query:
// |top-n sentences carrying the query's frame| / n, then the unweighted
// mean. Throws BadLabel for a frame absent from every annotation.
PrecisionResult PrecisionAtN(std::span<const FrameQuery> queries, const Corpus& corpus,
                             const std::unordered_map<std::string, std::set<std::string>>& annotations,
                             const SentenceScorer& scorer, std::size_t n);

// Frame fixture JSONL: {"sentence_id","labels":[...]} per line.
std::unordered_map<std::string, std::set<std::string>> LoadFrameAnnotations(std::istream& in);
// Query file JSONL: {"id"?,"query","frame"} per line.
std::vector<FrameQuery> LoadFrameQueries(std::istream& in);

// ---------------------------------------------------------------- ratings

struct RatingRecord {
  std::string rater;
  std::string query_id;
  SentenceRef ref;
  int score = 0;  // 1..5

  // Throws BadInput when score is outside 1..5 or ids are empty.
  void Validate() const;
};

// Krippendorff's alpha, interval metric. Items are (query, sentence) pairs;
// only items with two or more ratings count. Throws InsufficientData with
// fewer than two such items.
double KrippendorffAlphaInterval(std::span<const RatingRecord> ratings);

// Ratings CSV: rater,query,doc,position,score (header optional; extra
// trailing columns such as a timestamp are ignored).
std::vector<RatingRecord> LoadRatingsCsv(std::istream& in);

}  // namespace propmatch
