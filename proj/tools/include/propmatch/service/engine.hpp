#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "propmatch/pipeline.hpp"
#include "propmatch/service/parser_hook.hpp"
#include "propmatch/service/project_store.hpp"

namespace propmatch::service {

// Values that apply when a request leaves them out. Loaded from the config
// file and overridden by flags.
struct Defaults {
  FilterKind filter = FilterKind::kAveraging;
  RerankerKind reranker = RerankerKind::kNone;
  std::size_t k = 250;
  std::size_t n = 25;
  std::size_t measure_n = 50;
  std::size_t beam_width = 100;
  // Reject reranking when the query or a candidate has no parse instead of
  // falling back to the fast score.
  bool strict = false;
  // Vector file used when no embeddings are registered in the store.
  std::optional<std::string> embeddings_path;
};

struct MatchRequest {
  std::optional<FilterKind> filter;
  std::optional<RerankerKind> reranker;
  std::optional<std::size_t> k;
  std::optional<std::size_t> n;
  std::optional<std::string> corpus_id;
  std::optional<std::string> embeddings_id;
  std::optional<std::string> tfidf_model;
  std::optional<std::string> lr_model;
  std::optional<std::string> lstm_model;
};

struct MatchRun {
  std::string query_id;
  std::string corpus_id;
  PipelineConfig config;
  nlohmann::json resources = nlohmann::json::object();  // ids of what scored the run
  std::shared_ptr<const Corpus> corpus;
  std::vector<RankedMatch> matches;
};

struct TrainRequest {
  ModelKind kind = ModelKind::kLr;
  std::optional<std::string> id;
  std::string records_jsonl;
  std::string parses_conllu;
  std::optional<std::string> embeddings_id;  // lstm only
  TrainConfig config;
  std::size_t beam_width = 100;
};

// Parses "1,2,5" into {1, 2, 5}. Throws ServiceError(kInvalid).
std::vector<std::size_t> ParseSizeList(const std::string& text);

// Store-backed operations shared by the CLI and the HTTP service, so both
// produce the same bytes for the same inputs.
class Engine {
 public:
  Engine(ProjectStore& store, Defaults defaults, ParserHook hook);

  ProjectStore& store() { return store_; }
  const ProjectStore& store() const { return store_; }
  const Defaults& defaults() const { return defaults_; }
  const ParserHook& hook() const { return hook_; }

  // Without parses, sentences are sent through the parser hook when
  // `use_hook` is set and a hook is configured.
  CorpusEntry Ingest(const std::optional<std::string>& id, const std::string& documents_jsonl,
                     std::optional<std::string> parses_conllu, bool use_hook);

  // Parses through the hook when no parse is given and a hook is configured.
  QueryEntry AddQuery(const std::optional<std::string>& id, const std::string& text,
                      const std::optional<std::string>& corpus_id, std::optional<std::string> conllu);

  // A query that is not stored; parsed through the hook when configured.
  PropositionQuery TransientQuery(const std::string& text) const;

  MatchRun Match(const PropositionQuery& query, const std::optional<std::string>& query_corpus,
                 const MatchRequest& request) const;
  MatchRun MatchStored(const std::string& query_id, const MatchRequest& request) const;

  // Top `n` matches (filter width at least n) binned by quarter.
  MeasurementSeries Measure(const MatchRun& run) const;
  MatchRun MatchForMeasurement(const std::string& query_id, std::optional<std::size_t> n,
                               MatchRequest request) const;

  ModelEntry Train(const TrainRequest& request) const;
  ModelEntry FitTfIdf(const std::optional<std::string>& id, const std::string& corpus_id) const;

  std::vector<std::pair<std::size_t, double>> EvalRecall(const std::vector<RecallInstance>& instances,
                                                         FilterKind filter, const std::optional<std::string>& embeddings_id,
                                                         const std::vector<std::size_t>& ns) const;
  std::vector<std::pair<std::size_t, PrecisionResult>> EvalPrecision(
      const std::string& corpus_id, const std::vector<FrameQuery>& queries,
      const std::unordered_map<std::string, std::set<std::string>>& annotations, const MatchRequest& scorer,
      const std::vector<std::size_t>& ns) const;

  // Alpha over every stored rating, or those of one query.
  nlohmann::json Alpha(const std::optional<std::string>& query_id) const;

 private:
  std::shared_ptr<const EmbeddingTable> ResolveEmbeddings(const std::optional<std::string>& id,
                                                          nlohmann::json* used) const;
  std::shared_ptr<const TfIdfModel> ResolveTfIdf(const std::optional<std::string>& model_id,
                                                 const std::string& corpus_id, nlohmann::json* used) const;

  ProjectStore& store_;
  Defaults defaults_;
  ParserHook hook_;

  mutable std::mutex cache_mu_;
  mutable std::shared_ptr<const EmbeddingTable> config_table_;
  mutable std::map<std::string, std::shared_ptr<const TfIdfModel>> fitted_tfidf_;
};

nlohmann::json MatchRunToJson(const MatchRun& run);
// Fixed-width table, one row per match plus its context sentences.
std::string MatchRunToTable(const MatchRun& run);
nlohmann::json MeasurementRunToJson(const MatchRun& run, const MeasurementSeries& series);

}  // namespace propmatch::service
