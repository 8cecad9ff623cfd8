#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "propmatch/corpus.hpp"
#include "propmatch/embedding.hpp"
#include "propmatch/fast_filter.hpp"
#include "propmatch/models.hpp"
#include "propmatch/pipeline.hpp"

namespace propmatch::service {

inline constexpr int kFormatVersion = 1;

// Failures of the service layer itself, as opposed to data errors raised by
// the core library. The kind decides the HTTP status.
class ServiceError : public std::runtime_error {
 public:
  enum class Kind { kInvalid, kNotFound, kConflict, kUnavailable, kUpstream };

  ServiceError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

int HttpStatus(ServiceError::Kind kind);

// "2026-01-31T08:00:00Z"
std::string UtcTimestamp();

struct CorpusEntry {
  std::string id;
  std::size_t documents = 0;
  std::size_t sentences = 0;
  std::size_t parsed_sentences = 0;
  std::string created;
};

struct QueryEntry {
  std::string id;
  std::string text;
  std::optional<std::string> corpus_id;
  std::optional<std::string> conllu;  // one parse block, when parsed
  std::string created;
};

struct EmbeddingEntry {
  std::string id;
  std::string path;
  std::size_t dim = 0;
  std::size_t words = 0;
  std::string created;
};

enum class ModelKind { kLr, kLstm, kTfIdf };

std::string_view ModelKindName(ModelKind kind);
ModelKind ParseModelKind(std::string_view name);

struct ModelEntry {
  std::string id;
  ModelKind kind = ModelKind::kLr;
  std::optional<std::string> corpus_id;  // tf-idf: the corpus it was fitted on
  std::optional<std::string> embeddings_id;  // lstm: the table its inputs use
  nlohmann::json info = nlohmann::json::object();  // training summary
  std::string created;
};

struct StoredRating {
  RatingRecord record;
  std::string timestamp;
};

nlohmann::json ToJson(const CorpusEntry& e);
nlohmann::json ToJson(const QueryEntry& e);
nlohmann::json ToJson(const EmbeddingEntry& e);
nlohmann::json ToJson(const ModelEntry& e);
nlohmann::json ToJson(const StoredRating& r);

// On-disk project:
//
//   store.json                 {"format_version": 1}
//   corpora.jsonl              registry, one CorpusEntry per line
//   corpora/<id>/documents.jsonl, corpora/<id>/parses.conllu (optional)
//   queries.jsonl              registry, one QueryEntry per line
//   embeddings.jsonl           registry of vector files (by path)
//   models.jsonl               registry, one ModelEntry per line
//   models/<id>.json           {"format_version", "kind", "model"}
//   ratings.csv                rater,query,doc,position,score,timestamp
//
// Artifacts are written before their registry line, and registries are only
// appended to, so a registered id always resolves. Corpora and models are
// immutable once registered. Readers share a lock; every write holds it
// exclusively.
class ProjectStore {
 public:
  // Creates the layout when `root` is missing or empty. Throws
  // ServiceError(kInvalid) on an unknown format version.
  explicit ProjectStore(std::filesystem::path root);

  ProjectStore(const ProjectStore&) = delete;
  ProjectStore& operator=(const ProjectStore&) = delete;

  const std::filesystem::path& root() const { return root_; }

  // Ingests and registers a corpus. Data errors from ingestion propagate;
  // a taken id is kConflict.
  CorpusEntry AddCorpus(const std::optional<std::string>& id, const std::string& documents_jsonl,
                        const std::optional<std::string>& parses_conllu);
  std::vector<CorpusEntry> corpora() const;
  CorpusEntry corpus_entry(const std::string& id) const;
  std::shared_ptr<const Corpus> corpus(const std::string& id) const;
  std::optional<std::string> latest_corpus() const;

  QueryEntry AddQuery(const std::optional<std::string>& id, const std::string& text,
                      const std::optional<std::string>& corpus_id,
                      const std::optional<std::string>& conllu);
  std::vector<QueryEntry> queries() const;
  QueryEntry query_entry(const std::string& id) const;
  PropositionQuery query(const std::string& id) const;

  EmbeddingEntry AddEmbeddings(const std::optional<std::string>& id, const std::string& path);
  std::vector<EmbeddingEntry> embeddings() const;
  std::shared_ptr<const EmbeddingTable> embedding_table(const std::string& id) const;
  std::optional<std::string> latest_embeddings() const;

  ModelEntry AddLr(const std::optional<std::string>& id, const LRModel& model, nlohmann::json info);
  ModelEntry AddLstm(const std::optional<std::string>& id, const LSTMModel& model,
                     const std::optional<std::string>& embeddings_id, nlohmann::json info);
  ModelEntry AddTfIdf(const std::optional<std::string>& id, const TfIdfModel& model,
                      const std::string& corpus_id);
  std::vector<ModelEntry> models() const;
  ModelEntry model_entry(const std::string& id) const;
  std::shared_ptr<const LRModel> lr(const std::string& id) const;
  std::shared_ptr<const LSTMModel> lstm(const std::string& id) const;
  std::shared_ptr<const TfIdfModel> tfidf(const std::string& id) const;
  // Most recent model of `kind`; for tf-idf, fitted on `corpus_id`.
  std::optional<std::string> latest_model(ModelKind kind,
                                          const std::optional<std::string>& corpus_id = std::nullopt) const;

  // Validates and appends one rating with the current UTC time. The sentence
  // must exist in some registered corpus, and the query must be registered.
  StoredRating AppendRating(const RatingRecord& record);
  std::vector<StoredRating> ratings() const;

 private:
  template <typename Entry>
  struct Registry {
    std::vector<Entry> entries;
    std::map<std::string, std::size_t, std::less<>> by_id;

    const Entry* find(std::string_view id) const {
      auto it = by_id.find(id);
      return it == by_id.end() ? nullptr : &entries[it->second];
    }
  };

  void Load();
  std::string NewId(const std::optional<std::string>& requested, std::string_view prefix,
                    const std::map<std::string, std::size_t, std::less<>>& taken) const;
  void AppendLine(const std::string& file, const nlohmann::json& line) const;
  ModelEntry RegisterModel(ModelEntry entry, const nlohmann::json& model);
  nlohmann::json ReadModel(const std::string& id, ModelKind kind) const;

  std::filesystem::path root_;
  mutable std::shared_mutex mu_;
  Registry<CorpusEntry> corpora_;
  Registry<QueryEntry> queries_;
  Registry<EmbeddingEntry> embeddings_;
  Registry<ModelEntry> models_;

  // Loaded artifacts, filled on first use.
  mutable std::mutex cache_mu_;
  mutable std::map<std::string, std::shared_ptr<const Corpus>, std::less<>> corpus_cache_;
  mutable std::map<std::string, std::shared_ptr<const EmbeddingTable>, std::less<>> table_cache_;
  mutable std::map<std::string, std::shared_ptr<const void>, std::less<>> model_cache_;
};

}  // namespace propmatch::service
