#include "propmatch/service/project_store.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>
#include <utility>

#include "propmatch/errors.hpp"

namespace propmatch::service {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kCorporaFile = "corpora.jsonl";
constexpr const char* kQueriesFile = "queries.jsonl";
constexpr const char* kEmbeddingsFile = "embeddings.jsonl";
constexpr const char* kModelsFile = "models.jsonl";
constexpr const char* kRatingsFile = "ratings.csv";
constexpr const char* kRatingsHeader = "rater,query,doc,position,score,timestamp";

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ServiceError(ServiceError::Kind::kInvalid, "cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void WriteFile(const fs::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << data;
  out.flush();
  if (!out) throw ServiceError(ServiceError::Kind::kInvalid, "cannot write " + path.string());
}

// Ids double as file names.
void CheckId(const std::string& id, std::string_view what) {
  const bool ok = !id.empty() && id.size() <= 128 && id != "." && id != ".." &&
                  std::all_of(id.begin(), id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
                  });
  if (!ok) {
    throw ServiceError(ServiceError::Kind::kInvalid,
                       std::string(what) + " id '" + id + "' must be 1-128 characters of [A-Za-z0-9._-]");
  }
}

// Ratings fields go into a comma-separated file unquoted.
void CheckCsvField(const std::string& value, std::string_view what) {
  if (value.find_first_of(",\r\n\"") != std::string::npos) {
    throw ServiceError(ServiceError::Kind::kInvalid, std::string(what) + " must not contain commas, quotes or newlines");
  }
}

std::optional<std::string> OptString(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

template <typename Entry, typename Parse>
void LoadRegistry(const fs::path& path, Parse parse, std::vector<Entry>& entries,
                  std::map<std::string, std::size_t, std::less<>>& by_id) {
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (j.value("format_version", 0) != kFormatVersion) {
        throw ServiceError(ServiceError::Kind::kInvalid, "unsupported format_version");
      }
      Entry e = parse(j);
      by_id.emplace(e.id, entries.size());
      entries.push_back(std::move(e));
    } catch (const json::exception& e) {
      throw ServiceError(ServiceError::Kind::kInvalid,
                         path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

CorpusEntry CorpusFromJson(const json& j) {
  return {j.at("id").get<std::string>(), j.at("documents").get<std::size_t>(),
          j.at("sentences").get<std::size_t>(), j.at("parsed_sentences").get<std::size_t>(),
          j.value("created", "")};
}

QueryEntry QueryFromJson(const json& j) {
  return {j.at("id").get<std::string>(), j.at("text").get<std::string>(), OptString(j, "corpus_id"),
          OptString(j, "conllu"), j.value("created", "")};
}

EmbeddingEntry EmbeddingFromJson(const json& j) {
  return {j.at("id").get<std::string>(), j.at("path").get<std::string>(), j.at("dim").get<std::size_t>(),
          j.at("words").get<std::size_t>(), j.value("created", "")};
}

ModelEntry ModelFromJson(const json& j) {
  ModelEntry e;
  e.id = j.at("id").get<std::string>();
  e.kind = ParseModelKind(j.at("kind").get<std::string>());
  e.corpus_id = OptString(j, "corpus_id");
  e.embeddings_id = OptString(j, "embeddings_id");
  e.info = j.value("info", json::object());
  e.created = j.value("created", "");
  return e;
}

json Versioned(json j) {
  j["format_version"] = kFormatVersion;
  return j;
}

}  // namespace

int HttpStatus(ServiceError::Kind kind) {
  switch (kind) {
    case ServiceError::Kind::kInvalid: return 400;
    case ServiceError::Kind::kNotFound: return 404;
    case ServiceError::Kind::kConflict: return 409;
    case ServiceError::Kind::kUnavailable: return 422;
    case ServiceError::Kind::kUpstream: return 502;
  }
  return 500;
}

std::string UtcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string_view ModelKindName(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLr: return "lr";
    case ModelKind::kLstm: return "lstm";
    case ModelKind::kTfIdf: return "tfidf";
  }
  return "lr";
}

ModelKind ParseModelKind(std::string_view name) {
  if (name == "lr") return ModelKind::kLr;
  if (name == "lstm") return ModelKind::kLstm;
  if (name == "tfidf") return ModelKind::kTfIdf;
  throw ServiceError(ServiceError::Kind::kInvalid, "unknown model kind '" + std::string(name) + "'");
}

json ToJson(const CorpusEntry& e) {
  return {{"id", e.id}, {"documents", e.documents}, {"sentences", e.sentences},
          {"parsed_sentences", e.parsed_sentences}, {"created", e.created}};
}

json ToJson(const QueryEntry& e) {
  json j{{"id", e.id}, {"text", e.text}, {"corpus_id", nullptr}, {"parsed", e.conllu.has_value()},
         {"created", e.created}};
  if (e.corpus_id) j["corpus_id"] = *e.corpus_id;
  return j;
}

json ToJson(const EmbeddingEntry& e) {
  return {{"id", e.id}, {"path", e.path}, {"dim", e.dim}, {"words", e.words}, {"created", e.created}};
}

json ToJson(const ModelEntry& e) {
  json j{{"id", e.id}, {"kind", ModelKindName(e.kind)}, {"info", e.info}, {"created", e.created}};
  if (e.corpus_id) j["corpus_id"] = *e.corpus_id;
  if (e.embeddings_id) j["embeddings_id"] = *e.embeddings_id;
  return j;
}

json ToJson(const StoredRating& r) {
  return {{"rater", r.record.rater},           {"query_id", r.record.query_id},
          {"doc_id", r.record.ref.doc_id},     {"position", r.record.ref.position},
          {"score", r.record.score},           {"timestamp", r.timestamp}};
}

// ---------------------------------------------------------------- store

ProjectStore::ProjectStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (!fs::is_directory(root_)) {
    throw ServiceError(ServiceError::Kind::kInvalid, "cannot create project directory " + root_.string());
  }
  const fs::path marker = root_ / "store.json";
  if (!fs::exists(marker)) {
    WriteFile(marker, json{{"format_version", kFormatVersion}}.dump() + "\n");
  } else {
    json j;
    try {
      j = json::parse(ReadFile(marker));
    } catch (const json::exception& e) {
      throw ServiceError(ServiceError::Kind::kInvalid, "store.json: " + std::string(e.what()));
    }
    if (j.value("format_version", 0) != kFormatVersion) {
      throw ServiceError(ServiceError::Kind::kInvalid,
                         "store.json: unsupported format_version " + j.value("format_version", json()).dump());
    }
  }
  fs::create_directories(root_ / "corpora");
  fs::create_directories(root_ / "models");
  Load();
}

void ProjectStore::Load() {
  LoadRegistry(root_ / kCorporaFile, CorpusFromJson, corpora_.entries, corpora_.by_id);
  LoadRegistry(root_ / kQueriesFile, QueryFromJson, queries_.entries, queries_.by_id);
  LoadRegistry(root_ / kEmbeddingsFile, EmbeddingFromJson, embeddings_.entries, embeddings_.by_id);
  LoadRegistry(root_ / kModelsFile, ModelFromJson, models_.entries, models_.by_id);
}

std::string ProjectStore::NewId(const std::optional<std::string>& requested, std::string_view prefix,
                                const std::map<std::string, std::size_t, std::less<>>& taken) const {
  if (requested) {
    CheckId(*requested, prefix);
    if (taken.contains(*requested)) {
      throw ServiceError(ServiceError::Kind::kConflict, "id '" + *requested + "' is already registered");
    }
    return *requested;
  }
  for (std::size_t n = taken.size() + 1;; ++n) {
    std::string id = std::string(prefix) + std::to_string(n);
    if (!taken.contains(id)) return id;
  }
}

void ProjectStore::AppendLine(const std::string& file, const json& line) const {
  std::ofstream out(root_ / file, std::ios::app);
  out << line.dump() << '\n';
  out.flush();
  if (!out) throw ServiceError(ServiceError::Kind::kInvalid, "cannot append to " + file);
}

// ---------------------------------------------------------------- corpora

CorpusEntry ProjectStore::AddCorpus(const std::optional<std::string>& id, const std::string& documents_jsonl,
                                    const std::optional<std::string>& parses_conllu) {
  std::istringstream docs(documents_jsonl);
  std::optional<std::istringstream> parses;
  if (parses_conllu) parses.emplace(*parses_conllu);
  auto corpus = std::make_shared<const Corpus>(IngestCorpus(docs, parses ? &*parses : nullptr));

  std::unique_lock lock(mu_);
  CorpusEntry e;
  e.id = NewId(id, "c", corpora_.by_id);
  e.documents = corpus->documents().size();
  e.sentences = corpus->sentence_count();
  for (std::size_t i = 0; i < corpus->sentence_count(); ++i) e.parsed_sentences += corpus->sentence(i).tree ? 1 : 0;
  e.created = UtcTimestamp();

  const fs::path dir = root_ / "corpora" / e.id;
  fs::create_directories(dir);
  WriteFile(dir / "documents.jsonl", documents_jsonl);
  if (parses_conllu) WriteFile(dir / "parses.conllu", *parses_conllu);
  AppendLine(kCorporaFile, Versioned(ToJson(e)));
  corpora_.by_id.emplace(e.id, corpora_.entries.size());
  corpora_.entries.push_back(e);
  std::lock_guard cache(cache_mu_);
  corpus_cache_[e.id] = std::move(corpus);
  return e;
}

std::vector<CorpusEntry> ProjectStore::corpora() const {
  std::shared_lock lock(mu_);
  return corpora_.entries;
}

CorpusEntry ProjectStore::corpus_entry(const std::string& id) const {
  std::shared_lock lock(mu_);
  const CorpusEntry* e = corpora_.find(id);
  if (e == nullptr) throw ServiceError(ServiceError::Kind::kNotFound, "unknown corpus '" + id + "'");
  return *e;
}

std::shared_ptr<const Corpus> ProjectStore::corpus(const std::string& id) const {
  corpus_entry(id);
  std::lock_guard cache(cache_mu_);
  auto& slot = corpus_cache_[id];
  if (!slot) {
    const fs::path dir = root_ / "corpora" / id;
    std::ifstream docs(dir / "documents.jsonl");
    std::ifstream parses(dir / "parses.conllu");
    slot = std::make_shared<const Corpus>(IngestCorpus(docs, parses ? &parses : nullptr));
  }
  return slot;
}

std::optional<std::string> ProjectStore::latest_corpus() const {
  std::shared_lock lock(mu_);
  if (corpora_.entries.empty()) return std::nullopt;
  return corpora_.entries.back().id;
}

// ---------------------------------------------------------------- queries

namespace {

PropositionQuery BuildQuery(const QueryEntry& e) {
  if (!e.conllu) return PropositionQuery::FromText(e.id, e.text);
  std::vector<ParsedSentence> parsed = ParseConllu(*e.conllu);
  if (parsed.size() != 1) {
    throw ServiceError(ServiceError::Kind::kInvalid, "query parse must hold exactly one sentence, got " +
                                                         std::to_string(parsed.size()));
  }
  return PropositionQuery::FromParse(e.id, e.text, std::move(parsed.front()));
}

}  // namespace

QueryEntry ProjectStore::AddQuery(const std::optional<std::string>& id, const std::string& text,
                                  const std::optional<std::string>& corpus_id,
                                  const std::optional<std::string>& conllu) {
  std::unique_lock lock(mu_);
  QueryEntry e;
  e.id = NewId(id, "q", queries_.by_id);
  e.text = text;
  if (corpus_id && corpora_.find(*corpus_id) == nullptr) {
    throw ServiceError(ServiceError::Kind::kNotFound, "unknown corpus '" + *corpus_id + "'");
  }
  e.corpus_id = corpus_id;
  e.conllu = conllu;
  e.created = UtcTimestamp();
  BuildQuery(e);
  json line = ToJson(e);
  if (e.conllu) line["conllu"] = *e.conllu;
  AppendLine(kQueriesFile, Versioned(line));
  queries_.by_id.emplace(e.id, queries_.entries.size());
  queries_.entries.push_back(e);
  return e;
}

std::vector<QueryEntry> ProjectStore::queries() const {
  std::shared_lock lock(mu_);
  return queries_.entries;
}

QueryEntry ProjectStore::query_entry(const std::string& id) const {
  std::shared_lock lock(mu_);
  const QueryEntry* e = queries_.find(id);
  if (e == nullptr) throw ServiceError(ServiceError::Kind::kNotFound, "unknown query '" + id + "'");
  return *e;
}

PropositionQuery ProjectStore::query(const std::string& id) const { return BuildQuery(query_entry(id)); }

// ---------------------------------------------------------------- embeddings

EmbeddingEntry ProjectStore::AddEmbeddings(const std::optional<std::string>& id, const std::string& path) {
  auto table = std::make_shared<const EmbeddingTable>(LoadEmbeddingsFile(path));
  std::unique_lock lock(mu_);
  EmbeddingEntry e;
  e.id = NewId(id, "e", embeddings_.by_id);
  e.path = fs::absolute(path).lexically_normal().string();
  e.dim = table->dim();
  e.words = table->size();
  e.created = UtcTimestamp();
  AppendLine(kEmbeddingsFile, Versioned(ToJson(e)));
  embeddings_.by_id.emplace(e.id, embeddings_.entries.size());
  embeddings_.entries.push_back(e);
  std::lock_guard cache(cache_mu_);
  table_cache_[e.id] = std::move(table);
  return e;
}

std::vector<EmbeddingEntry> ProjectStore::embeddings() const {
  std::shared_lock lock(mu_);
  return embeddings_.entries;
}

std::shared_ptr<const EmbeddingTable> ProjectStore::embedding_table(const std::string& id) const {
  EmbeddingEntry e;
  {
    std::shared_lock lock(mu_);
    const EmbeddingEntry* found = embeddings_.find(id);
    if (found == nullptr) throw ServiceError(ServiceError::Kind::kNotFound, "unknown embeddings '" + id + "'");
    e = *found;
  }
  std::lock_guard cache(cache_mu_);
  auto& slot = table_cache_[id];
  if (!slot) {
    auto table = std::make_shared<const EmbeddingTable>(LoadEmbeddingsFile(e.path));
    if (table->dim() != e.dim || table->size() != e.words) {
      throw ServiceError(ServiceError::Kind::kUnavailable, "vector file " + e.path + " changed since registration");
    }
    slot = std::move(table);
  }
  return slot;
}

std::optional<std::string> ProjectStore::latest_embeddings() const {
  std::shared_lock lock(mu_);
  if (embeddings_.entries.empty()) return std::nullopt;
  return embeddings_.entries.back().id;
}

// ---------------------------------------------------------------- models

ModelEntry ProjectStore::RegisterModel(ModelEntry entry, const json& model) {
  std::unique_lock lock(mu_);
  entry.id = NewId(entry.id.empty() ? std::nullopt : std::optional(entry.id), "m", models_.by_id);
  entry.created = UtcTimestamp();
  WriteFile(root_ / "models" / (entry.id + ".json"),
            json{{"format_version", kFormatVersion}, {"kind", ModelKindName(entry.kind)}, {"model", model}}.dump() +
                "\n");
  AppendLine(kModelsFile, Versioned(ToJson(entry)));
  models_.by_id.emplace(entry.id, models_.entries.size());
  models_.entries.push_back(entry);
  return entry;
}

ModelEntry ProjectStore::AddLr(const std::optional<std::string>& id, const LRModel& model, json info) {
  ModelEntry e;
  e.id = id.value_or("");
  e.kind = ModelKind::kLr;
  e.info = std::move(info);
  return RegisterModel(std::move(e), model.ToJson());
}

ModelEntry ProjectStore::AddLstm(const std::optional<std::string>& id, const LSTMModel& model,
                                 const std::optional<std::string>& embeddings_id, json info) {
  ModelEntry e;
  e.id = id.value_or("");
  e.kind = ModelKind::kLstm;
  e.embeddings_id = embeddings_id;
  e.info = std::move(info);
  return RegisterModel(std::move(e), model.ToJson());
}

ModelEntry ProjectStore::AddTfIdf(const std::optional<std::string>& id, const TfIdfModel& model,
                                  const std::string& corpus_id) {
  corpus_entry(corpus_id);
  ModelEntry e;
  e.id = id.value_or("");
  e.kind = ModelKind::kTfIdf;
  e.corpus_id = corpus_id;
  e.info = {{"vocabulary", model.vocab_size()}, {"sentences", model.n_sentences()}};
  return RegisterModel(std::move(e), model.ToJson());
}

std::vector<ModelEntry> ProjectStore::models() const {
  std::shared_lock lock(mu_);
  return models_.entries;
}

ModelEntry ProjectStore::model_entry(const std::string& id) const {
  std::shared_lock lock(mu_);
  const ModelEntry* e = models_.find(id);
  if (e == nullptr) throw ServiceError(ServiceError::Kind::kNotFound, "unknown model '" + id + "'");
  return *e;
}

json ProjectStore::ReadModel(const std::string& id, ModelKind kind) const {
  const ModelEntry e = model_entry(id);
  if (e.kind != kind) {
    throw ServiceError(ServiceError::Kind::kInvalid, "model '" + id + "' is " + std::string(ModelKindName(e.kind)) +
                                                         ", not " + std::string(ModelKindName(kind)));
  }
  const json j = json::parse(ReadFile(root_ / "models" / (id + ".json")));
  if (j.value("format_version", 0) != kFormatVersion) {
    throw ServiceError(ServiceError::Kind::kInvalid, "model '" + id + "': unsupported format_version");
  }
  return j.at("model");
}

namespace {

template <typename Model>
std::shared_ptr<const Model> Cached(std::mutex& mu, std::map<std::string, std::shared_ptr<const void>, std::less<>>& cache,
                                    const std::string& id, auto load) {
  std::lock_guard lock(mu);
  auto& slot = cache[id];
  if (!slot) slot = std::make_shared<const Model>(load());
  return std::static_pointer_cast<const Model>(slot);
}

}  // namespace

std::shared_ptr<const LRModel> ProjectStore::lr(const std::string& id) const {
  const json j = ReadModel(id, ModelKind::kLr);
  return Cached<LRModel>(cache_mu_, model_cache_, id, [&] { return LRModel::FromJson(j); });
}

std::shared_ptr<const LSTMModel> ProjectStore::lstm(const std::string& id) const {
  const json j = ReadModel(id, ModelKind::kLstm);
  return Cached<LSTMModel>(cache_mu_, model_cache_, id, [&] { return LSTMModel::FromJson(j); });
}

std::shared_ptr<const TfIdfModel> ProjectStore::tfidf(const std::string& id) const {
  const json j = ReadModel(id, ModelKind::kTfIdf);
  return Cached<TfIdfModel>(cache_mu_, model_cache_, id, [&] { return TfIdfModel::FromJson(j); });
}

std::optional<std::string> ProjectStore::latest_model(ModelKind kind,
                                                      const std::optional<std::string>& corpus_id) const {
  std::shared_lock lock(mu_);
  for (auto it = models_.entries.rbegin(); it != models_.entries.rend(); ++it) {
    if (it->kind != kind) continue;
    if (corpus_id && it->corpus_id != corpus_id) continue;
    return it->id;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- ratings

StoredRating ProjectStore::AppendRating(const RatingRecord& record) {
  record.Validate();
  CheckCsvField(record.rater, "rater");
  CheckCsvField(record.query_id, "query id");
  CheckCsvField(record.ref.doc_id, "doc id");
  query_entry(record.query_id);
  // Corpora are immutable, so the sentence can be checked before locking.
  bool found = false;
  for (const CorpusEntry& c : corpora()) {
    const Document* doc = corpus(c.id)->find_document(record.ref.doc_id);
    if (doc != nullptr && record.ref.position >= 0 &&
        static_cast<std::size_t>(record.ref.position) < doc->sentences.size()) {
      found = true;
      break;
    }
  }
  if (!found) throw ServiceError(ServiceError::Kind::kNotFound, "unknown sentence " + record.ref.key());

  std::unique_lock lock(mu_);
  StoredRating stored{record, UtcTimestamp()};
  const fs::path path = root_ / kRatingsFile;
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (fresh) out << kRatingsHeader << '\n';
  out << record.rater << ',' << record.query_id << ',' << record.ref.doc_id << ',' << record.ref.position << ','
      << record.score << ',' << stored.timestamp << '\n';
  out.flush();
  if (!out) throw ServiceError(ServiceError::Kind::kInvalid, "cannot append to ratings.csv");
  return stored;
}

std::vector<StoredRating> ProjectStore::ratings() const {
  std::shared_lock lock(mu_);
  std::ifstream in(root_ / kRatingsFile);
  std::vector<StoredRating> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (std::exchange(first, false) && line == kRatingsHeader) continue;
    if (line.empty()) continue;
    std::istringstream one(line);
    std::vector<RatingRecord> parsed = LoadRatingsCsv(one);
    const std::size_t comma = line.rfind(',');
    out.push_back({std::move(parsed.at(0)), line.substr(comma + 1)});
  }
  return out;
}

}  // namespace propmatch::service
