#include "propmatch/service/engine.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "propmatch/errors.hpp"

namespace propmatch::service {

using json = nlohmann::json;

std::vector<std::size_t> ParseSizeList(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || v < 1) {
      throw ServiceError(ServiceError::Kind::kInvalid, "expected positive integers, got '" + item + "'");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ServiceError(ServiceError::Kind::kInvalid, "empty list");
  return out;
}

Engine::Engine(ProjectStore& store, Defaults defaults, ParserHook hook)
    : store_(store), defaults_(std::move(defaults)), hook_(std::move(hook)) {}

CorpusEntry Engine::Ingest(const std::optional<std::string>& id, const std::string& documents_jsonl,
                           std::optional<std::string> parses_conllu, bool use_hook) {
  if (!parses_conllu && use_hook && hook_.enabled()) parses_conllu = ParseDocuments(hook_, documents_jsonl);
  return store_.AddCorpus(id, documents_jsonl, parses_conllu);
}

QueryEntry Engine::AddQuery(const std::optional<std::string>& id, const std::string& text,
                            const std::optional<std::string>& corpus_id, std::optional<std::string> conllu) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ServiceError(ServiceError::Kind::kInvalid, "query text is empty");
  }
  if (!conllu && hook_.enabled()) conllu = ParseQuery(hook_, text);
  return store_.AddQuery(id, text, corpus_id, conllu);
}

PropositionQuery Engine::TransientQuery(const std::string& text) const {
  if (!hook_.enabled()) return PropositionQuery::FromText("query", text);
  std::vector<ParsedSentence> parsed = ParseConllu(ParseQuery(hook_, text));
  return PropositionQuery::FromParse("query", text, std::move(parsed.front()));
}

std::shared_ptr<const EmbeddingTable> Engine::ResolveEmbeddings(const std::optional<std::string>& id,
                                                                json* used) const {
  if (id) {
    (*used)["embeddings"] = *id;
    return store_.embedding_table(*id);
  }
  if (defaults_.embeddings_path) {
    std::lock_guard lock(cache_mu_);
    if (!config_table_) config_table_ = std::make_shared<const EmbeddingTable>(LoadEmbeddingsFile(*defaults_.embeddings_path));
    (*used)["embeddings"] = *defaults_.embeddings_path;
    return config_table_;
  }
  if (auto latest = store_.latest_embeddings()) {
    (*used)["embeddings"] = *latest;
    return store_.embedding_table(*latest);
  }
  return nullptr;
}

std::shared_ptr<const TfIdfModel> Engine::ResolveTfIdf(const std::optional<std::string>& model_id,
                                                       const std::string& corpus_id, json* used) const {
  std::optional<std::string> id = model_id ? model_id : store_.latest_model(ModelKind::kTfIdf, corpus_id);
  if (id) {
    (*used)["tfidf"] = *id;
    return store_.tfidf(*id);
  }
  // No stored fit: fit on the corpus itself, which is what fit-tfidf would store.
  (*used)["tfidf"] = "fitted:" + corpus_id;
  std::lock_guard lock(cache_mu_);
  auto& slot = fitted_tfidf_[corpus_id];
  if (!slot) slot = std::make_shared<const TfIdfModel>(propmatch::FitTfIdf(*store_.corpus(corpus_id)));
  return slot;
}

MatchRun Engine::Match(const PropositionQuery& query, const std::optional<std::string>& query_corpus,
                       const MatchRequest& request) const {
  MatchRun run;
  run.query_id = query.id;
  run.config.filter = request.filter.value_or(defaults_.filter);
  run.config.reranker = request.reranker.value_or(defaults_.reranker);
  run.config.k = request.k.value_or(defaults_.k);
  run.config.n = request.n.value_or(defaults_.n);
  run.config.search.beam_width = defaults_.beam_width;
  try {
    run.config.Validate();
  } catch (const BadInput& e) {
    throw ServiceError(ServiceError::Kind::kInvalid, e.what());
  }

  std::optional<std::string> corpus_id = request.corpus_id ? request.corpus_id : query_corpus;
  if (!corpus_id) corpus_id = store_.latest_corpus();
  if (!corpus_id) throw ServiceError(ServiceError::Kind::kUnavailable, "no corpus registered");
  run.corpus_id = *corpus_id;
  run.corpus = store_.corpus(run.corpus_id);

  MatchResources resources;
  std::shared_ptr<const LSTMModel> lstm;
  std::shared_ptr<const LRModel> lr;
  std::optional<std::string> table_id = request.embeddings_id;
  if (run.config.reranker == RerankerKind::kLstm) {
    const std::optional<std::string> id = request.lstm_model ? request.lstm_model : store_.latest_model(ModelKind::kLstm);
    if (!id) throw ServiceError(ServiceError::Kind::kUnavailable, "lstm reranker requested but no LSTM model is stored");
    lstm = store_.lstm(*id);
    run.resources["lstm"] = *id;
    if (!table_id) table_id = store_.model_entry(*id).embeddings_id;
  } else if (run.config.reranker == RerankerKind::kLr) {
    const std::optional<std::string> id = request.lr_model ? request.lr_model : store_.latest_model(ModelKind::kLr);
    if (!id) throw ServiceError(ServiceError::Kind::kUnavailable, "lr reranker requested but no LR model is stored");
    lr = store_.lr(*id);
    run.resources["lr"] = *id;
  }
  std::shared_ptr<const EmbeddingTable> table;
  if (run.config.filter == FilterKind::kAveraging || run.config.reranker == RerankerKind::kLstm) {
    table = ResolveEmbeddings(table_id, &run.resources);
    if (!table) throw ServiceError(ServiceError::Kind::kUnavailable, "no embeddings registered or configured");
  }
  std::shared_ptr<const TfIdfModel> tfidf;
  if (run.config.filter == FilterKind::kTfIdf) tfidf = ResolveTfIdf(request.tfidf_model, run.corpus_id, &run.resources);
  resources.embeddings = table.get();
  resources.tfidf = tfidf.get();
  resources.lr = lr.get();
  resources.lstm = lstm.get();

  if (defaults_.strict && run.config.reranker != RerankerKind::kNone && !query.tree) {
    throw ServiceError(ServiceError::Kind::kUnavailable, "reranking needs a parsed query (strict mode)");
  }
  run.matches = propmatch::Match(query, *run.corpus, run.config, resources);
  if (defaults_.strict) {
    for (const RankedMatch& m : run.matches) {
      if (m.flagged_no_parse) {
        throw ServiceError(ServiceError::Kind::kUnavailable,
                           "sentence " + m.ref.key() + " has no parse (strict mode)");
      }
    }
  }
  return run;
}

MatchRun Engine::MatchStored(const std::string& query_id, const MatchRequest& request) const {
  const QueryEntry entry = store_.query_entry(query_id);
  return Match(store_.query(query_id), entry.corpus_id, request);
}

MeasurementSeries Engine::Measure(const MatchRun& run) const { return propmatch::Measure(run.matches, *run.corpus); }

MatchRun Engine::MatchForMeasurement(const std::string& query_id, std::optional<std::size_t> n,
                                     MatchRequest request) const {
  request.n = n.value_or(defaults_.measure_n);
  if (!request.k) request.k = std::max(defaults_.k, *request.n);
  return MatchStored(query_id, request);
}

ModelEntry Engine::Train(const TrainRequest& request) const {
  std::istringstream records(request.records_jsonl);
  std::istringstream parses(request.parses_conllu);
  const std::vector<LabeledPair> pairs = RecastSnli(records, parses);
  if (pairs.empty()) throw ServiceError(ServiceError::Kind::kInvalid, "no labelled pairs in the training records");
  SearchConfig search;
  search.beam_width = request.beam_width;
  TrainingReport report;
  std::size_t positives = 0;
  for (const LabeledPair& p : pairs) positives += p.label == 1;
  json info{{"pairs", pairs.size()},
            {"positives", positives},
            {"epochs", request.config.epochs},
            {"learning_rate", request.config.learning_rate},
            {"batch_size", request.config.batch_size},
            {"seed", request.config.seed},
            {"beam_width", request.beam_width}};
  auto summarize = [&] {
    info["updates"] = report.updates;
    info["epoch_loss"] = report.epoch_loss;
    info["degenerate_labels"] = report.degenerate_labels;
    info["warnings"] = report.warnings;
  };
  if (request.kind == ModelKind::kLr) {
    const LRModel model = TrainLr(pairs, request.config, search, &report);
    summarize();
    return store_.AddLr(request.id, model, std::move(info));
  }
  if (request.kind == ModelKind::kLstm) {
    json used = json::object();
    const auto table = ResolveEmbeddings(request.embeddings_id, &used);
    if (!table) throw ServiceError(ServiceError::Kind::kUnavailable, "LSTM training needs embeddings");
    const LSTMModel model = TrainLstm(pairs, *table, request.config, search, &report);
    summarize();
    info["hidden_dim"] = request.config.hidden_dim;
    std::optional<std::string> table_id;
    if (request.embeddings_id || !defaults_.embeddings_path) table_id = used["embeddings"].get<std::string>();
    return store_.AddLstm(request.id, model, table_id, std::move(info));
  }
  throw ServiceError(ServiceError::Kind::kInvalid, "train supports lr and lstm");
}

ModelEntry Engine::FitTfIdf(const std::optional<std::string>& id, const std::string& corpus_id) const {
  return store_.AddTfIdf(id, propmatch::FitTfIdf(*store_.corpus(corpus_id)), corpus_id);
}

std::vector<std::pair<std::size_t, double>> Engine::EvalRecall(const std::vector<RecallInstance>& instances,
                                                               FilterKind filter,
                                                               const std::optional<std::string>& embeddings_id,
                                                               const std::vector<std::size_t>& ns) const {
  json used;
  std::shared_ptr<const EmbeddingTable> table;
  TfIdfModel tfidf;
  std::optional<FastScorer> scorer;
  if (filter == FilterKind::kAveraging) {
    table = ResolveEmbeddings(embeddings_id, &used);
    if (!table) throw ServiceError(ServiceError::Kind::kUnavailable, "no embeddings registered or configured");
    scorer = FastScorer::Averaging(*table);
  } else {
    // Fitted over every sentence of the fixture.
    std::vector<std::vector<std::string>> terms;
    for (const RecallInstance& inst : instances) {
      for (const Sentence& s : inst.sentences) terms.push_back(TermsOf(s.tokens));
    }
    tfidf = TfIdfModel::Fit(terms);
    scorer = FastScorer::TfIdf(tfidf);
  }
  const SentenceScorer score = FastSentenceScorer(*scorer);
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t n : ns) out.emplace_back(n, RecallAtN(instances, score, n));
  return out;
}

std::vector<std::pair<std::size_t, PrecisionResult>> Engine::EvalPrecision(
    const std::string& corpus_id, const std::vector<FrameQuery>& queries,
    const std::unordered_map<std::string, std::set<std::string>>& annotations, const MatchRequest& request,
    const std::vector<std::size_t>& ns) const {
  const auto corpus = store_.corpus(corpus_id);
  json used;
  std::shared_ptr<const EmbeddingTable> table;
  std::shared_ptr<const TfIdfModel> tfidf;
  const FilterKind filter = request.filter.value_or(defaults_.filter);
  std::optional<FastScorer> scorer;
  if (filter == FilterKind::kAveraging) {
    table = ResolveEmbeddings(request.embeddings_id, &used);
    if (!table) throw ServiceError(ServiceError::Kind::kUnavailable, "no embeddings registered or configured");
    scorer = FastScorer::Averaging(*table);
  } else {
    tfidf = ResolveTfIdf(request.tfidf_model, corpus_id, &used);
    scorer = FastScorer::TfIdf(*tfidf);
  }
  const SentenceScorer score = FastSentenceScorer(*scorer);
  std::vector<std::pair<std::size_t, PrecisionResult>> out;
  for (std::size_t n : ns) out.emplace_back(n, PrecisionAtN(queries, *corpus, annotations, score, n));
  return out;
}

json Engine::Alpha(const std::optional<std::string>& query_id) const {
  std::vector<RatingRecord> records;
  for (const StoredRating& r : store_.ratings()) {
    if (!query_id || r.record.query_id == *query_id) records.push_back(r.record);
  }
  json out{{"alpha", KrippendorffAlphaInterval(records)}, {"ratings", records.size()}};
  if (query_id) out["query_id"] = *query_id;
  return out;
}

// ---------------------------------------------------------------- views

namespace {

const Sentence* Neighbour(const Document& doc, int position) {
  if (position < 0 || static_cast<std::size_t>(position) >= doc.sentences.size()) return nullptr;
  return &doc.sentences[static_cast<std::size_t>(position)];
}

}  // namespace

json MatchRunToJson(const MatchRun& run) {
  json matches = json::array();
  for (const RankedMatch& m : run.matches) {
    const Document& doc = run.corpus->document(m.ref.doc_id);
    const Sentence& s = run.corpus->sentence(m.ref);
    const Sentence* before = Neighbour(doc, m.ref.position - 1);
    const Sentence* after = Neighbour(doc, m.ref.position + 1);
    matches.push_back({{"rank", m.final_rank},
                       {"sentence_id", m.ref.key()},
                       {"doc_id", m.ref.doc_id},
                       {"position", m.ref.position},
                       {"date", doc.date ? json(FormatIsoDate(*doc.date)) : json(nullptr)},
                       {"source", doc.source ? json(*doc.source) : json(nullptr)},
                       {"text", s.text},
                       {"context_before", before ? json(before->text) : json(nullptr)},
                       {"context_after", after ? json(after->text) : json(nullptr)},
                       {"fast_score", m.fast_score},
                       {"rerank_score", m.rerank_score ? json(*m.rerank_score) : json(nullptr)},
                       {"flagged_no_parse", m.flagged_no_parse}});
  }
  return {{"query_id", run.query_id},
          {"corpus_id", run.corpus_id},
          {"config",
           {{"filter", FilterName(run.config.filter)},
            {"rerank", RerankerName(run.config.reranker)},
            {"k", run.config.k},
            {"n", run.config.n}}},
          {"resources", run.resources},
          {"matches", std::move(matches)}};
}

std::string MatchRunToTable(const MatchRun& run) {
  std::ostringstream out;
  out << std::left << std::setw(6) << "rank" << std::setw(10) << "fast" << std::setw(10) << "rerank"
      << std::setw(16) << "doc" << std::setw(12) << "date"
      << "sentence\n";
  out << std::fixed << std::setprecision(4);
  for (const RankedMatch& m : run.matches) {
    const Document& doc = run.corpus->document(m.ref.doc_id);
    std::ostringstream rerank;
    rerank << std::fixed << std::setprecision(4);
    if (m.rerank_score) {
      rerank << *m.rerank_score << (m.flagged_no_parse ? "*" : "");
    } else {
      rerank << "-";
    }
    out << std::left << std::setw(6) << m.final_rank << std::setw(10) << m.fast_score << std::setw(10)
        << rerank.str() << std::setw(16) << m.ref.key() << std::setw(12)
        << (doc.date ? FormatIsoDate(*doc.date) : std::string("-")) << run.corpus->sentence(m.ref).text << '\n';
    if (const Sentence* before = Neighbour(doc, m.ref.position - 1)) {
      out << std::string(54, ' ') << "before: " << before->text << '\n';
    }
    if (const Sentence* after = Neighbour(doc, m.ref.position + 1)) {
      out << std::string(54, ' ') << "after:  " << after->text << '\n';
    }
  }
  if (std::any_of(run.matches.begin(), run.matches.end(), [](const RankedMatch& m) { return m.flagged_no_parse; })) {
    out << "* no parse; rerank score repeats the fast score\n";
  }
  return out.str();
}

json MeasurementRunToJson(const MatchRun& run, const MeasurementSeries& series) {
  json j = MeasurementToJson(series);
  j["query_id"] = run.query_id;
  j["corpus_id"] = run.corpus_id;
  j["n"] = run.config.n;
  j["matches"] = run.matches.size();
  return j;
}

}  // namespace propmatch::service
