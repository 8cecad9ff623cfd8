#include "propmatch/service/http_service.hpp"

#include <algorithm>
#include <memory>

#include <httplib.h>

#include "propmatch/errors.hpp"

namespace propmatch::service {

using json = nlohmann::json;

std::string_view JobStatusName(Job::Status status) {
  switch (status) {
    case Job::Status::kQueued: return "queued";
    case Job::Status::kRunning: return "running";
    case Job::Status::kSucceeded: return "succeeded";
    case Job::Status::kFailed: return "failed";
  }
  return "queued";
}

json ToJson(const Job& job) {
  json j{{"id", job.id},           {"status", JobStatusName(job.status)}, {"kind", job.kind},
         {"model_id", nullptr},    {"error", nullptr},                    {"created", job.created},
         {"finished", job.finished}};
  if (job.model_id) j["model_id"] = *job.model_id;
  if (job.error) j["error"] = *job.error;
  return j;
}

namespace {

void Reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void ReplyError(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  Reply(res, status, json{{"error", kind}, {"message", message}});
}

int StatusFor(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kEmptyCorpus:
    case ErrorKind::kInsufficientData:
    case ErrorKind::kDimensionMismatch:
    case ErrorKind::kDegenerateLabels:
      return 422;
    default:
      return 400;
  }
}

std::string_view ServiceKindName(ServiceError::Kind kind) {
  switch (kind) {
    case ServiceError::Kind::kInvalid: return "BadRequest";
    case ServiceError::Kind::kNotFound: return "NotFound";
    case ServiceError::Kind::kConflict: return "Conflict";
    case ServiceError::Kind::kUnavailable: return "Unavailable";
    case ServiceError::Kind::kUpstream: return "ParserUnavailable";
  }
  return "Error";
}

// Runs a handler, translating exceptions into status codes.
template <typename Handler>
httplib::Server::Handler Guard(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const ServiceError& e) {
      ReplyError(res, HttpStatus(e.kind()), ServiceKindName(e.kind()), e.what());
    } catch (const Error& e) {
      ReplyError(res, StatusFor(e), ErrorKindName(e.kind()), e.what());
    } catch (const json::exception& e) {
      ReplyError(res, 400, "BadRequest", e.what());
    } catch (const std::exception& e) {
      ReplyError(res, 500, "Internal", e.what());
    }
  };
}

json Body(const httplib::Request& req) {
  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ServiceError(ServiceError::Kind::kInvalid, std::string("body is not JSON: ") + e.what());
  }
  if (!body.is_object()) throw ServiceError(ServiceError::Kind::kInvalid, "body must be a JSON object");
  return body;
}

std::optional<std::string> OptionalString(const json& body, const char* key) {
  if (!body.contains(key) || body[key].is_null()) return std::nullopt;
  if (!body[key].is_string()) throw ServiceError(ServiceError::Kind::kInvalid, std::string(key) + " must be a string");
  return body[key].get<std::string>();
}

std::string RequiredString(const json& body, const char* key) {
  auto v = OptionalString(body, key);
  if (!v) throw ServiceError(ServiceError::Kind::kInvalid, std::string("missing ") + key);
  return *v;
}

std::optional<std::string> Param(const httplib::Request& req, const char* key) {
  if (!req.has_param(key)) return std::nullopt;
  return req.get_param_value(key);
}

std::optional<std::size_t> SizeParam(const httplib::Request& req, const char* key) {
  const auto v = Param(req, key);
  if (!v) return std::nullopt;
  const std::vector<std::size_t> one = ParseSizeList(*v);
  if (one.size() != 1) throw ServiceError(ServiceError::Kind::kInvalid, std::string(key) + " must be one integer");
  return one.front();
}

MatchRequest MatchParams(const httplib::Request& req) {
  MatchRequest r;
  try {
    if (auto f = Param(req, "filter")) r.filter = ParseFilterKind(*f);
    if (auto rr = Param(req, "rerank")) r.reranker = ParseRerankerKind(*rr);
  } catch (const BadInput& e) {
    throw ServiceError(ServiceError::Kind::kInvalid, e.what());
  }
  r.k = SizeParam(req, "k");
  r.n = SizeParam(req, "n");
  r.corpus_id = Param(req, "corpus");
  r.embeddings_id = Param(req, "embeddings");
  r.tfidf_model = Param(req, "tfidf");
  r.lr_model = Param(req, "lr");
  r.lstm_model = Param(req, "lstm");
  return r;
}

// Documents come either as an array of objects or as a JSONL string.
std::string DocumentsJsonl(const json& body) {
  if (body.contains("documents_jsonl")) return RequiredString(body, "documents_jsonl");
  if (!body.contains("documents") || !body["documents"].is_array()) {
    throw ServiceError(ServiceError::Kind::kInvalid, "need 'documents' (array) or 'documents_jsonl' (string)");
  }
  std::string out;
  for (const json& doc : body["documents"]) out += doc.dump() + "\n";
  return out;
}

TrainConfig TrainConfigFromJson(const json& j) {
  TrainConfig c;
  if (!j.is_object()) throw ServiceError(ServiceError::Kind::kInvalid, "config must be an object");
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.epsilon = j.value("epsilon", c.epsilon);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.l2 = j.value("l2", c.l2);
  c.seed = j.value("seed", c.seed);
  c.balance_classes = j.value("balance_classes", c.balance_classes);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.init_range = j.value("init_range", c.init_range);
  if (c.epochs < 1 || c.batch_size < 1 || c.hidden_dim < 1 || !(c.learning_rate > 0)) {
    throw ServiceError(ServiceError::Kind::kInvalid, "epochs, batch_size, hidden_dim and learning_rate must be positive");
  }
  return c;
}

json List(const char* key, const auto& entries) {
  json items = json::array();
  for (const auto& e : entries) items.push_back(ToJson(e));
  return json{{key, std::move(items)}};
}

}  // namespace

HttpService::HttpService(Engine& engine) : engine_(engine), server_(std::make_unique<httplib::Server>()) {
  server_->set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  Routes();
  worker_ = std::thread([this] { Worker(); });
}

HttpService::~HttpService() {
  Stop();
  {
    std::lock_guard lock(jobs_mu_);
    stopping_ = true;
  }
  jobs_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

bool HttpService::Listen(const std::string& host, int port) { return server_->listen(host, port); }
int HttpService::BindToAnyPort(const std::string& host) { return server_->bind_to_any_port(host); }
bool HttpService::ListenAfterBind() { return server_->listen_after_bind(); }
void HttpService::WaitUntilReady() const { server_->wait_until_ready(); }
void HttpService::Stop() { server_->stop(); }

std::optional<Job> HttpService::job(const std::string& id) const {
  std::lock_guard lock(jobs_mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

std::string HttpService::EnqueueTraining(TrainRequest request) {
  std::lock_guard lock(jobs_mu_);
  Job job;
  job.id = "j" + std::to_string(jobs_.size() + 1);
  job.kind = std::string(ModelKindName(request.kind));
  job.created = UtcTimestamp();
  jobs_[job.id] = job;
  queue_.emplace_back(job.id, std::move(request));
  jobs_cv_.notify_one();
  return job.id;
}

void HttpService::Worker() {
  for (;;) {
    std::pair<std::string, TrainRequest> next;
    {
      std::unique_lock lock(jobs_mu_);
      jobs_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      next = std::move(queue_.front());
      queue_.pop_front();
      jobs_[next.first].status = Job::Status::kRunning;
    }
    std::optional<std::string> model_id, error;
    try {
      model_id = engine_.Train(next.second).id;
    } catch (const std::exception& e) {
      error = e.what();
    }
    std::lock_guard lock(jobs_mu_);
    Job& job = jobs_[next.first];
    job.status = error ? Job::Status::kFailed : Job::Status::kSucceeded;
    job.model_id = model_id;
    job.error = error;
    job.finished = UtcTimestamp();
  }
}

void HttpService::Routes() {
  httplib::Server& s = *server_;
  ProjectStore& store = engine_.store();

  s.Get("/health", Guard([](const httplib::Request&, httplib::Response& res) {
          Reply(res, 200, json{{"status", "ok"}});
        }));

  s.Post("/corpora", Guard([this](const httplib::Request& req, httplib::Response& res) {
           const json body = Body(req);
           const CorpusEntry e = engine_.Ingest(OptionalString(body, "id"), DocumentsJsonl(body),
                                                OptionalString(body, "conllu"), body.value("parse", true));
           Reply(res, 201, ToJson(e));
         }));
  s.Get("/corpora", Guard([&store](const httplib::Request&, httplib::Response& res) {
          Reply(res, 200, List("corpora", store.corpora()));
        }));
  s.Get(R"(/corpora/([^/]+))", Guard([&store](const httplib::Request& req, httplib::Response& res) {
          Reply(res, 200, ToJson(store.corpus_entry(req.matches[1])));
        }));

  s.Post("/queries", Guard([this](const httplib::Request& req, httplib::Response& res) {
           const json body = Body(req);
           const QueryEntry e = engine_.AddQuery(OptionalString(body, "id"), RequiredString(body, "text"),
                                                 OptionalString(body, "corpus_id"), OptionalString(body, "conllu"));
           Reply(res, 201, ToJson(e));
         }));
  s.Get("/queries", Guard([&store](const httplib::Request&, httplib::Response& res) {
          Reply(res, 200, List("queries", store.queries()));
        }));
  s.Get(R"(/queries/([^/]+))", Guard([&store](const httplib::Request& req, httplib::Response& res) {
          Reply(res, 200, ToJson(store.query_entry(req.matches[1])));
        }));
  s.Get(R"(/queries/([^/]+)/matches)", Guard([this](const httplib::Request& req, httplib::Response& res) {
          const std::string id = req.matches[1];
          const MatchRequest params = MatchParams(req);
          Reply(res, 200, MatchRunToJson(engine_.MatchStored(id, params)));
        }));
  s.Get(R"(/queries/([^/]+)/measurement)", Guard([this](const httplib::Request& req, httplib::Response& res) {
          const std::string id = req.matches[1];
          MatchRequest params = MatchParams(req);
          const std::optional<std::size_t> n = params.n;
          const MatchRun run = engine_.MatchForMeasurement(id, n, params);
          Reply(res, 200, MeasurementRunToJson(run, engine_.Measure(run)));
        }));

  s.Post("/ratings", Guard([&store](const httplib::Request& req, httplib::Response& res) {
           const json body = Body(req);
           RatingRecord r;
           r.rater = RequiredString(body, "rater");
           r.query_id = RequiredString(body, "query_id");
           if (auto key = OptionalString(body, "sentence_id")) {
             const std::size_t colon = key->rfind(':');
             if (colon == std::string::npos) throw ServiceError(ServiceError::Kind::kInvalid, "sentence_id is docid:position");
             r.ref.doc_id = key->substr(0, colon);
             r.ref.position = std::stoi(key->substr(colon + 1));
           } else {
             r.ref.doc_id = RequiredString(body, "doc_id");
             r.ref.position = body.at("position").get<int>();
           }
           r.score = body.at("score").get<int>();
           Reply(res, 201, ToJson(store.AppendRating(r)));
         }));
  s.Get("/ratings", Guard([&store](const httplib::Request&, httplib::Response& res) {
          Reply(res, 200, List("ratings", store.ratings()));
        }));
  s.Get("/ratings/alpha", Guard([this](const httplib::Request& req, httplib::Response& res) {
          Reply(res, 200, engine_.Alpha(Param(req, "query_id")));
        }));

  s.Get("/models", Guard([&store](const httplib::Request&, httplib::Response& res) {
          Reply(res, 200, List("models", store.models()));
        }));
  s.Post("/models/train", Guard([this](const httplib::Request& req, httplib::Response& res) {
           const json body = Body(req);
           TrainRequest t;
           t.kind = ParseModelKind(RequiredString(body, "kind"));
           if (t.kind == ModelKind::kTfIdf) throw ServiceError(ServiceError::Kind::kInvalid, "train lr or lstm");
           t.id = OptionalString(body, "id");
           if (t.id) {
             const auto models = engine_.store().models();
             if (std::any_of(models.begin(), models.end(), [&](const ModelEntry& m) { return m.id == *t.id; })) {
               throw ServiceError(ServiceError::Kind::kConflict, "id '" + *t.id + "' is already registered");
             }
           }
           t.records_jsonl = RequiredString(body, "records");
           t.parses_conllu = RequiredString(body, "parses");
           t.embeddings_id = OptionalString(body, "embeddings_id");
           if (body.contains("config")) t.config = TrainConfigFromJson(body["config"]);
           t.beam_width = body.value("beam_width", engine_.defaults().beam_width);
           const std::string job = EnqueueTraining(std::move(t));
           Reply(res, 202, json{{"job_id", job}, {"status", "queued"}});
         }));
  s.Get(R"(/jobs/([^/]+))", Guard([this](const httplib::Request& req, httplib::Response& res) {
          const auto j = job(req.matches[1]);
          if (!j) throw ServiceError(ServiceError::Kind::kNotFound, "unknown job '" + std::string(req.matches[1]) + "'");
          Reply(res, 200, ToJson(*j));
        }));

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      ReplyError(res, res.status, res.status == 404 ? "NotFound" : "Error", "no such endpoint");
    }
  });
}

}  // namespace propmatch::service
