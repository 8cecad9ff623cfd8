#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "propmatch/service/engine.hpp"

namespace httplib {
class Server;
}

namespace propmatch::service {

// A background training run.
struct Job {
  enum class Status { kQueued, kRunning, kSucceeded, kFailed };

  std::string id;
  Status status = Status::kQueued;
  std::string kind;
  std::optional<std::string> model_id;
  std::optional<std::string> error;
  std::string created;
  std::string finished;
};

std::string_view JobStatusName(Job::Status status);
nlohmann::json ToJson(const Job& job);

// JSON-over-HTTP front end of an Engine.
//
//   POST /corpora                 ingest a corpus             201
//   GET  /corpora                 list corpora
//   GET  /corpora/{id}
//   POST /queries                 register a query            201
//   GET  /queries
//   GET  /queries/{id}
//   GET  /queries/{id}/matches    ?k&n&filter&rerank&corpus&embeddings&tfidf&lr&lstm
//   GET  /queries/{id}/measurement ?n and the same selectors
//   POST /ratings                 append one rating           201
//   GET  /ratings
//   GET  /ratings/alpha           ?query_id
//   GET  /models
//   POST /models/train            queue a training job        202
//   GET  /jobs/{id}
//
// Errors answer {"error": kind, "message": text} with 400 (malformed
// request), 404 (unknown id), 409 (duplicate id), 422 (missing resource,
// unparsed input under strict mode, too little data) or 502 (parser hook).
// Training jobs run one at a time on a worker thread.
class HttpService {
 public:
  explicit HttpService(Engine& engine);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Blocks until Stop().
  bool Listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it; call ListenAfterBind() to serve.
  int BindToAnyPort(const std::string& host);
  bool ListenAfterBind();
  void WaitUntilReady() const;
  void Stop();

  std::optional<Job> job(const std::string& id) const;

 private:
  void Routes();
  std::string EnqueueTraining(TrainRequest request);
  void Worker();

  Engine& engine_;
  std::unique_ptr<httplib::Server> server_;

  mutable std::mutex jobs_mu_;
  std::condition_variable jobs_cv_;
  std::map<std::string, Job> jobs_;
  std::deque<std::pair<std::string, TrainRequest>> queue_;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace propmatch::service
