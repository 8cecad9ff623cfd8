#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "propmatch/service/cli.hpp"
#include "propmatch/service/engine.hpp"
#include "propmatch/service/http_service.hpp"

namespace propmatch::service {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

// Three one-sentence documents in 2011 Q1, Q1 and Q3.
constexpr const char* kDocs =
    R"({"id":"d1","date":"2011-02-01","source":"wire","sentences":["The bank raised interest rates"]})"
    "\n"
    R"({"id":"d2","date":"2011-03-15","source":"wire","sentences":["Interest rates were raised by the bank"]})"
    "\n"
    R"({"id":"d3","date":"2011-07-01","source":"daily","sentences":["The bank cut interest rates"]})"
    "\n";

// Emits a flat CoNLL-U tree per input line: every token hangs off the first.
constexpr const char* kParserScript = R"(#!/bin/sh
awk 'NF == 0 { next }
{
  for (i = 1; i <= NF; i++) {
    head = (i == 1) ? 0 : 1; rel = (i == 1) ? "root" : "dep"
    printf "%d\t%s\t%s\tNOUN\tNN\t_\t%d\t%s\t_\t_\n", i, $i, tolower($i), head, rel
  }
  print ""
}'
)";

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("propmatch-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path Write(const std::string& name, const std::string& contents) const {
    const fs::path p = path_ / name;
    std::ofstream(p, std::ios::binary) << contents;
    return p;
  }

 private:
  fs::path path_;
};

struct CliResult {
  int code;
  std::string out, err;
};

CliResult Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "propmatch");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

Defaults TfIdfDefaults() {
  Defaults d;
  d.filter = FilterKind::kTfIdf;
  return d;
}

// ------------------------------------------------------------------ store

TEST(Store, RankingsSurviveReopen) {
  TempDir dir;
  std::string first;
  {
    ProjectStore store(dir.path() / "store");
    Engine engine(store, TfIdfDefaults(), {});
    engine.Ingest("news", kDocs, std::nullopt, false);
    engine.AddQuery("q1", "The bank raised rates", "news", std::nullopt);
    first = MatchRunToJson(engine.MatchStored("q1", {})).dump();
  }
  ProjectStore reopened(dir.path() / "store");
  Engine engine(reopened, TfIdfDefaults(), {});
  ASSERT_EQ(reopened.corpora().size(), 1u);
  EXPECT_EQ(reopened.corpus_entry("news").sentences, 3u);
  EXPECT_EQ(MatchRunToJson(engine.MatchStored("q1", {})).dump(), first);
}

TEST(Store, IdsAreValidatedAndUnique) {
  TempDir dir;
  ProjectStore store(dir.path());
  EXPECT_EQ(store.AddCorpus(std::nullopt, kDocs, std::nullopt).id, "c1");
  EXPECT_THROW(store.AddCorpus("c1", kDocs, std::nullopt), ServiceError);
  EXPECT_THROW(store.AddCorpus("bad/id", kDocs, std::nullopt), ServiceError);
  EXPECT_THROW(store.corpus("missing"), ServiceError);
}

TEST(Store, TfIdfModelRoundTrips) {
  TempDir dir;
  std::string before;
  {
    ProjectStore store(dir.path());
    Engine engine(store, TfIdfDefaults(), {});
    engine.Ingest("news", kDocs, std::nullopt, false);
    engine.FitTfIdf("w", "news");
    engine.AddQuery("q1", "bank rates", "news", std::nullopt);
    MatchRequest r;
    r.tfidf_model = "w";
    before = MatchRunToJson(engine.MatchStored("q1", r)).dump();
  }
  ProjectStore store(dir.path());
  Engine engine(store, TfIdfDefaults(), {});
  MatchRequest r;
  r.tfidf_model = "w";
  EXPECT_EQ(MatchRunToJson(engine.MatchStored("q1", r)).dump(), before);
  EXPECT_EQ(store.latest_model(ModelKind::kTfIdf, std::string("news")), "w");
}

TEST(Store, RatingsAreAppendOnly) {
  TempDir dir;
  std::string after_first;
  {
    ProjectStore store(dir.path());
    store.AddCorpus("news", kDocs, std::nullopt);
    store.AddQuery("q1", "bank rates", "news", std::nullopt);
    store.AppendRating({"r1", "q1", {"d1", 0}, 4});
    after_first = Slurp(dir.path() / "ratings.csv");
  }
  ProjectStore store(dir.path());
  store.AppendRating({"r2", "q1", {"d1", 0}, 5});
  const std::string after_second = Slurp(dir.path() / "ratings.csv");
  EXPECT_EQ(after_second.substr(0, after_first.size()), after_first);
  EXPECT_EQ(after_first.rfind("rater,query,doc,position,score,timestamp\n", 0), 0u);
  ASSERT_EQ(store.ratings().size(), 2u);
  EXPECT_EQ(store.ratings()[1].record.rater, "r2");

  EXPECT_THROW(store.AppendRating({"r1", "q1", {"d1", 7}, 3}), ServiceError);   // no such sentence
  EXPECT_THROW(store.AppendRating({"r1", "zz", {"d1", 0}, 3}), ServiceError);   // no such query
  EXPECT_THROW(store.AppendRating({"r1", "q1", {"d1", 0}, 6}), std::exception);  // score out of range
  EXPECT_EQ(store.ratings().size(), 2u);
}

// ------------------------------------------------------------ parser hook

TEST(ParserHookTest, CommandModeParsesCorpusAndQuery) {
  TempDir dir;
  const fs::path script = dir.Write("parse.sh", kParserScript);
  fs::permissions(script, fs::perms::owner_all);
  ProjectStore store(dir.path() / "store");
  Engine engine(store, TfIdfDefaults(), ParserHook(ParserHook::Mode::kCommand, script.string()));
  const CorpusEntry c = engine.Ingest("news", kDocs, std::nullopt, true);
  EXPECT_EQ(c.parsed_sentences, 3u);
  const QueryEntry q = engine.AddQuery("q1", "The bank raised rates", "news", std::nullopt);
  EXPECT_TRUE(q.conllu.has_value());
  EXPECT_TRUE(store.query("q1").tree.has_value());
}

TEST(ParserHookTest, FailingCommandIsUpstreamError) {
  const ParserHook hook(ParserHook::Mode::kCommand, "exit 3");
  const std::vector<std::string> one{"A sentence"};
  try {
    hook.Parse(one);
    FAIL() << "expected an error";
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.kind(), ServiceError::Kind::kUpstream);
    EXPECT_EQ(HttpStatus(e.kind()), 502);
  }
  const ParserHook short_output(ParserHook::Mode::kCommand, "true");
  EXPECT_THROW(short_output.Parse(one), ServiceError);
}

TEST(ParserHookTest, HttpModePostsLines) {
  httplib::Server parser;
  std::string received;
  parser.Post("/parse", [&](const httplib::Request& req, httplib::Response& res) {
    received = req.body;
    std::string out;
    std::istringstream lines(req.body);
    for (std::string line; std::getline(lines, line);) out += "1\t" + line + "\t_\tNOUN\tNN\t_\t0\troot\t_\t_\n\n";
    res.set_content(out, "text/plain");
  });
  const int port = parser.bind_to_any_port("127.0.0.1");
  std::thread serving([&] { parser.listen_after_bind(); });
  parser.wait_until_ready();

  const ParserHook hook(ParserHook::Mode::kHttp, "http://127.0.0.1:" + std::to_string(port) + "/parse");
  const std::vector<std::string> two{"alpha", "beta\ngamma"};
  const auto parsed = hook.Parse(two);
  EXPECT_EQ(received, "alpha\nbeta gamma\n");
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[1].tokens[0].form, "beta gamma");

  const ParserHook missing(ParserHook::Mode::kHttp, "http://127.0.0.1:" + std::to_string(port) + "/nothing");
  EXPECT_THROW(missing.Parse(two), ServiceError);
  parser.stop();
  serving.join();
}

// ------------------------------------------------------------------- http

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    store_ = std::make_unique<ProjectStore>(dir_.path() / "store");
    engine_ = std::make_unique<Engine>(*store_, TfIdfDefaults(), ParserHook{});
    service_ = std::make_unique<HttpService>(*engine_);
    port_ = service_->BindToAnyPort("127.0.0.1");
    ASSERT_GT(port_, 0);
    server_ = std::thread([this] { service_->ListenAfterBind(); });
    service_->WaitUntilReady();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    client_->set_read_timeout(60);
  }
  void TearDown() override {
    service_->Stop();
    server_.join();
  }

  httplib::Result Post(const std::string& path, const json& body) {
    return client_->Post(path, body.dump(), "application/json");
  }
  void Seed() {
    ASSERT_EQ(Post("/corpora", {{"id", "news"}, {"documents_jsonl", kDocs}})->status, 201);
    ASSERT_EQ(Post("/queries", {{"id", "q1"}, {"text", "The bank raised rates"}, {"corpus_id", "news"}})->status, 201);
  }

  TempDir dir_;
  std::unique_ptr<ProjectStore> store_;
  std::unique_ptr<Engine> engine_;
  std::unique_ptr<HttpService> service_;
  std::thread server_;
  int port_ = 0;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(HttpTest, RegistersAndLists) {
  Seed();
  auto res = client_->Get("/corpora");
  ASSERT_EQ(res->status, 200);
  const json corpora = json::parse(res->body);
  ASSERT_EQ(corpora["corpora"].size(), 1u);
  EXPECT_EQ(corpora["corpora"][0]["id"], "news");
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(json::parse(client_->Get("/queries/q1")->body)["text"], "The bank raised rates");

  json docs = json::array();
  docs.push_back({{"id", "x"}, {"date", "2012-01-01"}, {"source", "s"}, {"sentences", {"One more"}}});
  EXPECT_EQ(Post("/corpora", {{"documents", docs}})->status, 201);
}

TEST(HttpHook, ParserFailureIs502) {
  TempDir dir;
  ProjectStore store(dir.path());
  Engine engine(store, TfIdfDefaults(), ParserHook(ParserHook::Mode::kCommand, "exit 1"));
  HttpService service(engine);
  const int port = service.BindToAnyPort("127.0.0.1");
  std::thread serving([&] { service.ListenAfterBind(); });
  service.WaitUntilReady();
  httplib::Client client("127.0.0.1", port);
  const json body{{"documents_jsonl", kDocs}};
  EXPECT_EQ(client.Post("/corpora", body.dump(), "application/json")->status, 502);
  const json unparsed{{"documents_jsonl", kDocs}, {"parse", false}};
  EXPECT_EQ(client.Post("/corpora", unparsed.dump(), "application/json")->status, 201);
  service.Stop();
  serving.join();
}

TEST_F(HttpTest, MatchesAreDeterministic) {
  Seed();
  auto a = client_->Get("/queries/q1/matches?k=3&n=2");
  auto b = client_->Get("/queries/q1/matches?k=3&n=2");
  ASSERT_EQ(a->status, 200);
  EXPECT_EQ(a->body, b->body);
  const json j = json::parse(a->body);
  ASSERT_EQ(j["matches"].size(), 2u);
  EXPECT_EQ(j["matches"][0]["sentence_id"], "d1:0");
  EXPECT_EQ(j["config"]["filter"], "tfidf");
  EXPECT_EQ(j["matches"][0]["rank"], 1);
}

TEST_F(HttpTest, MeasurementCountsQuarters) {
  Seed();
  auto res = client_->Get("/queries/q1/measurement?n=3");
  ASSERT_EQ(res->status, 200);
  const json j = json::parse(res->body);
  EXPECT_EQ(j["counts"], json({2, 0, 1}));
  EXPECT_EQ(j["bin_start"][0], "2011-01-01");
  EXPECT_EQ(j["undated_matches"], 0);
}

TEST_F(HttpTest, AlphaOfPerfectAgreementIsOne) {
  Seed();
  ASSERT_EQ(Post("/corpora", {{"id", "more"},
                              {"documents_jsonl", R"({"id":"d9","date":"2011-01-01","source":"s","sentences":["Other"]})"}})
                ->status,
            201);
  for (const char* rater : {"r1", "r2"}) {
    ASSERT_EQ(Post("/ratings", {{"rater", rater}, {"query_id", "q1"}, {"doc_id", "d1"}, {"position", 0}, {"score", 5}})->status,
              201);
    ASSERT_EQ(Post("/ratings", {{"rater", rater}, {"query_id", "q1"}, {"sentence_id", "d3:0"}, {"score", 1}})->status, 201);
  }
  auto res = client_->Get("/ratings/alpha");
  ASSERT_EQ(res->status, 200);
  EXPECT_DOUBLE_EQ(json::parse(res->body)["alpha"].get<double>(), 1.0);
  EXPECT_EQ(json::parse(client_->Get("/ratings")->body)["ratings"].size(), 4u);
}

TEST_F(HttpTest, StatusCodes) {
  // Too few items for alpha before anything is rated.
  EXPECT_EQ(client_->Get("/ratings/alpha")->status, 422);
  // No corpus at all.
  ASSERT_EQ(Post("/queries", {{"id", "lonely"}, {"text", "bank"}})->status, 201);
  EXPECT_EQ(client_->Get("/queries/lonely/matches")->status, 422);
  Seed();

  EXPECT_EQ(client_->Post("/corpora", "not json", "application/json")->status, 400);
  EXPECT_EQ(Post("/corpora", {{"id", "news"}, {"documents_jsonl", kDocs}})->status, 409);
  EXPECT_EQ(Post("/queries", {{"id", "q1"}, {"text", "again"}})->status, 409);
  EXPECT_EQ(Post("/queries", {{"text", ""}})->status, 400);
  EXPECT_EQ(client_->Get("/queries/q1/matches?k=abc")->status, 400);
  EXPECT_EQ(client_->Get("/queries/q1/matches?k=2&n=3")->status, 400);
  EXPECT_EQ(client_->Get("/queries/q1/matches?filter=fuzzy")->status, 400);
  EXPECT_EQ(client_->Get("/queries/q1/matches?rerank=lr")->status, 422);  // no model trained
  EXPECT_EQ(client_->Get("/queries/nope/matches")->status, 404);
  EXPECT_EQ(client_->Get("/corpora/nope")->status, 404);
  EXPECT_EQ(client_->Get("/jobs/j99")->status, 404);
  EXPECT_EQ(Post("/ratings", {{"rater", "r"}, {"query_id", "q1"}, {"doc_id", "d1"}, {"position", 0}, {"score", 9}})->status, 400);

  auto res = client_->Get("/queries/nope/matches");
  const json err = json::parse(res->body);
  EXPECT_EQ(err["error"], "NotFound");
  EXPECT_TRUE(err["message"].is_string());
}

TEST_F(HttpTest, TrainingJobCompletes) {
  Seed();
  json body{{"kind", "lr"},
            {"id", "lr1"},
            {"records", Slurp(fs::path(PROPMATCH_FIXTURE_DIR) / "snli_small.jsonl")},
            {"parses", Slurp(fs::path(PROPMATCH_FIXTURE_DIR) / "snli_small.conllu")},
            {"config", {{"epochs", 3}, {"batch_size", 4}}}};
  auto res = Post("/models/train", body);
  ASSERT_EQ(res->status, 202);
  const std::string job = json::parse(res->body)["job_id"];
  json status;
  for (int i = 0; i < 600; ++i) {
    status = json::parse(client_->Get("/jobs/" + job)->body);
    if (status["status"] == "succeeded" || status["status"] == "failed") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  ASSERT_EQ(status["status"], "succeeded") << status.dump();
  EXPECT_EQ(status["model_id"], "lr1");
  const json models = json::parse(client_->Get("/models")->body)["models"];
  ASSERT_EQ(models.size(), 1u);
  EXPECT_EQ(models[0]["kind"], "lr");
  EXPECT_EQ(Post("/models/train", body)->status, 409);

  // Without parses for the corpus the rerank keeps fast scores and flags.
  const json j = json::parse(client_->Get("/queries/q1/matches?rerank=lr&n=3")->body);
  EXPECT_TRUE(j["matches"][0]["flagged_no_parse"].get<bool>());
}

TEST_F(HttpTest, CliPrintsTheHttpBody) {
  Seed();
  const std::string body = client_->Get("/queries/q1/matches?k=3&n=3")->body;
  const CliResult r = Cli({"--store", (dir_.path() / "store").string(), "--default-filter", "tfidf", "match",
                           "--query-id", "q1", "-k", "3", "-n", "3", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, body + "\n");
}

// -------------------------------------------------------------------- cli

TEST(Cli, ExitCodes) {
  TempDir dir;
  const std::string store = (dir.path() / "store").string();
  const fs::path docs = dir.Write("docs.jsonl", kDocs);

  EXPECT_EQ(Cli({"--store", store, "ingest", "--docs", docs.string(), "--id", "news"}).code, kExitOk);
  EXPECT_EQ(Cli({"--store", store, "add-query", "bank rates", "--id", "q1"}).code, kExitOk);
  EXPECT_EQ(Cli({"--store", store, "--default-filter", "tfidf", "match", "--query-id", "q1"}).code, kExitOk);
  EXPECT_EQ(Cli({"--help"}).code, kExitOk);

  EXPECT_EQ(Cli({"--store", store}).code, kExitUsage);
  EXPECT_EQ(Cli({"--store", store, "match", "--query-id", "q1", "--no-such-flag"}).code, kExitUsage);
  EXPECT_EQ(Cli({"--store", store, "match", "--query-id", "q1", "-k", "0"}).code, kExitUsage);
  EXPECT_EQ(Cli({"--store", store, "match", "--query-id", "q1", "--filter", "tfidf", "-k", "2", "-n", "3"}).code,
            kExitUsage);
  EXPECT_EQ(Cli({"--store", store, "match", "--query-id", "q1", "--filter", "fuzzy"}).code, kExitUsage);

  EXPECT_EQ(Cli({"--store", store, "ingest", "--docs", (dir.path() / "missing.jsonl").string()}).code, kExitData);
  EXPECT_EQ(Cli({"--store", store, "ingest", "--docs", docs.string(), "--id", "news"}).code, kExitData);
  EXPECT_EQ(Cli({"--store", store, "match", "--query-id", "nope", "--filter", "tfidf"}).code, kExitData);
  const fs::path broken = dir.Write("broken.jsonl", "{not json\n");
  EXPECT_EQ(Cli({"--store", store, "ingest", "--docs", broken.string()}).code, kExitData);
}

TEST(Cli, ConfigFileSetsDefaults) {
  TempDir dir;
  const std::string store = (dir.path() / "store").string();
  const fs::path docs = dir.Write("docs.jsonl", kDocs);
  ASSERT_EQ(Cli({"--store", store, "ingest", "--docs", docs.string(), "--id", "news"}).code, 0);
  ASSERT_EQ(Cli({"--store", store, "add-query", "bank rates", "--id", "q1"}).code, 0);

  const fs::path good = dir.Write("good.toml", "default-filter = \"tfidf\"\ndefault-n = 2\n");
  const CliResult r = Cli({"--config", good.string(), "--store", store, "match", "--query-id", "q1", "--json"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["matches"].size(), 2u);

  const fs::path bad = dir.Write("bad.toml", "default-k = 2\ndefault-n = 3\n");
  EXPECT_EQ(Cli({"--config", bad.string(), "--store", store, "list", "corpora"}).code, kExitUsage);
  const fs::path unknown = dir.Write("unknown.toml", "default_k = 5\n");
  EXPECT_EQ(Cli({"--config", unknown.string(), "--store", store, "list", "corpora"}).code, kExitUsage);
}

TEST(Cli, MeasureAndRatings) {
  TempDir dir;
  const std::string store = (dir.path() / "store").string();
  const fs::path docs = dir.Write("docs.jsonl", kDocs);
  ASSERT_EQ(Cli({"--store", store, "ingest", "--docs", docs.string(), "--id", "news"}).code, 0);
  ASSERT_EQ(Cli({"--store", store, "add-query", "bank rates", "--id", "q1"}).code, 0);

  const CliResult m = Cli({"--store", store, "--default-filter", "tfidf", "measure", "--query-id", "q1", "-n", "3"});
  ASSERT_EQ(m.code, 0) << m.err;
  EXPECT_EQ(m.out, "quarter_start,count\n2011-01-01,2\n2011-04-01,0\n2011-07-01,1\n");

  const fs::path csv = dir.Write("ratings.csv",
                                 "rater,query,doc,position,score\n"
                                 "a,q1,d1,0,5\nb,q1,d1,0,5\na,q1,d2,0,2\nb,q1,d2,0,2\n");
  ASSERT_EQ(Cli({"--store", store, "ratings", "import", csv.string()}).code, 0);
  const CliResult alpha = Cli({"--store", store, "ratings", "alpha"});
  ASSERT_EQ(alpha.code, 0) << alpha.err;
  EXPECT_DOUBLE_EQ(json::parse(alpha.out)["alpha"].get<double>(), 1.0);
  EXPECT_EQ(Cli({"--store", store, "ratings", "add", "--rater", "a", "--query-id", "q1", "--doc", "d1",
                 "--position", "0", "--score", "6"})
                .code,
            kExitUsage);
}

TEST(Cli, EvalRecallPrintsOneRowPerCutoff) {
  TempDir dir;
  const fs::path fixture = dir.Write(
      "recall.jsonl",
      R"({"query":"bank raised rates","sentences":["The weather was fine","The bank raised rates"],"relevant":[1]})"
      "\n"
      R"({"query":"cats sleep","sentences":["Cats sleep a lot","Dogs bark"],"relevant":[0]})"
      "\n");
  const CliResult r = Cli({"--store", (dir.path() / "s").string(), "eval-recall", "--fixture", fixture.string(),
                           "--filter", "tfidf", "--n", "1,2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "n,recall\n1,1\n2,1\n");
}

}  // namespace
}  // namespace propmatch::service
