#include "propmatch/service/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "propmatch/errors.hpp"
#include "propmatch/service/engine.hpp"
#include "propmatch/service/http_service.hpp"

namespace propmatch::service {

using json = nlohmann::json;

namespace {

std::string ReadFile(const std::string& path) {
  if (path == "-") {
    std::ostringstream s;
    s << std::cin.rdbuf();
    return s.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ServiceError(ServiceError::Kind::kNotFound, "cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::optional<std::string> Opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

// Flag values shared by the commands that run the pipeline.
struct ScorerFlags {
  std::string filter, rerank, corpus, embeddings, tfidf, lr, lstm;
  std::size_t k = 0, n = 0;

  void Add(CLI::App* cmd, bool with_widths) {
    cmd->add_option("--filter", filter, "averaging or tfidf");
    cmd->add_option("--rerank", rerank, "none, lr or lstm");
    cmd->add_option("--corpus", corpus, "corpus id");
    cmd->add_option("--embeddings-id", embeddings, "registered embeddings id");
    cmd->add_option("--tfidf", tfidf, "tf-idf model id");
    cmd->add_option("--lr", lr, "LR model id");
    cmd->add_option("--lstm", lstm, "LSTM model id");
    if (with_widths) {
      cmd->add_option("-k,--k", k, "fast filter width")->check(CLI::PositiveNumber);
      cmd->add_option("-n,--n", n, "number of matches")->check(CLI::PositiveNumber);
    }
  }

  MatchRequest Request() const {
    MatchRequest r;
    try {
      if (!filter.empty()) r.filter = ParseFilterKind(filter);
      if (!rerank.empty()) r.reranker = ParseRerankerKind(rerank);
    } catch (const BadInput& e) {
      throw ServiceError(ServiceError::Kind::kInvalid, e.what());
    }
    if (k > 0) r.k = k;
    if (n > 0) r.n = n;
    r.corpus_id = Opt(corpus);
    r.embeddings_id = Opt(embeddings);
    r.tfidf_model = Opt(tfidf);
    r.lr_model = Opt(lr);
    r.lstm_model = Opt(lstm);
    return r;
  }
};

void PrintJson(std::ostream& out, const json& j) { out << j.dump() << "\n"; }

int ExitFor(const ServiceError& e) {
  return e.kind() == ServiceError::Kind::kInvalid ? kExitUsage : kExitData;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Proposition matching over dated news corpora", "propmatch"};
  app.require_subcommand(1);
  app.allow_config_extras(false);

  // Global settings, also read from a TOML config file (dashed keys).
  std::string store_path = "propmatch-store";
  std::string parser_mode = "none", parser_target, embeddings_path, default_filter, default_rerank;
  Defaults defaults;
  app.set_config("--config", "", "TOML config file");
  app.add_option("--store", store_path, "project store directory")->envname("PROPMATCH_STORE");
  app.add_option("--parser-mode", parser_mode, "none, command or http");
  app.add_option("--parser-target", parser_target, "parser command or URL");
  app.add_option("--embeddings", embeddings_path, "vector file used when none is registered");
  app.add_option("--default-filter", default_filter, "averaging or tfidf");
  app.add_option("--default-rerank", default_rerank, "none, lr or lstm");
  app.add_option("--default-k", defaults.k, "fast filter width")->check(CLI::PositiveNumber);
  app.add_option("--default-n", defaults.n, "matches returned")->check(CLI::PositiveNumber);
  app.add_option("--measure-n", defaults.measure_n, "matches counted by measure")->check(CLI::PositiveNumber);
  app.add_option("--beam-width", defaults.beam_width, "edit search beam width")->check(CLI::PositiveNumber);
  app.add_flag("--strict", defaults.strict, "fail instead of falling back when a parse is missing");

  // Each subcommand sets the action run after parsing.
  std::function<int(Engine&)> action;

  // ingest
  std::string docs_file, parses_file, id;
  bool no_parse = false;
  CLI::App* ingest = app.add_subcommand("ingest", "register a corpus");
  ingest->add_option("--docs", docs_file, "documents JSONL ('-' for stdin)")->required();
  ingest->add_option("--parses", parses_file, "CoNLL-U parses");
  ingest->add_option("--id", id, "corpus id");
  ingest->add_flag("--no-parse", no_parse, "do not send sentences through the parser hook");
  ingest->callback([&] {
    action = [&](Engine& engine) {
      std::optional<std::string> parses;
      if (!parses_file.empty()) parses = ReadFile(parses_file);
      PrintJson(out, ToJson(engine.Ingest(Opt(id), ReadFile(docs_file), parses, !no_parse)));
      return kExitOk;
    };
  });

  // embed
  std::string vectors_file;
  CLI::App* embed = app.add_subcommand("embed", "register a word vector file");
  embed->add_option("file", vectors_file, "text vector file")->required();
  embed->add_option("--id", id, "embeddings id");
  embed->callback([&] {
    action = [&](Engine& engine) {
      PrintJson(out, ToJson(engine.store().AddEmbeddings(Opt(id), vectors_file)));
      return kExitOk;
    };
  });

  // add-query
  std::string query_text, query_conllu, corpus_id;
  CLI::App* add_query = app.add_subcommand("add-query", "register a query");
  add_query->add_option("text", query_text, "query sentence")->required();
  add_query->add_option("--id", id, "query id");
  add_query->add_option("--corpus", corpus_id, "corpus the query targets");
  add_query->add_option("--conllu", query_conllu, "CoNLL-U parse of the query");
  add_query->callback([&] {
    action = [&](Engine& engine) {
      std::optional<std::string> conllu;
      if (!query_conllu.empty()) conllu = ReadFile(query_conllu);
      PrintJson(out, ToJson(engine.AddQuery(Opt(id), query_text, Opt(corpus_id), conllu)));
      return kExitOk;
    };
  });

  // fit-tfidf
  CLI::App* fit = app.add_subcommand("fit-tfidf", "fit tf-idf weights on a corpus");
  fit->add_option("--corpus", corpus_id, "corpus id")->required();
  fit->add_option("--id", id, "model id");
  fit->callback([&] {
    action = [&](Engine& engine) {
      PrintJson(out, ToJson(engine.FitTfIdf(Opt(id), corpus_id)));
      return kExitOk;
    };
  });

  // train
  std::string kind_name, records_file, train_parses, train_embeddings;
  TrainConfig train_config;
  std::size_t train_beam = 0;
  CLI::App* train = app.add_subcommand("train", "train a reranker on SNLI-style records");
  train->add_option("--kind", kind_name, "lr or lstm")->required()->check(CLI::IsMember({"lr", "lstm"}));
  train->add_option("--records", records_file, "SNLI JSONL")->required();
  train->add_option("--parses", train_parses, "CoNLL-U parses of the records")->required();
  train->add_option("--id", id, "model id");
  train->add_option("--embeddings-id", train_embeddings, "embeddings for the LSTM");
  train->add_option("--epochs", train_config.epochs)->check(CLI::PositiveNumber);
  train->add_option("--learning-rate", train_config.learning_rate)->check(CLI::PositiveNumber);
  train->add_option("--batch-size", train_config.batch_size)->check(CLI::PositiveNumber);
  train->add_option("--l2", train_config.l2)->check(CLI::NonNegativeNumber);
  train->add_option("--seed", train_config.seed);
  train->add_option("--hidden-dim", train_config.hidden_dim)->check(CLI::PositiveNumber);
  train->add_option("--train-beam-width", train_beam, "beam width for training pairs")->check(CLI::PositiveNumber);
  train->callback([&] {
    action = [&](Engine& engine) {
      TrainRequest r;
      r.kind = ParseModelKind(kind_name);
      r.id = Opt(id);
      r.records_jsonl = ReadFile(records_file);
      r.parses_conllu = ReadFile(train_parses);
      r.embeddings_id = Opt(train_embeddings);
      r.config = train_config;
      r.beam_width = train_beam > 0 ? train_beam : engine.defaults().beam_width;
      PrintJson(out, ToJson(engine.Train(r)));
      return kExitOk;
    };
  });

  // match
  std::string query_id, save_as;
  bool as_json = false;
  ScorerFlags match_flags;
  CLI::App* match = app.add_subcommand("match", "rank corpus sentences against a query");
  auto* q_text = match->add_option("--query", query_text, "query sentence");
  auto* q_id = match->add_option("--query-id", query_id, "registered query id");
  q_text->excludes(q_id);
  match->add_option("--save-as", save_as, "register the query text under this id first")->needs(q_text);
  match->add_flag("--json", as_json, "print JSON instead of a table");
  match_flags.Add(match, true);
  match->callback([&] {
    if (query_text.empty() && query_id.empty()) throw CLI::RequiredError("--query or --query-id");
    action = [&](Engine& engine) {
      const MatchRequest request = match_flags.Request();
      MatchRun run;
      if (!query_id.empty()) {
        run = engine.MatchStored(query_id, request);
      } else if (!save_as.empty()) {
        const QueryEntry e = engine.AddQuery(save_as, query_text, request.corpus_id, std::nullopt);
        run = engine.MatchStored(e.id, request);
      } else {
        run = engine.Match(engine.TransientQuery(query_text), std::nullopt, request);
      }
      if (as_json) {
        PrintJson(out, MatchRunToJson(run));
      } else {
        out << MatchRunToTable(run);
      }
      return kExitOk;
    };
  });

  // measure
  ScorerFlags measure_flags;
  std::size_t measure_n = 0;
  CLI::App* measure = app.add_subcommand("measure", "count a query's top matches per quarter");
  measure->add_option("--query-id", query_id, "registered query id")->required();
  measure->add_option("-n,--n", measure_n, "matches counted")->check(CLI::PositiveNumber);
  measure->add_flag("--json", as_json, "print JSON instead of CSV");
  measure_flags.Add(measure, false);
  measure->add_option("-k,--k", measure_flags.k, "fast filter width")->check(CLI::PositiveNumber);
  measure->callback([&] {
    action = [&](Engine& engine) {
      const MatchRun run = engine.MatchForMeasurement(
          query_id, measure_n > 0 ? std::optional<std::size_t>(measure_n) : std::nullopt, measure_flags.Request());
      const MeasurementSeries series = engine.Measure(run);
      if (as_json) {
        PrintJson(out, MeasurementRunToJson(run, series));
      } else {
        out << MeasurementToCsv(series);
      }
      return kExitOk;
    };
  });

  // eval-recall
  std::string fixture_file, n_list = "1,2,5", eval_filter;
  CLI::App* recall = app.add_subcommand("eval-recall", "recall@n of the fast filter on a fixture");
  recall->add_option("--fixture", fixture_file, "recall fixture JSONL")->required();
  recall->add_option("--n", n_list, "comma-separated cutoffs");
  recall->add_option("--filter", eval_filter, "averaging or tfidf");
  recall->add_option("--embeddings-id", train_embeddings, "registered embeddings id");
  recall->callback([&] {
    action = [&](Engine& engine) {
      const std::vector<std::size_t> ns = ParseSizeList(n_list);
      FilterKind filter = engine.defaults().filter;
      try {
        if (!eval_filter.empty()) filter = ParseFilterKind(eval_filter);
      } catch (const BadInput& e) {
        throw ServiceError(ServiceError::Kind::kInvalid, e.what());
      }
      std::istringstream in(ReadFile(fixture_file));
      const std::vector<RecallInstance> instances = LoadRecallFixture(in);
      out << "n,recall\n";
      for (const auto& [n, r] : engine.EvalRecall(instances, filter, Opt(train_embeddings), ns)) {
        out << n << "," << std::setprecision(6) << r << "\n";
      }
      return kExitOk;
    };
  });

  // eval-precision
  std::string frame_queries_file, annotations_file;
  ScorerFlags precision_flags;
  CLI::App* precision = app.add_subcommand("eval-precision", "frame precision@n of the fast filter");
  precision->add_option("--queries", frame_queries_file, "frame queries JSONL")->required();
  precision->add_option("--annotations", annotations_file, "frame annotations JSONL")->required();
  precision->add_option("--n", n_list, "comma-separated cutoffs");
  precision_flags.Add(precision, false);
  precision->callback([&] {
    action = [&](Engine& engine) {
      const std::vector<std::size_t> ns = ParseSizeList(n_list);
      const MatchRequest request = precision_flags.Request();
      std::optional<std::string> corpus = request.corpus_id;
      if (!corpus) corpus = engine.store().latest_corpus();
      if (!corpus) throw ServiceError(ServiceError::Kind::kUnavailable, "no corpus registered");
      std::istringstream qin(ReadFile(frame_queries_file));
      std::istringstream ain(ReadFile(annotations_file));
      const std::vector<FrameQuery> queries = LoadFrameQueries(qin);
      const auto annotations = LoadFrameAnnotations(ain);
      out << "n,precision\n";
      for (const auto& [n, p] : engine.EvalPrecision(*corpus, queries, annotations, request, ns)) {
        out << n << "," << std::setprecision(6) << p.macro_average << "\n";
      }
      return kExitOk;
    };
  });

  // ratings
  CLI::App* ratings = app.add_subcommand("ratings", "relevance ratings");
  ratings->require_subcommand(1);
  RatingRecord rating;
  CLI::App* r_add = ratings->add_subcommand("add", "append one rating");
  r_add->add_option("--rater", rating.rater)->required();
  r_add->add_option("--query-id", rating.query_id)->required();
  r_add->add_option("--doc", rating.ref.doc_id)->required();
  r_add->add_option("--position", rating.ref.position)->required()->check(CLI::NonNegativeNumber);
  r_add->add_option("--score", rating.score)->required()->check(CLI::Range(1, 5));
  r_add->callback([&] {
    action = [&](Engine& engine) {
      PrintJson(out, ToJson(engine.store().AppendRating(rating)));
      return kExitOk;
    };
  });
  std::string ratings_file;
  CLI::App* r_import = ratings->add_subcommand("import", "append every rating of a CSV file");
  r_import->add_option("file", ratings_file, "rater,query,doc,position,score")->required();
  r_import->callback([&] {
    action = [&](Engine& engine) {
      std::istringstream in(ReadFile(ratings_file));
      const std::vector<RatingRecord> records = LoadRatingsCsv(in);
      for (const RatingRecord& r : records) engine.store().AppendRating(r);
      PrintJson(out, json{{"imported", records.size()}});
      return kExitOk;
    };
  });
  CLI::App* r_alpha = ratings->add_subcommand("alpha", "Krippendorff's alpha (interval)");
  r_alpha->add_option("--query-id", query_id, "restrict to one query");
  r_alpha->callback([&] {
    action = [&](Engine& engine) {
      PrintJson(out, engine.Alpha(Opt(query_id)));
      return kExitOk;
    };
  });
  CLI::App* r_list = ratings->add_subcommand("list", "print stored ratings");
  r_list->callback([&] {
    action = [&](Engine& engine) {
      for (const StoredRating& r : engine.store().ratings()) PrintJson(out, ToJson(r));
      return kExitOk;
    };
  });

  // list
  std::string what;
  CLI::App* list = app.add_subcommand("list", "list registered items");
  list->add_option("what", what)->required()->check(CLI::IsMember({"corpora", "queries", "embeddings", "models"}));
  list->callback([&] {
    action = [&](Engine& engine) {
      const ProjectStore& s = engine.store();
      auto print = [&](const auto& entries) {
        for (const auto& e : entries) PrintJson(out, ToJson(e));
      };
      if (what == "corpora") print(s.corpora());
      if (what == "queries") print(s.queries());
      if (what == "embeddings") print(s.embeddings());
      if (what == "models") print(s.models());
      return kExitOk;
    };
  });

  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  CLI::App* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port")->check(CLI::Range(0, 65535));
  serve->callback([&] {
    action = [&](Engine& engine) {
      HttpService service(engine);
      err << "propmatch: serving " << engine.store().root().string() << " on " << host << ":" << port << std::endl;
      return service.Listen(host, port) ? kExitOk : kExitData;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    try {
      if (!default_filter.empty()) defaults.filter = ParseFilterKind(default_filter);
      if (!default_rerank.empty()) defaults.reranker = ParseRerankerKind(default_rerank);
    } catch (const BadInput& e) {
      throw ServiceError(ServiceError::Kind::kInvalid, e.what());
    }
    if (defaults.n > defaults.k) {
      throw ServiceError(ServiceError::Kind::kInvalid, "--default-n must not exceed --default-k");
    }
    defaults.embeddings_path = Opt(embeddings_path);
    ParserHook hook(ParserHook::ParseMode(parser_mode), parser_target);
    ProjectStore store(store_path);
    Engine engine(store, defaults, hook);
    return action(engine);
  } catch (const ServiceError& e) {
    err << "propmatch: " << e.what() << "\n";
    return ExitFor(e);
  } catch (const Error& e) {
    err << "propmatch: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "propmatch: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace propmatch::service
