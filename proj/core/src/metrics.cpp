#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "propmatch/errors.hpp"
#include "propmatch/pipeline.hpp"

namespace propmatch {

SentenceScorer FastSentenceScorer(const FastScorer& scorer) {
  return [scorer](const PropositionQuery& q, const Sentence& s) { return FastScore(q, s, scorer); };
}

std::vector<std::size_t> RankSentences(const PropositionQuery& query,
                                       std::span<const Sentence> sentences,
                                       const SentenceScorer& scorer, std::size_t n) {
  std::vector<double> scores(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) scores[i] = scorer(query, sentences[i]);
  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(n, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(take);
  return order;
}

double RecallAtN(std::span<const RecallInstance> instances, const SentenceScorer& scorer,
                 std::size_t n) {
  if (n < 1) throw BadInput("n must be at least 1");
  if (instances.empty()) throw BadInput("no recall instances");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const RecallInstance& inst = instances[i];
    if (inst.relevant.empty()) {
      throw BadInstance("instance " + std::to_string(i) + " has no relevant sentence");
    }
    if (*inst.relevant.rbegin() >= inst.sentences.size()) {
      throw BadInstance("instance " + std::to_string(i) + " names a sentence past its document");
    }
    for (std::size_t idx : RankSentences(inst.query, inst.sentences, scorer, n)) {
      if (inst.relevant.contains(idx)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(instances.size());
}

namespace {

nlohmann::json ParseLine(const std::string& line, std::size_t line_no, const char* what) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw BadInput(std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
  }
}

template <typename Fn>
void ForEachJsonLine(std::istream& in, const char* what, Fn fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const nlohmann::json j = ParseLine(line, line_no, what);
    try {
      fn(j, line_no);
    } catch (const nlohmann::json::exception& e) {
      throw BadInput(std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

Sentence PlainSentence(std::string id, std::string text, int position) {
  Sentence s;
  s.id = std::move(id);
  s.tokens = FallbackTokenize(text);
  s.text = std::move(text);
  s.position = position;
  return s;
}

}  // namespace

std::vector<RecallInstance> LoadRecallFixture(std::istream& in) {
  std::vector<RecallInstance> out;
  ForEachJsonLine(in, "recall fixture", [&](const nlohmann::json& j, std::size_t line_no) {
    RecallInstance inst;
    const std::string id = j.contains("id") ? j.at("id").get<std::string>()
                                            : "instance-" + std::to_string(line_no);
    inst.query = PropositionQuery::FromText(id, j.at("query").get<std::string>());
    int pos = 0;
    for (const auto& text : j.at("sentences")) {
      inst.sentences.push_back(PlainSentence(id + ":" + std::to_string(pos), text.get<std::string>(), pos));
      ++pos;
    }
    for (const auto& r : j.at("relevant")) inst.relevant.insert(r.get<std::size_t>());
    out.push_back(std::move(inst));
  });
  return out;
}

PrecisionResult PrecisionAtN(std::span<const FrameQuery> queries, const Corpus& corpus,
                             const std::unordered_map<std::string, std::set<std::string>>& annotations,
                             const SentenceScorer& scorer, std::size_t n) {
  if (n < 1) throw BadInput("n must be at least 1");
  if (queries.empty()) throw BadInput("no precision queries");
  if (corpus.empty()) throw EmptyCorpus("corpus has no sentences");
  std::set<std::string> known;
  for (const auto& [key, labels] : annotations) known.insert(labels.begin(), labels.end());
  for (const FrameQuery& q : queries) {
    if (!known.contains(q.frame)) throw BadLabel("unknown frame label '" + q.frame + "'");
  }

  std::vector<Sentence> sentences;
  sentences.reserve(corpus.sentence_count());
  for (std::size_t i = 0; i < corpus.sentence_count(); ++i) sentences.push_back(corpus.sentence(i));

  PrecisionResult result;
  for (const FrameQuery& q : queries) {
    std::size_t hits = 0;
    for (std::size_t idx : RankSentences(q.query, sentences, scorer, n)) {
      const auto it = annotations.find(corpus.sentence_index()[idx].key());
      if (it != annotations.end() && it->second.contains(q.frame)) ++hits;
    }
    result.per_query.push_back(static_cast<double>(hits) / static_cast<double>(n));
  }
  result.macro_average =
      std::accumulate(result.per_query.begin(), result.per_query.end(), 0.0) /
      static_cast<double>(result.per_query.size());
  return result;
}

std::unordered_map<std::string, std::set<std::string>> LoadFrameAnnotations(std::istream& in) {
  std::unordered_map<std::string, std::set<std::string>> out;
  ForEachJsonLine(in, "frame fixture", [&](const nlohmann::json& j, std::size_t) {
    auto& labels = out[j.at("sentence_id").get<std::string>()];
    for (const auto& l : j.at("labels")) labels.insert(l.get<std::string>());
  });
  return out;
}

std::vector<FrameQuery> LoadFrameQueries(std::istream& in) {
  std::vector<FrameQuery> out;
  ForEachJsonLine(in, "frame queries", [&](const nlohmann::json& j, std::size_t line_no) {
    const std::string id =
        j.contains("id") ? j.at("id").get<std::string>() : "q" + std::to_string(line_no);
    out.push_back({PropositionQuery::FromText(id, j.at("query").get<std::string>()),
                   j.at("frame").get<std::string>()});
  });
  return out;
}

// ---------------------------------------------------------------- ratings

void RatingRecord::Validate() const {
  if (score < 1 || score > 5) throw BadInput("rating score must be 1..5");
  if (rater.empty() || query_id.empty() || ref.doc_id.empty() || ref.position < 0) {
    throw BadInput("rating needs rater, query, doc and position");
  }
}

double KrippendorffAlphaInterval(std::span<const RatingRecord> ratings) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> items;
  for (const RatingRecord& r : ratings) {
    r.Validate();
    items[{r.query_id, r.ref.key()}].push_back(r.score);
  }
  std::vector<double> pooled;
  double within = 0;  // sum over items of (1 / (m_u - 1)) * sum over ordered pairs
  std::size_t pairable_items = 0;
  for (const auto& [key, values] : items) {
    if (values.size() < 2) continue;
    ++pairable_items;
    double s = 0;
    for (double a : values) {
      for (double b : values) s += (a - b) * (a - b);
    }
    within += s / static_cast<double>(values.size() - 1);
    pooled.insert(pooled.end(), values.begin(), values.end());
  }
  if (pairable_items < 2) {
    throw InsufficientData("alpha needs at least two items rated twice or more");
  }
  const double n = static_cast<double>(pooled.size());
  const double d_o = within / n;
  if (d_o == 0) return 1.0;
  double between = 0;
  for (double a : pooled) {
    for (double b : pooled) between += (a - b) * (a - b);
  }
  const double d_e = between / (n * (n - 1));
  return 1.0 - d_o / d_e;
}

std::vector<RatingRecord> LoadRatingsCsv(std::istream& in) {
  std::vector<RatingRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cols.push_back(cell);
    if (line_no == 1 && !cols.empty() && cols[0] == "rater") continue;
    if (cols.size() < 5) {
      throw BadInput("ratings line " + std::to_string(line_no) + ": expected 5 columns");
    }
    RatingRecord r;
    r.rater = cols[0];
    r.query_id = cols[1];
    r.ref.doc_id = cols[2];
    try {
      std::size_t used = 0;
      r.ref.position = std::stoi(cols[3], &used);
      if (used != cols[3].size()) throw std::invalid_argument("position");
      r.score = std::stoi(cols[4], &used);
      if (used != cols[4].size()) throw std::invalid_argument("score");
    } catch (const std::logic_error&) {
      throw BadInput("ratings line " + std::to_string(line_no) + ": bad integer");
    }
    r.Validate();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace propmatch
