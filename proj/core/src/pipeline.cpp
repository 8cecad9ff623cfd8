#include <algorithm>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "propmatch/errors.hpp"
#include "propmatch/pipeline.hpp"

namespace propmatch {

std::string_view RerankerName(RerankerKind kind) {
  switch (kind) {
    case RerankerKind::kNone:
      return "none";
    case RerankerKind::kLr:
      return "lr";
    case RerankerKind::kLstm:
      return "lstm";
  }
  return "none";
}

RerankerKind ParseRerankerKind(std::string_view name) {
  if (name == "none") return RerankerKind::kNone;
  if (name == "lr") return RerankerKind::kLr;
  if (name == "lstm") return RerankerKind::kLstm;
  throw BadInput("unknown reranker '" + std::string(name) + "' (none, lr, lstm)");
}

void PipelineConfig::Validate() const {
  if (n < 1 || n > k) {
    throw BadInput("need 1 <= n <= k (n=" + std::to_string(n) + ", k=" + std::to_string(k) + ")");
  }
}

FastScorer MakeFastScorer(FilterKind kind, const MatchResources& resources) {
  if (kind == FilterKind::kAveraging) {
    if (resources.embeddings == nullptr) throw BadInput("averaging filter needs embeddings");
    return FastScorer::Averaging(*resources.embeddings);
  }
  if (resources.tfidf == nullptr) throw BadInput("tf-idf filter needs a fitted tf-idf model");
  return FastScorer::TfIdf(*resources.tfidf);
}

double RerankScore(const PropositionQuery& query, const Sentence& sentence,
                   RerankerKind reranker, const MatchResources& resources,
                   const SearchConfig& search) {
  if (!query.tree || !sentence.tree) throw BadInput("reranking needs both parse trees");
  switch (reranker) {
    case RerankerKind::kNone:
      break;
    case RerankerKind::kLr: {
      if (resources.lr == nullptr) throw BadInput("lr reranker needs an LR model");
      const EditSequence seq = FindEditSequence(*sentence.tree, *query.tree, search);
      return LrScore(ExtractFeatures(seq, *sentence.tree, *query.tree), *resources.lr);
    }
    case RerankerKind::kLstm: {
      if (resources.lstm == nullptr || resources.embeddings == nullptr) {
        throw BadInput("lstm reranker needs an LSTM model and embeddings");
      }
      const EditSequence seq = FindEditSequence(*sentence.tree, *query.tree, search);
      return LstmScore(VectorizeSequence(seq, *resources.embeddings), *resources.lstm);
    }
  }
  throw BadInput("no reranker selected");
}

std::vector<RankedMatch> Match(const PropositionQuery& query, const Corpus& corpus,
                               const PipelineConfig& config, const MatchResources& resources) {
  config.Validate();
  if (corpus.empty()) throw EmptyCorpus("corpus has no sentences");
  const FastScorer scorer = MakeFastScorer(config.filter, resources);
  const std::size_t k = std::min(config.k, corpus.sentence_count());
  const std::vector<ScoredSentence> filtered = TopK(query, corpus, scorer, k);

  std::vector<RankedMatch> out;
  out.reserve(filtered.size());
  for (const ScoredSentence& s : filtered) {
    RankedMatch m;
    m.ref = s.ref;
    m.global_index = s.global_index;
    m.fast_score = s.fast_score;
    if (config.reranker != RerankerKind::kNone) {
      const Sentence& sentence = corpus.sentence(s.global_index);
      if (query.tree && sentence.tree) {
        m.rerank_score = RerankScore(query, sentence, config.reranker, resources, config.search);
      } else {
        m.rerank_score = s.fast_score;
        m.flagged_no_parse = true;
      }
    }
    out.push_back(std::move(m));
  }
  if (config.reranker != RerankerKind::kNone) {
    std::sort(out.begin(), out.end(), [](const RankedMatch& a, const RankedMatch& b) {
      if (*a.rerank_score != *b.rerank_score) return *a.rerank_score > *b.rerank_score;
      return a.global_index < b.global_index;
    });
  }
  if (out.size() > config.n) out.resize(config.n);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].final_rank = static_cast<int>(i + 1);
  return out;
}

// ---------------------------------------------------------------- measurement

Date QuarterStart(const Date& date) {
  const unsigned m = static_cast<unsigned>(date.month());
  return Date{date.year(), std::chrono::month{(m - 1) / 3 * 3 + 1}, std::chrono::day{1}};
}

namespace {

Date NextQuarter(const Date& q) {
  return QuarterStart(Date{q.year(), q.month(), std::chrono::day{1}} + std::chrono::months{3});
}

}  // namespace

MeasurementSeries Measure(std::span<const RankedMatch> matches, const Corpus& corpus) {
  MeasurementSeries series;
  std::vector<Date> quarters;
  for (const RankedMatch& m : matches) {
    const Document& doc = corpus.document(m.ref.doc_id);
    if (!doc.date) {
      ++series.undated_matches;
      continue;
    }
    quarters.push_back(QuarterStart(*doc.date));
  }
  if (quarters.empty()) return series;
  const auto [lo, hi] = std::minmax_element(quarters.begin(), quarters.end());
  const Date last = *hi;
  for (Date q = *lo; q <= last; q = NextQuarter(q)) {
    series.bin_start.push_back(q);
    series.counts.push_back(0);
  }
  for (const Date& q : quarters) {
    const auto it = std::lower_bound(series.bin_start.begin(), series.bin_start.end(), q);
    ++series.counts[static_cast<std::size_t>(it - series.bin_start.begin())];
  }
  return series;
}

std::string MeasurementToCsv(const MeasurementSeries& series) {
  std::ostringstream out;
  out << "quarter_start,count\n";
  for (std::size_t i = 0; i < series.counts.size(); ++i) {
    out << FormatIsoDate(series.bin_start[i]) << ',' << series.counts[i] << '\n';
  }
  return out.str();
}

nlohmann::json MeasurementToJson(const MeasurementSeries& series) {
  nlohmann::json bins = nlohmann::json::array();
  for (const Date& d : series.bin_start) bins.push_back(FormatIsoDate(d));
  return {{"bin_start", std::move(bins)},
          {"counts", series.counts},
          {"undated_matches", series.undated_matches}};
}

}  // namespace propmatch
