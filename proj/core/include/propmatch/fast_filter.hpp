#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "propmatch/corpus.hpp"
#include "propmatch/embedding.hpp"

namespace propmatch {

struct PropositionQuery {
  std::string id;
  std::string text;
  std::vector<Token> tokens;
  std::optional<DepTree> tree;

  // Tokenizes `text` with the fallback tokenizer. Throws BadInput when no
  // tokens survive.
  static PropositionQuery FromText(std::string id, std::string text);
  // Uses parsed tokens and tree.
  static PropositionQuery FromParse(std::string id, std::string text, ParsedSentence parse);
};

struct ScoredSentence {
  SentenceRef ref;
  std::size_t global_index = 0;
  double fast_score = 0;
  int rank = 0;  // 1-based
};

enum class FilterKind { kAveraging, kTfIdf };

std::string_view FilterName(FilterKind kind);
FilterKind ParseFilterKind(std::string_view name);

// Cheap sentence scorer: cosine of averaged word vectors or of tf-idf
// vectors. Holds non-owning pointers; the table/model must outlive it.
class FastScorer {
 public:
  static FastScorer Averaging(const EmbeddingTable& table);
  static FastScorer TfIdf(const TfIdfModel& model);

  FilterKind kind() const { return kind_; }

  // Query-side representation, computed once per query.
  class Prepared {
   public:
    double Score(std::span<const Token> sentence_tokens) const;

   private:
    friend class FastScorer;
    const FastScorer* scorer_ = nullptr;
    Vector dense_;
    SparseVector sparse_;
  };

  Prepared Prepare(std::span<const Token> query_tokens) const;

 private:
  FilterKind kind_ = FilterKind::kAveraging;
  const EmbeddingTable* table_ = nullptr;
  const TfIdfModel* tfidf_ = nullptr;
};

double FastScore(const PropositionQuery& query, const Sentence& sentence, const FastScorer& scorer);

// The k best sentences by fast score (all of them when k >= |C|), score
// descending, ties by corpus order. Throws EmptyCorpus, BadInput for k < 1.
std::vector<ScoredSentence> TopK(const PropositionQuery& query, const Corpus& corpus,
                                 const FastScorer& scorer, std::size_t k);

}  // namespace propmatch
