#pragma once

#include <chrono>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "propmatch/dep_tree.hpp"

namespace propmatch {

// One row of a dependency-parsed sentence. Tokens produced by the fallback
// tokenizer carry head == kNoHead and an empty deprel.
struct Token {
  static constexpr int kNoHead = -1;

  int index = 0;  // 1-based
  std::string form;
  std::string lemma;
  std::string pos;
  int head = kNoHead;  // 0 = root
  std::string deprel;

  bool operator==(const Token&) const = default;
};

// Builds a tree from parsed tokens. Throws MalformedParse on zero or
// multiple roots, out-of-range heads, self-heads and cycles.
DepTree TreeFromTokens(std::span<const Token> tokens);

// Reconstructs CoNLL-style tokens (surface order) from a tree. form = lemma.
std::vector<Token> TreeToTokens(const DepTree& tree);

struct ParsedSentence {
  std::optional<std::string> sent_id;
  std::vector<Token> tokens;
  DepTree tree;
};

// Reads CoNLL-U: blank-line separated blocks of 10 tab-separated columns.
// Multiword ("3-4") and empty-node ("3.1") lines are skipped. POS is taken
// from UPOS, falling back to XPOS when UPOS is "_".
std::vector<ParsedSentence> ParseConllu(std::istream& in);
std::vector<ParsedSentence> ParseConllu(std::string_view text);

std::string SerializeConllu(std::span<const Token> tokens,
                            const std::optional<std::string>& sent_id = std::nullopt);

// Whitespace split, strip surrounding ASCII punctuation, lowercase, drop
// empties. pos = "X", no head.
std::vector<Token> FallbackTokenize(std::string_view text);

using Date = std::chrono::year_month_day;

// Parses an ISO-8601 calendar day (YYYY-MM-DD). Throws BadInput.
Date ParseIsoDate(std::string_view text);
std::string FormatIsoDate(const Date& date);

struct Sentence {
  std::string id;  // "docid:position"
  std::string text;
  std::vector<Token> tokens;
  std::optional<DepTree> tree;
  int position = 0;
};

struct Document {
  std::string id;
  std::optional<Date> date;
  std::optional<std::string> source;
  std::vector<Sentence> sentences;
};

struct SentenceRef {
  std::string doc_id;
  int position = 0;

  std::string key() const { return doc_id + ":" + std::to_string(position); }
  bool operator==(const SentenceRef&) const = default;
};

// Immutable after construction.
class Corpus {
 public:
  Corpus() = default;
  // Throws DuplicateId when two documents share an id.
  explicit Corpus(std::vector<Document> documents);

  const std::vector<Document>& documents() const { return documents_; }
  // Global sentence order: documents in input order, sentences by position.
  const std::vector<SentenceRef>& sentence_index() const { return index_; }
  std::size_t sentence_count() const { return index_.size(); }
  bool empty() const { return index_.empty(); }

  const Document& document(std::string_view id) const;
  const Document* find_document(std::string_view id) const;
  const Sentence& sentence(const SentenceRef& ref) const;
  const Sentence& sentence(std::size_t global_index) const;
  const Document& document_of(std::size_t global_index) const;

 private:
  std::vector<Document> documents_;
  std::vector<SentenceRef> index_;
  std::vector<std::pair<std::size_t, std::size_t>> slots_;  // (doc, sentence)
  std::unordered_map<std::string, std::size_t> by_id_;
};

// Reads one JSON document per line ({"id","date","source","sentences"}) and
// attaches parses whose "# sent_id = docid:position" names a sentence.
// Throws DuplicateId, DanglingParse, MalformedParse or BadInput.
Corpus IngestCorpus(std::istream& docs, std::istream* parses = nullptr);

}  // namespace propmatch
