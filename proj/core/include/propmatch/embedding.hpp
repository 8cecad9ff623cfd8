#pragma once

#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "propmatch/corpus.hpp"

namespace propmatch {

using Vector = std::vector<double>;

// Word -> dense vector lookup. Storage is one contiguous float block.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return index_.size(); }

  // Keeps the first occurrence of a word; returns false for a duplicate.
  // Throws DimensionMismatch or BadVectorFile (non-finite component).
  bool Add(std::string word, std::span<const double> values);

  // Exact match only.
  const float* Find(std::string_view word) const;
  // Exact match, then lowercased fallback.
  const float* Lookup(std::string_view word) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> data_;
};

// "word v1 ... vd" per line, optional leading "count dim" header.
EmbeddingTable LoadEmbeddings(std::istream& in);
EmbeddingTable LoadEmbeddingsFile(const std::string& path);

// Mean of in-vocabulary token form vectors; zero vector when none are known.
Vector AvgVector(std::span<const Token> tokens, const EmbeddingTable& table);

// u.v / (|u||v|), 0 when either norm is 0. Throws DimensionMismatch.
double Cosine(std::span<const double> u, std::span<const double> v);

// Sparse vector with strictly increasing column indices.
using SparseVector = std::vector<std::pair<std::size_t, double>>;

double SparseCosine(const SparseVector& u, const SparseVector& v);

// Terms used by the tf-idf scorer: lowercased token forms.
std::vector<std::string> TermsOf(std::span<const Token> tokens);

class TfIdfModel {
 public:
  TfIdfModel() = default;

  // Smoothed sentence-level idf: ln((1 + N) / (1 + df)) + 1.
  static TfIdfModel Fit(std::span<const std::vector<std::string>> sentences);

  std::size_t vocab_size() const { return idf_.size(); }
  std::size_t n_sentences() const { return n_sentences_; }
  // idf of a known word; returns 0 and sets *known=false when absent.
  double idf(std::string_view word, bool* known = nullptr) const;
  const std::vector<std::string>& words() const { return words_; }

  // Raw-count tf times idf; unknown words dropped.
  SparseVector Vectorize(std::span<const std::string> terms) const;
  SparseVector Vectorize(std::span<const Token> tokens) const;

  nlohmann::json ToJson() const;
  static TfIdfModel FromJson(const nlohmann::json& j);

 private:
  std::unordered_map<std::string, std::size_t> vocab_;
  std::vector<std::string> words_;
  std::vector<double> idf_;
  std::size_t n_sentences_ = 0;
};

// Fits over every sentence of the corpus. Throws EmptyCorpus.
TfIdfModel FitTfIdf(const Corpus& corpus);

}  // namespace propmatch
