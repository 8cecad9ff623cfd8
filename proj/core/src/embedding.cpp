#include "propmatch/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "propmatch/errors.hpp"

namespace propmatch {

namespace {

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string_view> SplitSpaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool ParseDouble(std::string_view s, double* out) {
  // from_chars for double is available in libstdc++ 11.
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), *out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

bool EmbeddingTable::Add(std::string word, std::span<const double> values) {
  if (dim_ == 0) dim_ = values.size();
  if (values.size() != dim_) {
    throw DimensionMismatch("vector for '" + word + "' has " + std::to_string(values.size()) +
                            " components, table dim is " + std::to_string(dim_));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw BadVectorFile("non-finite component in vector for '" + word + "'");
  }
  if (index_.contains(word)) return false;
  index_.emplace(std::move(word), data_.size() / dim_);
  for (double v : values) data_.push_back(static_cast<float>(v));
  return true;
}

const float* EmbeddingTable::Find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return nullptr;
  return data_.data() + it->second * dim_;
}

const float* EmbeddingTable::Lookup(std::string_view word) const {
  if (const float* v = Find(word)) return v;
  const std::string lower = Lower(word);
  if (lower == word) return nullptr;
  return Find(lower);
}

EmbeddingTable LoadEmbeddings(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  int line_no = 0;
  std::vector<double> values;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto parts = SplitSpaces(line);
    if (parts.empty()) continue;
    if (first) {
      first = false;
      // Optional "count dim" header: exactly two integer fields.
      long long a = 0, b = 0;
      auto ia = std::from_chars(parts[0].data(), parts[0].data() + parts[0].size(), a);
      if (parts.size() == 2 && ia.ec == std::errc() &&
          ia.ptr == parts[0].data() + parts[0].size()) {
        auto ib = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), b);
        if (ib.ec == std::errc() && ib.ptr == parts[1].data() + parts[1].size()) continue;
      }
    }
    if (parts.size() < 2) {
      throw BadVectorFile("line " + std::to_string(line_no) + ": no vector components");
    }
    values.clear();
    for (std::size_t i = 1; i < parts.size(); ++i) {
      double v = 0;
      if (!ParseDouble(parts[i], &v)) {
        throw BadVectorFile("line " + std::to_string(line_no) + ": unparseable float '" +
                            std::string(parts[i]) + "'");
      }
      values.push_back(v);
    }
    if (table.dim() != 0 && values.size() != table.dim()) {
      throw BadVectorFile("line " + std::to_string(line_no) + ": expected " +
                          std::to_string(table.dim()) + " components, got " +
                          std::to_string(values.size()));
    }
    table.Add(std::string(parts[0]), values);
  }
  return table;
}

EmbeddingTable LoadEmbeddingsFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw BadVectorFile("cannot open '" + path + "'");
  return LoadEmbeddings(in);
}

Vector AvgVector(std::span<const Token> tokens, const EmbeddingTable& table) {
  Vector sum(table.dim(), 0.0);
  std::size_t hits = 0;
  for (const Token& t : tokens) {
    const float* v = table.Lookup(t.form);
    if (v == nullptr) continue;
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += v[i];
    ++hits;
  }
  if (hits > 0) {
    for (double& x : sum) x /= static_cast<double>(hits);
  }
  return sum;
}

double Cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionMismatch("cosine of lengths " + std::to_string(u.size()) + " and " +
                            std::to_string(v.size()));
  }
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0 || nv == 0) return 0.0;
  const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
  return std::clamp(c, -1.0, 1.0);
}

double SparseCosine(const SparseVector& u, const SparseVector& v) {
  double dot = 0, nu = 0, nv = 0;
  for (const auto& [_, x] : u) nu += x * x;
  for (const auto& [_, x] : v) nv += x * x;
  if (nu == 0 || nv == 0) return 0.0;
  std::size_t i = 0, j = 0;
  while (i < u.size() && j < v.size()) {
    if (u[i].first == v[j].first) {
      dot += u[i].second * v[j].second;
      ++i;
      ++j;
    } else if (u[i].first < v[j].first) {
      ++i;
    } else {
      ++j;
    }
  }
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

std::vector<std::string> TermsOf(std::span<const Token> tokens) {
  std::vector<std::string> terms;
  terms.reserve(tokens.size());
  for (const Token& t : tokens) terms.push_back(Lower(t.form));
  return terms;
}

TfIdfModel TfIdfModel::Fit(std::span<const std::vector<std::string>> sentences) {
  if (sentences.empty()) throw EmptyCorpus("cannot fit tf-idf on zero sentences");
  TfIdfModel m;
  std::vector<std::size_t> df;
  std::unordered_set<std::string_view> in_sentence;
  for (const auto& terms : sentences) {
    in_sentence.clear();
    for (const std::string& w : terms) {
      auto [it, inserted] = m.vocab_.emplace(w, m.words_.size());
      if (inserted) {
        m.words_.push_back(w);
        df.push_back(0);
      }
      if (in_sentence.insert(w).second) ++df[it->second];
    }
  }
  m.n_sentences_ = sentences.size();
  const double n = static_cast<double>(m.n_sentences_);
  m.idf_.resize(df.size());
  for (std::size_t i = 0; i < df.size(); ++i) {
    m.idf_[i] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[i]))) + 1.0;
  }
  return m;
}

double TfIdfModel::idf(std::string_view word, bool* known) const {
  auto it = vocab_.find(std::string(word));
  if (known != nullptr) *known = it != vocab_.end();
  return it == vocab_.end() ? 0.0 : idf_[it->second];
}

SparseVector TfIdfModel::Vectorize(std::span<const std::string> terms) const {
  std::map<std::size_t, double> counts;
  for (const std::string& w : terms) {
    auto it = vocab_.find(w);
    if (it != vocab_.end()) counts[it->second] += 1.0;
  }
  SparseVector out;
  out.reserve(counts.size());
  for (const auto& [col, tf] : counts) out.emplace_back(col, tf * idf_[col]);
  return out;
}

SparseVector TfIdfModel::Vectorize(std::span<const Token> tokens) const {
  const auto terms = TermsOf(tokens);
  return Vectorize(terms);
}

nlohmann::json TfIdfModel::ToJson() const {
  return nlohmann::json{{"format_version", 1},
                        {"kind", "tfidf"},
                        {"n_sentences", n_sentences_},
                        {"vocab", words_},
                        {"idf", idf_}};
}

TfIdfModel TfIdfModel::FromJson(const nlohmann::json& j) {
  try {
    if (j.at("kind").get<std::string>() != "tfidf") throw BadInput("not a tf-idf model");
    TfIdfModel m;
    m.n_sentences_ = j.at("n_sentences").get<std::size_t>();
    m.words_ = j.at("vocab").get<std::vector<std::string>>();
    m.idf_ = j.at("idf").get<std::vector<double>>();
    if (m.words_.size() != m.idf_.size()) throw BadInput("tf-idf vocab/idf length mismatch");
    for (std::size_t i = 0; i < m.words_.size(); ++i) {
      if (!m.vocab_.emplace(m.words_[i], i).second) throw BadInput("duplicate tf-idf vocab word");
      if (!(m.idf_[i] >= 0)) throw BadInput("negative idf weight");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw BadInput(std::string("tf-idf model: ") + e.what());
  }
}

TfIdfModel FitTfIdf(const Corpus& corpus) {
  if (corpus.empty()) throw EmptyCorpus("corpus has no sentences");
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(corpus.sentence_count());
  for (std::size_t i = 0; i < corpus.sentence_count(); ++i) {
    sentences.push_back(TermsOf(corpus.sentence(i).tokens));
  }
  return TfIdfModel::Fit(sentences);
}

}  // namespace propmatch
