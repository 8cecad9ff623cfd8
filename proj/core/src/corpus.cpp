#include "propmatch/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <sstream>

#include <nlohmann/json.hpp>

#include "propmatch/errors.hpp"

namespace propmatch {

DepTree TreeFromTokens(std::span<const Token> tokens) {
  const int n = static_cast<int>(tokens.size());
  if (n == 0) throw MalformedParse("sentence has no tokens");
  DepTree tree;
  int root = -1;
  for (int i = 0; i < n; ++i) {
    const Token& t = tokens[static_cast<std::size_t>(i)];
    if (t.index != i + 1) {
      throw MalformedParse("token indices must be contiguous from 1, got " +
                           std::to_string(t.index) + " at row " + std::to_string(i + 1));
    }
    if (t.head < 0 || t.head > n) {
      throw MalformedParse("head " + std::to_string(t.head) + " out of range for token " +
                           std::to_string(t.index));
    }
    if (t.head == t.index) {
      throw MalformedParse("token " + std::to_string(t.index) + " heads itself");
    }
    if (t.head == 0) {
      if (root >= 0) throw MalformedParse("multiple root tokens");
      root = i;
    }
    tree.AddNode(t.lemma, t.pos, t.deprel, t.index);
  }
  if (root < 0) throw MalformedParse("no root token");

  // Every head chain must reach the root within n steps.
  for (int i = 0; i < n; ++i) {
    int cur = i;
    for (int steps = 0; cur != root; ++steps) {
      if (steps > n) throw MalformedParse("cyclic heads through token " + std::to_string(i + 1));
      cur = tokens[static_cast<std::size_t>(cur)].head - 1;
    }
  }

  tree.SetRoot(root);
  // Dependents are visited in index order, so side lists come out in surface order.
  for (int i = 0; i < n; ++i) {
    const int head = tokens[static_cast<std::size_t>(i)].head;
    if (head == 0) continue;
    tree.AttachAt(i, head - 1, i < head - 1 ? Side::kLeft : Side::kRight,
                  static_cast<std::size_t>(-1));
  }
  return tree;
}

std::vector<Token> TreeToTokens(const DepTree& tree) {
  const std::vector<int> order = tree.InOrder();
  std::vector<int> position(tree.slot_count(), 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    position[static_cast<std::size_t>(order[i])] = static_cast<int>(i) + 1;
  }
  std::vector<Token> tokens;
  tokens.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const TreeNode& n = tree.node(order[i]);
    Token t;
    t.index = static_cast<int>(i) + 1;
    t.form = n.lemma;
    t.lemma = n.lemma;
    t.pos = n.pos;
    t.head = n.parent < 0 ? 0 : position[static_cast<std::size_t>(n.parent)];
    t.deprel = n.deprel;
    tokens.push_back(std::move(t));
  }
  return tokens;
}

// ---------------------------------------------------------------- CoNLL-U

namespace {

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

int ParseIntField(std::string_view field, std::string_view what, int line_no) {
  int value = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw MalformedParse("line " + std::to_string(line_no) + ": non-integer " +
                         std::string(what) + " '" + std::string(field) + "'");
  }
  return value;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<ParsedSentence> ParseConllu(std::istream& in) {
  std::vector<ParsedSentence> out;
  ParsedSentence current;
  bool open = false;
  int line_no = 0;

  auto flush = [&] {
    if (!current.tokens.empty()) {
      current.tree = TreeFromTokens(current.tokens);
      out.push_back(std::move(current));
    } else if (open && current.sent_id) {
      throw MalformedParse("sentence '" + *current.sent_id + "' has no tokens");
    }
    current = ParsedSentence{};
    open = false;
  };

  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string_view line = raw;
    if (Trim(line).empty()) {
      flush();
      continue;
    }
    open = true;
    if (line.front() == '#') {
      std::string_view body = Trim(line.substr(1));
      if (body.starts_with("sent_id")) {
        body.remove_prefix(7);
        body = Trim(body);
        if (!body.empty() && body.front() == '=') body = Trim(body.substr(1));
        current.sent_id = std::string(body);
      }
      continue;
    }
    const auto cols = SplitTabs(line);
    if (cols.size() != 10) {
      throw MalformedParse("line " + std::to_string(line_no) + ": expected 10 columns, got " +
                           std::to_string(cols.size()));
    }
    if (cols[0].find('-') != std::string_view::npos ||
        cols[0].find('.') != std::string_view::npos) {
      continue;
    }
    Token t;
    t.index = ParseIntField(cols[0], "index", line_no);
    t.form = std::string(cols[1]);
    t.lemma = std::string(cols[2]);
    t.pos = std::string(cols[3] == "_" ? cols[4] : cols[3]);
    t.head = ParseIntField(cols[6], "head", line_no);
    t.deprel = std::string(cols[7]);
    if (t.deprel.empty() || t.deprel == "_") {
      throw MalformedParse("line " + std::to_string(line_no) + ": missing deprel");
    }
    current.tokens.push_back(std::move(t));
  }
  flush();
  return out;
}

std::vector<ParsedSentence> ParseConllu(std::string_view text) {
  std::istringstream in{std::string(text)};
  return ParseConllu(in);
}

std::string SerializeConllu(std::span<const Token> tokens,
                            const std::optional<std::string>& sent_id) {
  std::ostringstream out;
  if (sent_id) out << "# sent_id = " << *sent_id << '\n';
  auto field = [](const std::string& s) -> const std::string& {
    static const std::string kEmpty = "_";
    return s.empty() ? kEmpty : s;
  };
  for (const Token& t : tokens) {
    out << t.index << '\t' << field(t.form) << '\t' << field(t.lemma) << '\t' << field(t.pos)
        << "\t_\t_\t" << t.head << '\t' << field(t.deprel) << "\t_\t_\n";
  }
  out << '\n';
  return out.str();
}

// ---------------------------------------------------------------- tokenizer

std::vector<Token> FallbackTokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view piece = text.substr(i, j - i);
    while (!piece.empty() && std::ispunct(static_cast<unsigned char>(piece.front()))) {
      piece.remove_prefix(1);
    }
    while (!piece.empty() && std::ispunct(static_cast<unsigned char>(piece.back()))) {
      piece.remove_suffix(1);
    }
    if (!piece.empty()) {
      Token t;
      t.index = static_cast<int>(out.size()) + 1;
      t.form.reserve(piece.size());
      for (char c : piece) {
        t.form.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      }
      t.lemma = t.form;
      t.pos = "X";
      out.push_back(std::move(t));
    }
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------- dates

Date ParseIsoDate(std::string_view text) {
  auto bad = [&] { return BadInput("invalid ISO date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    auto sub = text.substr(pos, len);
    auto [ptr, ec] = std::from_chars(sub.data(), sub.data() + sub.size(), v);
    if (ec != std::errc() || ptr != sub.data() + sub.size()) throw bad();
    return v;
  };
  const Date d{std::chrono::year{num(0, 4)}, std::chrono::month{static_cast<unsigned>(num(5, 2))},
               std::chrono::day{static_cast<unsigned>(num(8, 2))}};
  if (!d.ok()) throw bad();
  return d;
}

std::string FormatIsoDate(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

// ---------------------------------------------------------------- Corpus

Corpus::Corpus(std::vector<Document> documents) : documents_(std::move(documents)) {
  for (std::size_t d = 0; d < documents_.size(); ++d) {
    Document& doc = documents_[d];
    if (!by_id_.emplace(doc.id, d).second) throw DuplicateId("document id '" + doc.id + "'");
    for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
      doc.sentences[s].position = static_cast<int>(s);
      index_.push_back(SentenceRef{doc.id, static_cast<int>(s)});
      slots_.emplace_back(d, s);
    }
  }
}

const Document* Corpus::find_document(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &documents_[it->second];
}

const Document& Corpus::document(std::string_view id) const {
  const Document* doc = find_document(id);
  if (doc == nullptr) throw BadInput("unknown document '" + std::string(id) + "'");
  return *doc;
}

const Sentence& Corpus::sentence(const SentenceRef& ref) const {
  const Document& doc = document(ref.doc_id);
  if (ref.position < 0 || static_cast<std::size_t>(ref.position) >= doc.sentences.size()) {
    throw BadInput("sentence " + ref.key() + " out of range");
  }
  return doc.sentences[static_cast<std::size_t>(ref.position)];
}

const Sentence& Corpus::sentence(std::size_t global_index) const {
  const auto [d, s] = slots_.at(global_index);
  return documents_[d].sentences[s];
}

const Document& Corpus::document_of(std::size_t global_index) const {
  return documents_[slots_.at(global_index).first];
}

Corpus IngestCorpus(std::istream& docs, std::istream* parses) {
  std::vector<Document> documents;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(docs, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw BadInput("document line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string() ||
        !rec.contains("sentences") || !rec["sentences"].is_array()) {
      throw BadInput("document line " + std::to_string(line_no) +
                     ": expected object with string 'id' and array 'sentences'");
    }
    Document doc;
    doc.id = rec["id"].get<std::string>();
    if (!seen.emplace(doc.id, documents.size()).second) {
      throw DuplicateId("document id '" + doc.id + "'");
    }
    if (rec.contains("date") && !rec["date"].is_null()) {
      doc.date = ParseIsoDate(rec["date"].get<std::string>());
    }
    if (rec.contains("source") && rec["source"].is_string()) {
      doc.source = rec["source"].get<std::string>();
    }
    int position = 0;
    for (const auto& s : rec["sentences"]) {
      if (!s.is_string()) throw BadInput("document '" + doc.id + "': sentences must be strings");
      Sentence sent;
      sent.text = s.get<std::string>();
      sent.position = position;
      sent.id = doc.id + ":" + std::to_string(position);
      sent.tokens = FallbackTokenize(sent.text);
      doc.sentences.push_back(std::move(sent));
      ++position;
    }
    documents.push_back(std::move(doc));
  }

  if (parses != nullptr) {
    for (ParsedSentence& p : ParseConllu(*parses)) {
      if (!p.sent_id) throw DanglingParse("parse block without sent_id");
      const std::string& key = *p.sent_id;
      const std::size_t colon = key.rfind(':');
      if (colon == std::string::npos) throw DanglingParse("sent_id '" + key + "' is not docid:position");
      auto it = seen.find(key.substr(0, colon));
      int position = -1;
      try {
        position = std::stoi(key.substr(colon + 1));
      } catch (const std::exception&) {
        throw DanglingParse("sent_id '" + key + "' has a non-integer position");
      }
      if (it == seen.end() || position < 0 ||
          static_cast<std::size_t>(position) >= documents[it->second].sentences.size()) {
        throw DanglingParse("parse '" + key + "' references no sentence");
      }
      Sentence& sent = documents[it->second].sentences[static_cast<std::size_t>(position)];
      sent.tokens = std::move(p.tokens);
      sent.tree = std::move(p.tree);
    }
  }
  return Corpus(std::move(documents));
}

}  // namespace propmatch
