#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "propmatch/errors.hpp"
#include "propmatch/models.hpp"

namespace propmatch {

std::vector<LabeledPair> RecastSnli(std::istream& records, std::istream& parses) {
  std::map<std::string, ParsedSentence, std::less<>> by_key;
  for (ParsedSentence& p : ParseConllu(parses)) {
    if (!p.sent_id) throw DanglingParse("NLI parse without sent_id");
    const std::string key = *p.sent_id;
    by_key.insert_or_assign(key, std::move(p));
  }
  auto take = [&](const std::string& key) -> ParsedSentence {
    auto it = by_key.find(key);
    if (it == by_key.end()) throw DanglingParse("no parse for '" + key + "'");
    return it->second;
  };

  std::vector<LabeledPair> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(records, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    std::string gold, premise, hypothesis, pair_id;
    try {
      j = nlohmann::json::parse(line);
      gold = j.at("gold_label").get<std::string>();
      premise = j.at("sentence1").get<std::string>();
      hypothesis = j.at("sentence2").get<std::string>();
      pair_id = j.at("pairID").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BadInput("NLI record " + std::to_string(line_no) + ": " + e.what());
    }
    int label = 0;
    if (gold == "entailment") {
      label = 1;
    } else if (gold == "contradiction" || gold == "neutral") {
      label = 0;
    } else if (gold == "-") {
      continue;
    } else {
      throw BadInput("NLI record " + std::to_string(line_no) + ": unknown gold_label '" + gold +
                     "'");
    }
    ParsedSentence p = take(pair_id + ":premise");
    ParsedSentence h = take(pair_id + ":hypothesis");

    LabeledPair pair;
    pair.pair_id = pair_id;
    pair.label = label;
    pair.candidate.id = pair_id + ":premise";
    pair.candidate.text = premise;
    pair.candidate.tokens = std::move(p.tokens);
    pair.candidate.tree = std::move(p.tree);
    pair.query = PropositionQuery::FromParse(pair_id + ":hypothesis", hypothesis, std::move(h));
    out.push_back(std::move(pair));
  }
  return out;
}

namespace {

void RequireTrees(const LabeledPair& pair) {
  if (!pair.candidate.tree || !pair.query.tree) {
    throw BadInput("pair '" + pair.pair_id + "' lacks a candidate or query tree");
  }
}

}  // namespace

TreeEditFeatures PairFeatures(const LabeledPair& pair, const SearchConfig& search) {
  RequireTrees(pair);
  const EditSequence seq = FindEditSequence(*pair.candidate.tree, *pair.query.tree, search);
  return ExtractFeatures(seq, *pair.candidate.tree, *pair.query.tree);
}

std::vector<Vector> PairEditVectors(const LabeledPair& pair, const EmbeddingTable& table,
                                    const SearchConfig& search) {
  RequireTrees(pair);
  return VectorizeSequence(FindEditSequence(*pair.candidate.tree, *pair.query.tree, search),
                           table);
}

}  // namespace propmatch
