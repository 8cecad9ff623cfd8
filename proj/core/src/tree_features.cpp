#include <charconv>
#include <cmath>
#include <string>

#include "propmatch/tree_edit.hpp"

namespace propmatch {

namespace category {

bool IsNoun(std::string_view pos) { return pos.starts_with("NN") || pos == "NOUN"; }
bool IsProperNoun(std::string_view pos) {
  return pos == "NNP" || pos == "NNPS" || pos == "PROPN";
}
bool IsVerb(std::string_view pos) { return pos.starts_with("VB") || pos == "VERB"; }
bool IsPronoun(std::string_view pos) { return pos.starts_with("PRP") || pos == "PRON"; }

bool ParseNumber(std::string_view lemma, double* value) {
  std::string cleaned;
  cleaned.reserve(lemma.size());
  for (char c : lemma) {
    if (c != ',') cleaned.push_back(c);  // thousands separators
  }
  if (cleaned.empty()) return false;
  double v = 0;
  const char* first = cleaned.data();
  const char* last = first + cleaned.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) return false;
  if (value != nullptr) *value = v;
  return true;
}

bool IsNumeric(std::string_view pos, std::string_view lemma) {
  return pos == "CD" || pos == "NUM" || ParseNumber(lemma, nullptr);
}

bool IsSubjectLabel(std::string_view d) {
  return d == "nsubj" || d == "nsubjpass" || d == "csubj" || d == "csubjpass";
}
bool IsObjectLabel(std::string_view d) { return d == "dobj" || d == "obj" || d == "iobj"; }
bool IsVerbComplementLabel(std::string_view d) { return d == "xcomp" || d == "ccomp"; }
bool IsRootLabel(std::string_view d) { return d == "root"; }

bool NumericChangeExceeds5Percent(std::string_view old_lemma, std::string_view new_lemma) {
  double a = 0, b = 0;
  if (!ParseNumber(old_lemma, &a) || !ParseNumber(new_lemma, &b)) return true;
  return std::abs(b - a) / std::max(std::abs(a), 1e-9) > 0.05;
}

}  // namespace category

namespace {

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "edits",
    "count:INSERT-CHILD",
    "count:INSERT-PARENT",
    "count:DELETE-LEAF",
    "count:DELETE-&-MERGE",
    "count:RELABEL-NODE",
    "count:RELABEL-EDGE",
    "count:MOVE-SUBTREE",
    "count:NEW-ROOT",
    "count:MOVE-SIBLING",
    "insert:noun-or-verb",
    "insert:proper-noun",
    "delete:noun-or-verb",
    "delete:proper-noun",
    "delete:subject-edge",
    "delete:object-edge",
    "delete:verb-complement-edge",
    "delete:root-edge",
    "relabel-node:preserves-pos",
    "relabel-node:preserves-lemma",
    "relabel-node:noun-pronoun",
    "relabel-node:proper-noun",
    "relabel-node:numeric-change>5%",
    "relabel-edge:subject",
    "relabel-edge:object",
    "relabel-edge:verb-complement",
    "relabel-edge:root",
    "unedited:total",
    "unedited:numeric",
    "unedited:verbs",
    "unedited:nouns",
    "unedited:proper-nouns",
    "found",
};

}  // namespace

std::string_view FeatureName(std::size_t slot) { return kFeatureNames.at(slot); }

TreeEditFeatures ExtractFeatures(const EditSequence& seq, const DepTree& source,
                                 const DepTree& /*target*/) {
  using namespace category;
  TreeEditFeatures f;
  auto& v = f.values;
  const UneditedCounts unedited = seq.found ? CountUnedited(source, seq.ops)
                                            : CountUnedited(source, {});
  v[feature::kUneditedTotal] = unedited.total;
  v[feature::kUneditedNumeric] = unedited.numeric;
  v[feature::kUneditedVerbs] = unedited.verbs;
  v[feature::kUneditedNouns] = unedited.nouns;
  v[feature::kUneditedProperNouns] = unedited.proper_nouns;
  if (!seq.found) return f;

  v[feature::kFound] = 1;
  v[feature::kLength] = static_cast<int>(seq.ops.size());

  DepTree tree = source;
  const std::string root_label(kRootLabel);
  for (const EditOp& op : seq.ops) {
    ++v[feature::kKindCounts + static_cast<std::size_t>(op.kind)];
    switch (op.kind) {
      case EditKind::kInsertChild:
      case EditKind::kInsertParent:
        if (IsNoun(op.pos) || IsVerb(op.pos)) ++v[feature::kInsertNounOrVerb];
        if (IsProperNoun(op.pos)) ++v[feature::kInsertProperNoun];
        break;
      case EditKind::kDeleteLeaf:
      case EditKind::kDeleteMerge: {
        const TreeNode& n = tree.node(op.node);
        if (IsNoun(n.pos) || IsVerb(n.pos)) ++v[feature::kDeleteNounOrVerb];
        if (IsProperNoun(n.pos)) ++v[feature::kDeleteProperNoun];
        if (IsSubjectLabel(n.deprel)) ++v[feature::kDeleteSubject];
        if (IsObjectLabel(n.deprel)) ++v[feature::kDeleteObject];
        if (IsVerbComplementLabel(n.deprel)) ++v[feature::kDeleteVerbComplement];
        if (IsRootLabel(n.deprel)) ++v[feature::kDeleteRoot];
        break;
      }
      case EditKind::kRelabelNode: {
        const TreeNode& n = tree.node(op.node);
        if (n.pos == op.pos) ++v[feature::kRelabelPreservesPos];
        if (n.lemma == op.lemma) ++v[feature::kRelabelPreservesLemma];
        if ((IsNoun(n.pos) && IsPronoun(op.pos)) || (IsPronoun(n.pos) && IsNoun(op.pos))) {
          ++v[feature::kRelabelNounPronoun];
        }
        if ((IsProperNoun(n.pos) || IsProperNoun(op.pos)) && n.lemma != op.lemma) {
          ++v[feature::kRelabelProperNoun];
        }
        if ((IsNumeric(n.pos, n.lemma) || IsNumeric(op.pos, op.lemma)) &&
            NumericChangeExceeds5Percent(n.lemma, op.lemma)) {
          ++v[feature::kRelabelNumericChange];
        }
        break;
      }
      case EditKind::kRelabelEdge: {
        const std::string& from = tree.node(op.node).deprel;
        const std::string& to = op.label;
        if (IsSubjectLabel(from) || IsSubjectLabel(to)) ++v[feature::kEdgeSubject];
        if (IsObjectLabel(from) || IsObjectLabel(to)) ++v[feature::kEdgeObject];
        if (IsVerbComplementLabel(from) || IsVerbComplementLabel(to)) {
          ++v[feature::kEdgeVerbComplement];
        }
        if (IsRootLabel(from) || IsRootLabel(to)) ++v[feature::kEdgeRoot];
        break;
      }
      case EditKind::kMoveSubtree:
      case EditKind::kNewRoot:
      case EditKind::kMoveSibling:
        break;
    }
    ApplyEditInPlace(tree, op, root_label);
  }
  return f;
}

std::vector<Vector> VectorizeSequence(const EditSequence& seq, const EmbeddingTable& table) {
  const std::size_t d = table.dim();
  std::vector<Vector> out;
  if (seq.ops.empty()) {
    out.emplace_back(kEditKindCount + d, 0.0);
    return out;
  }
  out.reserve(seq.ops.size());
  auto add = [&](Vector& v, std::string_view word, double sign) {
    if (const float* e = table.Lookup(word)) {
      for (std::size_t i = 0; i < d; ++i) v[kEditKindCount + i] += sign * e[i];
    }
  };
  for (const EditOp& op : seq.ops) {
    Vector v(kEditKindCount + d, 0.0);
    v[static_cast<std::size_t>(op.kind)] = 1.0;
    switch (op.kind) {
      case EditKind::kInsertChild:
      case EditKind::kInsertParent:
        add(v, op.lemma, 1.0);
        break;
      case EditKind::kRelabelNode:
        add(v, op.lemma, 1.0);
        add(v, op.prior_lemma, -1.0);
        break;
      case EditKind::kDeleteLeaf:
      case EditKind::kDeleteMerge:
        add(v, op.prior_lemma, -1.0);
        break;
      default:
        break;
    }
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace propmatch
