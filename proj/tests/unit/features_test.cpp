#include <gtest/gtest.h>

#include <set>
#include <string_view>

#include "propmatch/embedding.hpp"
#include "propmatch/tree_edit.hpp"
#include "support/feature_cases.hpp"
#include "support/trees.hpp"

namespace propmatch {
namespace {

using testing::HandFeatureCases;
using testing::MakeTree;

TreeEditFeatures Extract(const testing::FeatureCase& c) {
  EditSequence seq;
  seq.ops = c.ops;
  seq.found = c.found;
  const DepTree target = c.found ? ReplayEdits(c.source, c.ops) : c.source;
  return ExtractFeatures(seq, c.source, target);
}

TEST(Features, HandCases) {
  const auto cases = HandFeatureCases();
  ASSERT_GE(cases.size(), 10u);
  for (const auto& c : cases) {
    SCOPED_TRACE(c.name);
    const TreeEditFeatures got = Extract(c);
    const TreeEditFeatures want = c.Expected();
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      EXPECT_EQ(got[i], want[i]) << FeatureName(i);
    }
  }
}

TEST(Features, LengthEqualsKindCountSum) {
  for (const auto& c : HandFeatureCases()) {
    if (!c.found) continue;
    const TreeEditFeatures f = Extract(c);
    int kinds = 0;
    for (std::size_t k = 0; k < kEditKindCount; ++k) kinds += f[feature::kKindCounts + k];
    EXPECT_EQ(f[feature::kLength], kinds) << c.name;
    EXPECT_EQ(f[feature::kLength], static_cast<int>(c.ops.size())) << c.name;
  }
}

TEST(Features, SearchedScriptsAreConsistent) {
  const DepTree source = testing::SeeingTree();
  const DepTree target =
      MakeTree({{"cat", "NOUN", 2, "nsubj"}, {"see", "VERB", 0, "root"}, {"mary", "PROPN", 2, "obj"}});
  const EditSequence seq = FindEditSequence(source, target, {});
  ASSERT_TRUE(seq.found);
  const TreeEditFeatures f = ExtractFeatures(seq, source, target);
  EXPECT_EQ(f[feature::kLength], 1);
  EXPECT_EQ(f[feature::kKindCounts + static_cast<std::size_t>(EditKind::kRelabelNode)], 1);
  EXPECT_EQ(f[feature::kRelabelPreservesPos], 1);
  EXPECT_EQ(f[feature::kUneditedTotal], 2);
  EXPECT_EQ(f[feature::kFound], 1);
}

TEST(Features, NamesAreDistinct) {
  std::set<std::string_view> names;
  for (std::size_t i = 0; i < kFeatureCount; ++i) names.insert(FeatureName(i));
  EXPECT_EQ(names.size(), kFeatureCount);
  EXPECT_EQ(FeatureName(feature::kFound), "found");
}

TEST(Categories, NumericRule) {
  EXPECT_FALSE(category::NumericChangeExceeds5Percent("5.00", "5.10"));
  EXPECT_TRUE(category::NumericChangeExceeds5Percent("5.00", "5.50"));
  EXPECT_FALSE(category::NumericChangeExceeds5Percent("1,000", "1,050"));
  EXPECT_TRUE(category::NumericChangeExceeds5Percent("1,000", "1,051"));
  EXPECT_TRUE(category::NumericChangeExceeds5Percent("0", "0.001"));
  EXPECT_TRUE(category::NumericChangeExceeds5Percent("five", "5"));
  EXPECT_TRUE(category::IsNumeric("NUM", "five"));
  EXPECT_TRUE(category::IsNumeric("NN", "42"));
  EXPECT_FALSE(category::IsNumeric("NN", "dog"));
}

TEST(Categories, TagSets) {
  EXPECT_TRUE(category::IsNoun("NNS"));
  EXPECT_TRUE(category::IsNoun("NNP"));
  EXPECT_FALSE(category::IsNoun("PROPN"));
  EXPECT_TRUE(category::IsProperNoun("NNPS"));
  EXPECT_TRUE(category::IsVerb("VBD"));
  EXPECT_TRUE(category::IsPronoun("PRP$"));
  EXPECT_TRUE(category::IsSubjectLabel("csubjpass"));
  EXPECT_TRUE(category::IsObjectLabel("iobj"));
  EXPECT_TRUE(category::IsVerbComplementLabel("xcomp"));
  EXPECT_FALSE(category::IsObjectLabel("nmod"));
}

EmbeddingTable ToyTable() {
  EmbeddingTable t(2);
  t.Add("a", std::vector<double>{1, 2});
  t.Add("b", std::vector<double>{4, -1});
  return t;
}

std::vector<double> OneHot(EditKind k, std::vector<double> tail) {
  std::vector<double> v(kEditKindCount, 0.0);
  v[static_cast<std::size_t>(k)] = 1.0;
  v.insert(v.end(), tail.begin(), tail.end());
  return v;
}

TEST(Vectorize, PerKindTails) {
  const EmbeddingTable table = ToyTable();
  EditSequence seq;
  seq.found = true;
  EditOp relabel = EditOp::RelabelNode(0, "b", "NOUN");
  relabel.prior_lemma = "a";
  EditOp del = EditOp::DeleteLeaf(1);
  del.prior_lemma = "a";
  EditOp oov = EditOp::InsertChild(0, "zzz", "NOUN", "obj", Side::kLeft);
  seq.ops = {EditOp::MoveSibling(1, Side::kLeft, SiblingEnd::kFirst), del, relabel,
             EditOp::InsertParent(0, "b", "NOUN", "obj", Side::kRight), oov};
  const std::vector<Vector> v = VectorizeSequence(seq, table);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_EQ(v[0], OneHot(EditKind::kMoveSibling, {0, 0}));
  EXPECT_EQ(v[1], OneHot(EditKind::kDeleteLeaf, {-1, -2}));
  EXPECT_EQ(v[2], OneHot(EditKind::kRelabelNode, {3, -3}));
  EXPECT_EQ(v[3], OneHot(EditKind::kInsertParent, {4, -1}));
  EXPECT_EQ(v[4], OneHot(EditKind::kInsertChild, {0, 0}));
}

TEST(Vectorize, EmptyScriptIsOneZeroStep) {
  const std::vector<Vector> v = VectorizeSequence(EditSequence{{}, true, {}, 0}, ToyTable());
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0], std::vector<double>(kEditKindCount + 2, 0.0));
}

}  // namespace
}  // namespace propmatch
