#include <gtest/gtest.h>

#include "propmatch/tree_edit.hpp"
#include "support/edit_oracle.hpp"
#include "support/trees.hpp"

namespace propmatch {
namespace {

using testing::ExhaustiveEditDistance;
using testing::MakeTree;
using testing::Render;
using testing::TargetInventory;

DepTree Sample() {
  return MakeTree({{"the", "DET", 2, "det"},
                   {"dog", "NOUN", 3, "nsubj"},
                   {"chase", "VERB", 0, "root"},
                   {"a", "DET", 5, "det"},
                   {"cat", "NOUN", 3, "obj"}});
}

bool Sound(const DepTree& source, const DepTree& target, const EditSequence& seq) {
  return TreesEqual(ReplayEdits(source, seq.ops), target);
}

TEST(FindEditSequence, IdenticalTrees) {
  const DepTree t = Sample();
  const EditSequence seq = FindEditSequence(t, t);
  EXPECT_TRUE(seq.found);
  EXPECT_TRUE(seq.ops.empty());
  EXPECT_EQ(seq.source_unedited.total, 5);
}

TEST(FindEditSequence, OneLemmaDiffers) {
  const DepTree s = Sample();
  const DepTree t = MakeTree({{"the", "DET", 2, "det"},
                              {"dog", "NOUN", 3, "nsubj"},
                              {"chase", "VERB", 0, "root"},
                              {"a", "DET", 5, "det"},
                              {"mouse", "NOUN", 3, "obj"}});
  const EditSequence seq = FindEditSequence(s, t);
  ASSERT_TRUE(seq.found);
  ASSERT_EQ(seq.ops.size(), 1u);
  EXPECT_EQ(seq.ops[0].kind, EditKind::kRelabelNode);
  EXPECT_EQ(seq.ops[0].lemma, "mouse");
  EXPECT_EQ(seq.ops[0].prior_lemma, "cat");
  EXPECT_TRUE(Sound(s, t, seq));
  ExhaustiveEditDistance oracle(t, TargetInventory(t));
  EXPECT_EQ(oracle.Distance(s, 2), 1);
}

TEST(FindEditSequence, ExtraLeaf) {
  const DepTree s = Sample();
  const DepTree t = MakeTree({{"the", "DET", 2, "det"},
                              {"dog", "NOUN", 3, "nsubj"},
                              {"chase", "VERB", 0, "root"},
                              {"a", "DET", 5, "det"},
                              {"cat", "NOUN", 3, "obj"},
                              {"today", "NOUN", 3, "obl"}});
  const EditSequence seq = FindEditSequence(s, t);
  ASSERT_TRUE(seq.found);
  ASSERT_EQ(seq.ops.size(), 1u);
  EXPECT_EQ(seq.ops[0].kind, EditKind::kInsertChild);
  EXPECT_TRUE(Sound(s, t, seq));
  ExhaustiveEditDistance oracle(t, TargetInventory(t));
  EXPECT_EQ(oracle.Distance(s, 2), 1);
}

TEST(FindEditSequence, CapsReportNotFound) {
  const DepTree s = Sample();
  const DepTree t = MakeTree({{"x", "NOUN", 2, "nsubj"},
                              {"y", "VERB", 0, "root"},
                              {"z", "NOUN", 2, "obj"},
                              {"w", "NOUN", 3, "nmod"}});
  SearchConfig tight;
  tight.max_expansions = 2;
  const EditSequence seq = FindEditSequence(s, t, tight);
  EXPECT_FALSE(seq.found);
  EXPECT_TRUE(seq.ops.empty());
  EXPECT_EQ(seq.source_unedited.total, 5);
  SearchConfig shallow;
  shallow.max_depth = 1;
  EXPECT_FALSE(FindEditSequence(s, t, shallow).found);
}

TEST(FindEditSequence, SoundAndDeterministicOnRandomPairs) {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> lemmas{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  const std::vector<std::string> tags{"NOUN", "VERB", "ADJ"}, labels{"nsubj", "obj", "amod", "root"};
  for (int i = 0; i < 100; ++i) {
    const DepTree s = testing::RandomTree(rng, 1 + static_cast<int>(rng() % 8), lemmas, tags, labels);
    const DepTree t = testing::RandomTree(rng, 1 + static_cast<int>(rng() % 8), lemmas, tags, labels);
    const EditSequence a = FindEditSequence(s, t);
    const EditSequence b = FindEditSequence(s, t);
    ASSERT_EQ(a.found, b.found);
    ASSERT_EQ(a.ops.size(), b.ops.size());
    for (std::size_t k = 0; k < a.ops.size(); ++k) EXPECT_TRUE(a.ops[k].SameEdit(b.ops[k]));
    if (a.found) EXPECT_TRUE(Sound(s, t, a)) << Render(s) << " -> " << Render(t);
  }
}

TEST(FindEditSequence, DoesNotMutateInputs) {
  const DepTree s = Sample();
  const DepTree t = MakeTree({{"cat", "NOUN", 2, "nsubj"}, {"sleep", "VERB", 0, "root"}});
  const auto hs = s.Hash(), ht = t.Hash();
  (void)FindEditSequence(s, t);
  EXPECT_EQ(s.Hash(), hs);
  EXPECT_EQ(t.Hash(), ht);
}

// The oracle restricted to target labels must agree with one allowed every
// label of the inventory.
TEST(ExhaustiveOracle, TargetInventoryIsExact) {
  std::mt19937_64 rng(99);
  const std::vector<std::string> lemmas{"a", "b", "c"}, tags{"NOUN", "VERB"},
      labels{"nsubj", "obj", "root"};
  testing::Inventory full;
  for (const auto& l : lemmas) {
    for (const auto& p : tags) full.lemma_pos.push_back({l, p});
  }
  full.labels = labels;
  for (int i = 0; i < 25; ++i) {
    const DepTree s = testing::RandomTree(rng, 1 + static_cast<int>(rng() % 3), lemmas, tags, labels);
    const DepTree t = testing::RandomTree(rng, 1 + static_cast<int>(rng() % 3), lemmas, tags, labels);
    ExhaustiveEditDistance narrow(t, TargetInventory(t));
    ExhaustiveEditDistance wide(t, full);
    EXPECT_EQ(narrow.Distance(s, 8), wide.Distance(s, 8)) << Render(s) << " -> " << Render(t);
  }
}

// Every candidate the oracle reaches in one step is reachable by a script
// of length one; checks the oracle's distance-1 layer by brute force.
TEST(ExhaustiveOracle, DistanceOneMatchesBruteForce) {
  const DepTree s = Sample();
  const DepTree t = MakeTree({{"the", "DET", 2, "det"},
                              {"dog", "NOUN", 3, "nsubj"},
                              {"chase", "VERB", 0, "root"},
                              {"cat", "NOUN", 3, "obj"},
                              {"a", "DET", 4, "det"}});
  bool one_step = false;
  for (const EditOp& op : testing::AllEdits(s, TargetInventory(t))) {
    try {
      if (TreesEqual(ApplyEdit(s, op), t)) one_step = true;
    } catch (const IllegalEdit&) {
    }
  }
  ExhaustiveEditDistance oracle(t, TargetInventory(t));
  const auto d = oracle.Distance(s, 4);
  ASSERT_TRUE(d);
  EXPECT_EQ(*d == 1, one_step);
  EXPECT_EQ(*d, 1);
}

// Beam result on a spread of family pairs equals the live oracle.
TEST(FindEditSequence, OptimalOnFamilySample) {
  const std::vector<DepTree> family = testing::SmallFamily();
  SearchConfig wide;
  wide.beam_width = 500;
  for (std::size_t i = 0; i < family.size(); i += 7) {
    for (std::size_t j = 3; j < family.size(); j += 11) {
      const EditSequence seq = FindEditSequence(family[i], family[j], wide);
      ExhaustiveEditDistance oracle(family[j], TargetInventory(family[j]));
      const auto d = oracle.Distance(family[i], 12);
      ASSERT_TRUE(d);
      ASSERT_TRUE(seq.found);
      EXPECT_EQ(static_cast<int>(seq.ops.size()), *d)
          << Render(family[i]) << " -> " << Render(family[j]);
      EXPECT_TRUE(Sound(family[i], family[j], seq));
    }
  }
}

}  // namespace
}  // namespace propmatch
