#include <sstream>

#include <gtest/gtest.h>

#include "propmatch/corpus.hpp"
#include "propmatch/errors.hpp"
#include "support/trees.hpp"

namespace propmatch {
namespace {

constexpr const char* kDogBarks =
    "1\tdogs\tdog\tNOUN\tNNS\t_\t2\tnsubj\t_\t_\n"
    "2\tbark\tbark\tVERB\tVBP\t_\t0\troot\t_\t_\n";

TEST(ParseConllu, TwoTokenBlock) {
  const auto parsed = ParseConllu(std::string(kDogBarks));
  ASSERT_EQ(parsed.size(), 1u);
  const DepTree& t = parsed[0].tree;
  ASSERT_EQ(t.size(), 2u);
  const auto& root = t.node(t.root());
  EXPECT_EQ(root.lemma, "bark");
  EXPECT_EQ(root.deprel, "root");
  ASSERT_EQ(root.left.size(), 1u);
  EXPECT_TRUE(root.right.empty());
  const auto& dog = t.node(root.left[0]);
  EXPECT_EQ(dog.lemma, "dog");
  EXPECT_EQ(dog.pos, "NOUN");
  EXPECT_EQ(dog.deprel, "nsubj");
}

TEST(ParseConllu, SingleToken) {
  const auto parsed = ParseConllu(std::string("1\trun\trun\tVERB\t_\t_\t0\troot\t_\t_\n"));
  ASSERT_EQ(parsed.size(), 1u);
  const DepTree& t = parsed[0].tree;
  EXPECT_EQ(t.size(), 1u);
  EXPECT_TRUE(t.node(t.root()).is_leaf());
}

TEST(ParseConllu, RejectsCycle) {
  const std::string text =
      "1\ta\ta\tNOUN\t_\t_\t2\tdep\t_\t_\n"
      "2\tb\tb\tNOUN\t_\t_\t1\tdep\t_\t_\n";
  EXPECT_THROW(ParseConllu(text), MalformedParse);
}

TEST(ParseConllu, RejectsRootCount) {
  EXPECT_THROW(ParseConllu(std::string("1\ta\ta\tNOUN\t_\t_\t2\tdep\t_\t_\n"
                                       "2\tb\tb\tNOUN\t_\t_\t1\tdep\t_\t_\n"
                                       "3\tc\tc\tNOUN\t_\t_\t2\tdep\t_\t_\n")),
               MalformedParse);
  EXPECT_THROW(ParseConllu(std::string("1\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_\n"
                                       "2\tb\tb\tNOUN\t_\t_\t0\troot\t_\t_\n")),
               MalformedParse);
}

TEST(ParseConllu, RejectsNonIntegerHead) {
  EXPECT_THROW(ParseConllu(std::string("1\ta\ta\tNOUN\t_\t_\tx\troot\t_\t_\n")), MalformedParse);
  EXPECT_THROW(ParseConllu(std::string("one\ta\ta\tNOUN\t_\t_\t0\troot\t_\t_\n")),
               MalformedParse);
}

TEST(ParseConllu, SkipsMultiwordAndEmptyNodes) {
  const std::string text =
      "# sent_id = d:0\n"
      "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "1\tdo\tdo\tAUX\t_\t_\t3\taux\t_\t_\n"
      "2\tn't\tnot\tPART\t_\t_\t3\tadvmod\t_\t_\n"
      "2.1\tx\tx\tX\t_\t_\t_\t_\t_\t_\n"
      "3\tgo\tgo\tVERB\t_\t_\t0\troot\t_\t_\n";
  const auto parsed = ParseConllu(text);
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0].sent_id, "d:0");
  EXPECT_EQ(parsed[0].tokens.size(), 3u);
  EXPECT_EQ(parsed[0].tree.node(parsed[0].tree.root()).left.size(), 2u);
}

TEST(ParseConllu, XposFallback) {
  const auto parsed = ParseConllu(std::string("1\tCera\tCera\t_\tNNP\t_\t0\troot\t_\t_\n"));
  EXPECT_EQ(parsed[0].tokens[0].pos, "NNP");
}

TEST(ParseConllu, ChildrenSplitBySideInTokenOrder) {
  const std::string text =
      "1\tthe\tthe\tDET\t_\t_\t3\tdet\t_\t_\n"
      "2\tbig\tbig\tADJ\t_\t_\t3\tamod\t_\t_\n"
      "3\tdog\tdog\tNOUN\t_\t_\t0\troot\t_\t_\n"
      "4\there\there\tADV\t_\t_\t3\tadvmod\t_\t_\n"
      "5\tnow\tnow\tADV\t_\t_\t3\tadvmod\t_\t_\n";
  const DepTree t = ParseConllu(text)[0].tree;
  const auto& root = t.node(t.root());
  ASSERT_EQ(root.left.size(), 2u);
  ASSERT_EQ(root.right.size(), 2u);
  EXPECT_EQ(t.node(root.left[0]).lemma, "the");
  EXPECT_EQ(t.node(root.left[1]).lemma, "big");
  EXPECT_EQ(t.node(root.right[0]).lemma, "here");
  EXPECT_EQ(t.node(root.right[1]).lemma, "now");
}

TEST(ParseConllu, RoundTripsThroughSerialize) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> lemmas{"a", "b", "c", "d", "e"};
  for (int i = 0; i < 50; ++i) {
    // Only projective trees round-trip through token order.
    const auto all = testing::ProjectiveHeads(1 + i % 5);
    const auto& heads = all[static_cast<std::size_t>(rng() % all.size())];
    std::vector<testing::Row> rows;
    for (std::size_t k = 0; k < heads.size(); ++k) {
      rows.push_back({lemmas[rng() % lemmas.size()], "NOUN", heads[k], heads[k] == 0 ? "root" : "dep"});
    }
    const DepTree t = testing::MakeTree(rows);
    const std::vector<Token> tokens = TreeToTokens(t);
    const auto back = ParseConllu(SerializeConllu(tokens, "x:" + std::to_string(i)));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_TRUE(TreesEqual(back[0].tree, t)) << testing::Render(t);
    EXPECT_EQ(back[0].tokens, tokens);
    // In-order traversal reproduces token order.
    std::vector<int> origins;
    for (int id : back[0].tree.InOrder()) origins.push_back(back[0].tree.node(id).origin);
    for (std::size_t k = 0; k < origins.size(); ++k) EXPECT_EQ(origins[k], static_cast<int>(k + 1));
  }
}

TEST(FallbackTokenize, Examples) {
  auto forms = [](std::string_view text) {
    std::vector<std::string> out;
    for (const Token& t : FallbackTokenize(text)) out.push_back(t.form);
    return out;
  };
  EXPECT_EQ(forms("Cera missed milestones."),
            (std::vector<std::string>{"cera", "missed", "milestones"}));
  EXPECT_TRUE(forms("").empty());
  EXPECT_EQ(forms("\"stress,\" anxiety"), (std::vector<std::string>{"stress", "anxiety"}));
  const auto tokens = FallbackTokenize("Hello world");
  EXPECT_EQ(tokens[0].pos, "X");
  EXPECT_EQ(tokens[0].lemma, "hello");
  EXPECT_EQ(tokens[0].head, Token::kNoHead);
}

TEST(IsoDate, ParseAndFormat) {
  EXPECT_EQ(FormatIsoDate(ParseIsoDate("2011-02-01")), "2011-02-01");
  EXPECT_THROW(ParseIsoDate("2011-02-30"), BadInput);
  EXPECT_THROW(ParseIsoDate("Feb 1 2011"), BadInput);
}

std::string TwoDocs() {
  return R"({"id":"a","date":"2011-02-01","sentences":["One dog.","Two cats.","Three birds."]})"
         "\n"
         R"({"id":"b","sentences":["Red sky.","Blue sea.","Green grass."]})"
         "\n";
}

TEST(IngestCorpus, WithoutParses) {
  std::istringstream docs(TwoDocs());
  const Corpus c = IngestCorpus(docs);
  EXPECT_EQ(c.sentence_count(), 6u);
  EXPECT_EQ(c.documents().size(), 2u);
  for (std::size_t i = 0; i < c.sentence_count(); ++i) EXPECT_FALSE(c.sentence(i).tree);
  EXPECT_EQ(c.sentence_index()[4].key(), "b:1");
  EXPECT_TRUE(c.document("a").date);
  EXPECT_FALSE(c.document("b").date);
}

TEST(IngestCorpus, WithParses) {
  std::string conllu;
  for (const char* doc : {"a", "b"}) {
    for (int p = 0; p < 3; ++p) {
      conllu += "# sent_id = " + std::string(doc) + ":" + std::to_string(p) + "\n";
      conllu += "1\tw\tw" + std::to_string(p) + "\tNOUN\t_\t_\t2\tnsubj\t_\t_\n";
      conllu += "2\tgo\tgo\tVERB\t_\t_\t0\troot\t_\t_\n\n";
    }
  }
  std::istringstream docs(TwoDocs()), parses(conllu);
  const Corpus c = IngestCorpus(docs, &parses);
  for (std::size_t i = 0; i < c.sentence_count(); ++i) {
    const Sentence& s = c.sentence(i);
    ASSERT_TRUE(s.tree);
    EXPECT_EQ(s.tree->size(), s.tokens.size());
    const auto order = s.tree->InOrder();
    for (std::size_t k = 0; k < order.size(); ++k) {
      EXPECT_EQ(s.tree->node(order[k]).lemma, s.tokens[k].lemma);
      EXPECT_EQ(s.tree->node(order[k]).deprel, s.tokens[k].deprel);
    }
  }
}

TEST(IngestCorpus, DuplicateId) {
  std::istringstream docs(R"({"id":"a","sentences":["x"]})"
                          "\n"
                          R"({"id":"a","sentences":["y"]})");
  EXPECT_THROW(IngestCorpus(docs), DuplicateId);
}

TEST(IngestCorpus, DanglingParse) {
  std::istringstream docs(TwoDocs());
  std::istringstream parses("# sent_id = a:7\n1\tx\tx\tNOUN\t_\t_\t0\troot\t_\t_\n");
  EXPECT_THROW(IngestCorpus(docs, &parses), DanglingParse);
  std::istringstream docs2(TwoDocs());
  std::istringstream parses2("# sent_id = zz:0\n1\tx\tx\tNOUN\t_\t_\t0\troot\t_\t_\n");
  EXPECT_THROW(IngestCorpus(docs2, &parses2), DanglingParse);
}

TEST(IngestCorpus, BadRecord) {
  std::istringstream docs("{\"id\": 3}\n");
  EXPECT_THROW(IngestCorpus(docs), BadInput);
}

TEST(Corpus, IndexCoversEverySentenceOnce) {
  std::vector<Document> docs(3);
  std::size_t total = 0;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    docs[d].id = "d" + std::to_string(d);
    for (std::size_t s = 0; s <= d + 1; ++s) {
      Sentence sent;
      sent.position = static_cast<int>(s);
      sent.id = docs[d].id + ":" + std::to_string(s);
      docs[d].sentences.push_back(sent);
      ++total;
    }
  }
  const Corpus c(std::move(docs));
  EXPECT_EQ(c.sentence_count(), total);
  for (std::size_t i = 0; i < c.sentence_count(); ++i) {
    EXPECT_EQ(c.sentence(c.sentence_index()[i]).id, c.sentence_index()[i].key());
    EXPECT_EQ(&c.sentence(i), &c.sentence(c.sentence_index()[i]));
  }
}

}  // namespace
}  // namespace propmatch
