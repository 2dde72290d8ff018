#include <gtest/gtest.h>

#include <random>

#include "mpcprobe/corpus.hpp"
#include "mpcprobe/graph.hpp"
#include "test_support.hpp"

using namespace mpcprobe;

namespace {

Conversation xyz() {
  return make_conversation("c1", {{"x", "y", "hi y"}, {"y", "z", "hello z"}, {"z", "x", "yo"}, {"y", "x", "x: ok"}});
}

}  // namespace

TEST(ParseCorpus, OneJsonlRecordWithThreeTurns) {
  const std::string src =
      R"({"id":"a","turns":[{"speaker":"p","addressee":"q","text":"1"},{"speaker":"q","addressee":"p","text":"2"},)"
      R"({"speaker":"p","addressee":"r","text":"3"}]})"
      "\n";
  auto r = parse_corpus(src, CorpusFormat::kGenericJsonl);
  ASSERT_EQ(r.conversations.size(), 1u);
  EXPECT_TRUE(r.diagnostics.empty());
  EXPECT_EQ(r.conversations[0].turns.size(), 3u);
  EXPECT_EQ(r.conversations[0].users.size(), 3u);
  EXPECT_EQ(r.conversations[0].turns[2].index, 3);
}

TEST(ParseCorpus, EmptyStream) {
  auto r = parse_corpus("", CorpusFormat::kGenericJsonl);
  EXPECT_TRUE(r.conversations.empty());
  EXPECT_TRUE(r.diagnostics.empty());
  auto u = parse_corpus("", CorpusFormat::kUbuntuIrcAdjacency);
  EXPECT_TRUE(u.conversations.empty());
  EXPECT_TRUE(u.diagnostics.empty());
}

TEST(ParseCorpus, MissingAddresseeNamesTheTurn) {
  const std::string src =
      "\n"
      R"({"id":"bad","turns":[{"speaker":"p","addressee":"q","text":"1"},{"speaker":"q","text":"2"}]})"
      "\n";
  auto r = parse_corpus(src, CorpusFormat::kGenericJsonl);
  EXPECT_TRUE(r.conversations.empty());
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].line, 2u);
  EXPECT_EQ(r.diagnostics[0].message, "record at line 2 (id bad): turn 2 missing field 'addressee'");
}

TEST(ParseCorpus, InvalidUtf8IsFatal) {
  const std::string src = "{\"id\":\"a\xff\"}\n";
  try {
    parse_corpus(src, CorpusFormat::kGenericJsonl);
    FAIL() << "expected DecodeError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kDecodeError);
  }
  EXPECT_FALSE(is_valid_utf8("\xc0\xaf"));        // overlong
  EXPECT_FALSE(is_valid_utf8("\xed\xa0\x80"));    // surrogate
  EXPECT_TRUE(is_valid_utf8("caf\xc3\xa9 \xe2\x82\xac"));
}

TEST(ParseCorpus, MalformedRecordsAreReportedNotDropped) {
  const std::string src =
      "not json\n"
      R"({"turns":[]})"
      "\n"
      R"({"id":"short","turns":[{"speaker":"p","addressee":"q","text":"1"}]})"
      "\n"
      R"({"id":"empty","turns":[{"speaker":"p","addressee":"q","text":""},{"speaker":"q","addressee":"p","text":"x"}]})"
      "\n";
  auto r = parse_corpus(src, CorpusFormat::kGenericJsonl);
  EXPECT_TRUE(r.conversations.empty());
  ASSERT_EQ(r.diagnostics.size(), 4u);
  EXPECT_NE(r.diagnostics[0].message.find("invalid JSON"), std::string::npos);
  EXPECT_NE(r.diagnostics[1].message.find("'id'"), std::string::npos);
  EXPECT_NE(r.diagnostics[2].message.find("at least 2 required"), std::string::npos);
  EXPECT_NE(r.diagnostics[3].message.find("empty text"), std::string::npos);

  ParseOptions lenient;
  lenient.allow_empty_text = true;
  EXPECT_EQ(parse_corpus(src, CorpusFormat::kGenericJsonl, lenient).conversations.size(), 1u);
}

TEST(ParseCorpus, UbuntuAdjacencyBlocks) {
  const std::string src =
      "2004-01-01T00:00\tann\tbob\thi bob\n"
      "2004-01-01T00:01\tbob\tann\thi ann\n"
      "\n"
      "ann\tbob\tno stamp\n"
      "bob\t-\tno addressee here\n"
      "\n\n"
      "cid\tdee\tthird\r\n"
      "dee\tcid\tfourth\n";
  auto r = parse_corpus(src, CorpusFormat::kUbuntuIrcAdjacency);
  ASSERT_EQ(r.conversations.size(), 2u);
  EXPECT_EQ(r.conversations[0].id, "conv-000001");
  EXPECT_EQ(r.conversations[1].id, "conv-000003");
  EXPECT_EQ(r.conversations[1].turns[0].text, "third");
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].line, 4u);
  EXPECT_NE(r.diagnostics[0].message.find("turn 2 (line 5) missing addressee"), std::string::npos);
}

TEST(ParseCorpus, JsonlRoundTripIsBitIdentical) {
  std::mt19937_64 rng(3);
  std::vector<Conversation> convs;
  for (int i = 0; i < 50; ++i) {
    auto c = support::random_conversation(rng, "r" + std::to_string(i), 6, 15);
    c.turns[0].text = "quote \" backslash \\ tab \t unicode \xc3\xa9";
    convs.push_back(c);
  }
  const auto once = serialize_jsonl(convs);
  auto parsed = parse_corpus(once, CorpusFormat::kGenericJsonl);
  ASSERT_TRUE(parsed.diagnostics.empty());
  EXPECT_EQ(parsed.conversations, convs);
  EXPECT_EQ(serialize_jsonl(parsed.conversations), once);
}

TEST(Validate, ValidConversationHasEmptyReport) {
  EXPECT_TRUE(validate(make_conversation("v", {{"a", "b", "1"}, {"b", "c", "2"}, {"c", "a", "3"}})).ok());
}

TEST(Validate, OrderingViolationIsNamed) {
  auto c = make_conversation("v", {{"a", "b", "1"}, {"b", "c", "2"}, {"c", "a", "3"}});
  c.turns[1].index = 3;
  c.turns[2].index = 2;
  auto r = validate(c);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_NE(r.violations[0].find("ordering violation"), std::string::npos);
}

TEST(Validate, DerivedSetMismatchIsNamed) {
  auto c = make_conversation("v", {{"a", "b", "1"}, {"b", "c", "2"}});
  c.users.erase(UserId("c"));
  auto r = validate(c);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0], "derived-set mismatch: user 'c' missing from users");
}

TEST(Anonymize, TagsFollowFirstAppearanceWithNextSpeakerFirst) {
  auto [anon, alias] = anonymize(xyz(), UserId("y"));
  EXPECT_EQ(alias.tag_of(UserId("y")).value, "[ALEX]");
  EXPECT_EQ(alias.tag_of(UserId("x")).value, "[BENNY]");
  EXPECT_EQ(alias.tag_of(UserId("z")).value, "[CAM]");
  EXPECT_EQ(anon.turns[0].speaker.value, "[BENNY]");
  EXPECT_EQ(anon.turns[0].text, "hi [ALEX]");
  EXPECT_EQ(anon.turns[3].text, "[BENNY]: ok");
  EXPECT_TRUE(validate(anon).ok());
}

TEST(Anonymize, SinglePair) {
  auto c = make_conversation("p", {{"s", "t", "a"}, {"s", "t", "b"}, {"s", "t", "c"}});
  auto [anon, alias] = anonymize(c, UserId("s"));
  for (const auto& t : anon.turns) EXPECT_EQ(t.speaker.value, "[ALEX]");
}

TEST(Anonymize, SevenUsersOverflow) {
  std::vector<std::array<std::string, 3>> rows;
  for (int i = 0; i < 7; ++i) rows.push_back({"u" + std::to_string(i), "u" + std::to_string((i + 1) % 7), "m"});
  try {
    anonymize(make_conversation("big", rows), UserId("u0"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kAnonymizationOverflow);
  }
  try {
    anonymize(xyz(), UserId("nobody"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidNextSpeaker);
  }
}

TEST(Anonymize, LongestMatchFirstAndWordBoundaries) {
  auto c = make_conversation("m", {{"al", "alice", "alice and al, not also or alicex"}, {"alice", "al", "ok al"}});
  auto [anon, alias] = anonymize(c, UserId("alice"));
  EXPECT_EQ(anon.turns[0].text, "[ALEX] and [BENNY], not also or alicex");
  EXPECT_EQ(anon.turns[1].text, "ok [BENNY]");
}

TEST(Anonymize, DeterministicAndStructurePreserving) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    auto c = support::random_conversation(rng, "d" + std::to_string(i), 6, 15);
    const auto next = c.turns.back().speaker;
    auto [a1, m1] = anonymize(c, next);
    auto [a2, m2] = anonymize(c, next);
    EXPECT_EQ(m1.assignments, m2.assignments);
    EXPECT_EQ(a1, a2);

    // Map the original graph through the alias map; it must equal the anonymized graph.
    for (auto scope : {MetricScope::kFull, MetricScope::kContextOnly}) {
      auto orig = build_graphs(c, scope);
      auto anon = build_graphs(a1, scope);
      UndirectedGraph mapped;
      for (const auto& n : orig.undirected.nodes()) mapped.add_node(m1.tag_of(n));
      for (const auto& [x, y] : orig.undirected.edges()) mapped.add_edge(m1.tag_of(x), m1.tag_of(y));
      EXPECT_EQ(mapped, anon.undirected);
      for (const auto& [e, w] : orig.directed.edges()) {
        EXPECT_EQ(anon.directed.weight(m1.tag_of(e.first), m1.tag_of(e.second)), w);
      }
      EXPECT_EQ(orig.directed.edges().size(), anon.directed.edges().size());
    }
  }
}
