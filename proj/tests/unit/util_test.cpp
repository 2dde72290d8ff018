#include <gtest/gtest.h>

#include <random>
#include <set>

#include "mpcprobe/util.hpp"
#include "test_support.hpp"

using namespace mpcprobe;

TEST(Util, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Util, RoundHalfUpRatio) {
  EXPECT_EQ(round_half_up(Ratio{3, 2}), 2);
  EXPECT_EQ(round_half_up(Ratio{5, 2}), 3);
  EXPECT_EQ(round_half_up(Ratio{4, 3}), 1);
  EXPECT_EQ(round_half_up(Ratio{0, 1}), 0);
  EXPECT_EQ(round_half_up(Ratio{7, 4}), 2);
}

TEST(Util, RatioEqualityIsByValue) {
  EXPECT_EQ((Ratio{2, 4}), (Ratio{1, 2}));
  EXPECT_EQ(make_ratio(6, 4).num, 3);
  EXPECT_EQ(make_ratio(6, 4).den, 2);
}

TEST(Util, UniformIndexIsInRangeAndCoversAllValues) {
  std::mt19937_64 rng(42);
  std::set<std::size_t> seen;
  for (int i = 0; i < 2000; ++i) {
    auto v = uniform_index(rng, 7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
  EXPECT_THROW(uniform_index(rng, 0), std::invalid_argument);
}

TEST(Util, UniformIndexSequenceIsPinned) {
  // The draw sequence must not depend on the standard library's distributions.
  std::mt19937_64 a(7), b(7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(uniform_index(a, 10), uniform_index(b, 10));
}

TEST(Util, AtomicWriteReplacesContent) {
  support::TempDir dir("util");
  const auto p = dir.path() / "nested" / "f.txt";
  write_file_atomic(p, "one");
  write_file_atomic(p, "two");
  EXPECT_EQ(read_file(p), "two");
  EXPECT_THROW(read_file(dir.path() / "missing"), Error);
}

TEST(Util, SplitTrimJoin) {
  EXPECT_EQ(split("a,,b", ','), (std::vector<std::string>{"a", "", "b"}));
  EXPECT_EQ(trim("  x y \n"), "x y");
  EXPECT_EQ(join({"a", "b", "c"}, ", "), "a, b, c");
  EXPECT_EQ(format_fixed(0.0715, 3), "0.071");  // binary value sits below the tie
}
