#include <gtest/gtest.h>

#include "infoneed/io.hpp"
#include "infoneed/rng.hpp"
#include "infoneed/text.hpp"

using namespace infoneed;

TEST(Tokenize, Examples) {
    EXPECT_EQ(tokenize("Robin eggs hatch!"), (TokenStream{"robin", "eggs", "hatch"}));
    EXPECT_EQ(tokenize(""), TokenStream{});
    EXPECT_EQ(tokenize("fire-stone 25"), (TokenStream{"fire", "stone", "25"}));
}

TEST(Tokenize, UnicodeLettersAreKeptAndLowercased) {
    EXPECT_EQ(tokenize("Café ÉCOLE"), (TokenStream{"café", "école"}));
    EXPECT_EQ(tokenize("naïve\xe2\x80\x94word"), (TokenStream{"naïve", "word"}));  // U+2014 separates
    EXPECT_EQ(tokenize("a\xff" "b"), (TokenStream{"a", "b"}));         // invalid byte separates
    EXPECT_EQ(tokenize("  \t\n "), TokenStream{});
}

TEST(Text, Helpers) {
    EXPECT_EQ(trim("  x y \n"), "x y");
    EXPECT_EQ(join({"a", "b", "c"}, "|"), "a|b|c");
    EXPECT_TRUE(is_wh_word("when"));
    EXPECT_FALSE(is_wh_word("robin"));
    // never cuts a multibyte sequence
    EXPECT_EQ(truncate_utf8("caf\xc3\xa9", 4), "caf");
    EXPECT_EQ(truncate_utf8("abc", 10), "abc");
}

TEST(Io, SplitHelpers) {
    EXPECT_EQ(split("a\tb\t", '\t'), (std::vector<std::string_view>{"a", "b", ""}));
    EXPECT_EQ(split_whitespace("  q1 0  d1 1 "), (std::vector<std::string_view>{"q1", "0", "d1", "1"}));
}

TEST(Rng, DeterministicAndInRange) {
    DeterministicRng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.uniform_index(7);
        EXPECT_EQ(x, b.uniform_index(7));
        EXPECT_LT(x, 7u);
    }
    DeterministicRng c(1);
    const auto draw = c.sample_without_replacement(20, 20);
    std::vector<std::size_t> sorted(draw.begin(), draw.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(sorted[i], i);
}
