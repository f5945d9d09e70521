#include "iths/message.hpp"

#include <gtest/gtest.h>

using namespace iths;

namespace
{
    const Value A{0xA};
    const Value B{0xB};
} // namespace

TEST(Committee, RejectsNotMoreThanThreeF)
{
    EXPECT_THROW(Committee(3, 1), ConfigError);
    EXPECT_THROW(Committee(0, 0), ConfigError);
    EXPECT_NO_THROW(Committee(4, 1));
    EXPECT_NO_THROW(Committee(1, 0));
}

TEST(Committee, PrimaryIsRoundRobin)
{
    const Committee c(4, 1);
    EXPECT_EQ(c.primary_of(0), 1u);
    EXPECT_EQ(c.primary_of(1), 2u);
    EXPECT_EQ(c.primary_of(4), 1u);
    EXPECT_EQ(c.primary_of(7), 4u);
}

TEST(Committee, Quorums)
{
    const Committee c(7, 2);
    EXPECT_EQ(c.small_quorum(), 3u);
    EXPECT_EQ(c.large_quorum(), 5u);
}

TEST(Encoding, WordCountsMatchTable)
{
    EXPECT_EQ(encode(Message::request(3)).size(), 2u);
    EXPECT_EQ(encode(Message::abort(3)).size(), 2u);
    EXPECT_EQ(encode(Message::done(A)).size(), 2u);
    EXPECT_EQ(encode(Message::vote(Kind::Echo, A, 3)).size(), 3u);
    EXPECT_EQ(encode(Message::vote(Kind::Lock, A, 3)).size(), 3u);
    EXPECT_EQ(encode(Message::propose(2, A, 3)).size(), 4u);
    EXPECT_EQ(encode(Message::proof(2, A, 1, 3)).size(), 5u);
    EXPECT_EQ(encode(Message::suggest(2, A, 2, A, 1, 3)).size(), 7u);
    for (std::size_t k = 0; k < kKindCount; ++k)
    {
        EXPECT_LE(word_count(static_cast<Kind>(k)), kMaxMessageWords);
    }
}

TEST(Encoding, DoneCarriesNoView)
{
    const auto w = encode(Message::done(B));
    ASSERT_EQ(w.size(), 2u);
    EXPECT_EQ(w[0], static_cast<Word>(Kind::Done));
    EXPECT_EQ(w[1], value_word(B));
}

TEST(Encoding, SuggestLayout)
{
    const auto w = encode(Message::suggest(5, B, 5, B, 2, 7));
    const std::vector<Word> expected = {static_cast<Word>(Kind::Suggest), 7, 5, 0xB, 5, 0xB, 2};
    EXPECT_EQ(w, expected);
}

TEST(Encoding, RoundTripsEveryKind)
{
    const std::vector<Message> all = {
        Message::request(4),         Message::suggest(3, A, 2, B, 1, 4), Message::proof(2, A, -1, 4),
        Message::propose(3, B, 4),   Message::vote(Kind::Echo, A, 4),    Message::vote(Kind::Key1, A, 4),
        Message::vote(Kind::Key2, A, 4), Message::vote(Kind::Key3, A, 4), Message::vote(Kind::Lock, A, 4),
        Message::done(B),            Message::abort(9),                  Message::recover_query(4),
        Message::recover_reply(4),
    };
    for (const auto &m : all)
    {
        const auto w = encode(m);
        const auto back = decode(w);
        ASSERT_TRUE(back.has_value()) << to_string(m);
        EXPECT_EQ(*back, m) << to_string(m);
    }
}

TEST(Encoding, DecodeRejectsMalformed)
{
    EXPECT_FALSE(decode(std::vector<Word>{}).has_value());
    EXPECT_FALSE(decode(std::vector<Word>{99, 1}).has_value());
    EXPECT_FALSE(decode(std::vector<Word>{-1, 1}).has_value());
    EXPECT_FALSE(decode(std::vector<Word>{static_cast<Word>(Kind::Echo), 1}).has_value());
    EXPECT_FALSE(decode(std::vector<Word>{static_cast<Word>(Kind::Request), 1, 2}).has_value());
}

TEST(Kinds, NamesRoundTrip)
{
    for (std::size_t k = 0; k < kKindCount; ++k)
    {
        const auto kind = static_cast<Kind>(k);
        EXPECT_EQ(kind_from_name(kind_name(kind)), kind);
    }
    EXPECT_FALSE(kind_from_name("nope").has_value());
}

TEST(Kinds, ViewExemptSet)
{
    EXPECT_TRUE(is_view_exempt(Kind::Abort));
    EXPECT_TRUE(is_view_exempt(Kind::Done));
    EXPECT_TRUE(is_view_exempt(Kind::Request));
    EXPECT_TRUE(is_view_exempt(Kind::RecoverQuery));
    EXPECT_TRUE(is_view_exempt(Kind::RecoverReply));
    EXPECT_FALSE(is_view_exempt(Kind::Echo));
    EXPECT_FALSE(is_view_exempt(Kind::Propose));
}
