#include "iths/quorum.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace iths;

namespace
{
    const Value A{1};
    const Value B{2};

    QuorumTracker tracker(std::uint32_t n, std::uint32_t f) { return QuorumTracker(n, Thresholds::of(Committee(n, f))); }
} // namespace

TEST(QuorumTracker, FiresOnThirdEchoAtNFour)
{
    auto q = tracker(4, 1);
    EXPECT_TRUE(q.record_vote(Kind::Echo, 1, A).empty());
    EXPECT_TRUE(q.record_vote(Kind::Echo, 2, A).empty());
    const auto fired = q.record_vote(Kind::Echo, 3, A);
    ASSERT_EQ(fired.size(), 1u);
    EXPECT_EQ(fired[0], (Fired{Kind::Echo, A, Level::Large}));
    EXPECT_TRUE(q.record_vote(Kind::Echo, 4, A).empty()) << "fires once";
}

TEST(QuorumTracker, DuplicateSenderIsNoOp)
{
    auto q = tracker(4, 1);
    q.record_vote(Kind::Key1, 1, A);
    q.record_vote(Kind::Key1, 1, A);
    EXPECT_EQ(q.tally(Kind::Key1).count(A), 1u);
}

TEST(QuorumTracker, FirstVoteWins)
{
    auto q = tracker(4, 1);
    q.record_vote(Kind::Key2, 1, A);
    q.record_vote(Kind::Key2, 1, B);
    EXPECT_EQ(q.tally(Kind::Key2).count(A), 1u);
    EXPECT_EQ(q.tally(Kind::Key2).count(B), 0u);
    EXPECT_EQ(q.tally(Kind::Key2).vote_of(1), A);
}

TEST(QuorumTracker, DoneFiresSmallThenLarge)
{
    auto q = tracker(4, 1);
    EXPECT_TRUE(q.record_vote(Kind::Done, 1, A).empty());
    auto second = q.record_vote(Kind::Done, 2, A);
    ASSERT_EQ(second.size(), 1u);
    EXPECT_EQ(second[0].level, Level::Small);
    auto third = q.record_vote(Kind::Done, 3, A);
    ASSERT_EQ(third.size(), 1u);
    EXPECT_EQ(third[0].level, Level::Large);
}

TEST(QuorumTracker, ResetClearsVotesKeepsDone)
{
    auto q = tracker(4, 1);
    for (PartyId p = 1; p <= 3; ++p)
    {
        q.record_vote(Kind::Echo, p, A);
    }
    q.record_vote(Kind::Done, 1, B);
    q.record_vote(Kind::Done, 2, B);
    ASSERT_TRUE(q.fired(Kind::Echo).has_value());
    q.reset_for_view();
    EXPECT_FALSE(q.fired(Kind::Echo).has_value());
    EXPECT_EQ(q.tally(Kind::Echo).count(A), 0u);
    EXPECT_EQ(q.tally(Kind::Done).count(B), 2u);
    EXPECT_EQ(q.fired(Kind::Done, Level::Small), B);
}

TEST(QuorumTracker, UnknownSenderIgnored)
{
    auto q = tracker(4, 1);
    EXPECT_TRUE(q.record_vote(Kind::Echo, 0, A).empty());
    EXPECT_TRUE(q.record_vote(Kind::Echo, 5, A).empty());
    EXPECT_EQ(q.tally(Kind::Echo).count(A), 0u);
}

TEST(Thresholds, SmallAtMostLarge)
{
    for (std::uint32_t f = 0; f <= 5; ++f)
    {
        for (std::uint32_t n = 3 * f + 1; n <= 3 * f + 4; ++n)
        {
            const auto t = Thresholds::of(Committee(n, f));
            EXPECT_LE(t.small, t.large);
            EXPECT_GE(t.large, 2 * f + 1);
        }
    }
}

// Honest parties vote for one value each (they may differ); up to f Byzantine
// senders vote arbitrarily and in any order. Two values must never both reach
// the large threshold, whatever any one observer sees.
TEST(QuorumTracker, NoTwoValuesReachLargeQuorum)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 3000; ++trial)
    {
        const std::uint32_t f = 1 + rng() % 3;
        const std::uint32_t n = 3 * f + 1 + rng() % 3;
        std::vector<Value> honest_vote(n + 1);
        std::set<PartyId> byz;
        while (byz.size() < f)
        {
            byz.insert(1 + rng() % n);
        }
        for (PartyId p = 1; p <= n; ++p)
        {
            honest_vote[p] = Value{1 + rng() % 2};
        }
        // Two observers; Byzantine senders tell each a different story.
        std::set<Value> fired_values;
        for (int observer = 0; observer < 2; ++observer)
        {
            auto q = tracker(n, f);
            std::vector<PartyId> order;
            for (PartyId p = 1; p <= n; ++p)
            {
                order.push_back(p);
            }
            std::shuffle(order.begin(), order.end(), rng);
            for (PartyId p : order)
            {
                const Value v = byz.contains(p) ? Value{static_cast<std::uint64_t>(1 + observer)} : honest_vote[p];
                for (const auto &fe : q.record_vote(Kind::Echo, p, v))
                {
                    fired_values.insert(fe.value);
                }
            }
        }
        EXPECT_LE(fired_values.size(), 1u) << "n=" << n << " f=" << f;
    }
}
