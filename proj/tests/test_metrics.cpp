#include "iths/checks.hpp"
#include "iths/metrics.hpp"

#include <gtest/gtest.h>

using namespace iths;

namespace
{
    const Value A{0xA};
    const Value B{0xB};

    SimConfig config(std::uint32_t n, std::uint32_t f, Time gst = 0, std::uint64_t seed = 3)
    {
        SimConfig c;
        c.n = n;
        c.f = f;
        c.delta = 100;
        c.small_delta = 100;
        c.gst = gst;
        c.max_time = gst + 500 * c.delta;
        c.seed = seed;
        return c;
    }

    std::vector<Value> alternating(std::uint32_t n)
    {
        std::vector<Value> v;
        for (std::uint32_t i = 0; i < n; ++i)
        {
            v.push_back(i % 2 ? B : A);
        }
        return v;
    }
} // namespace

TEST(Meter, HappyPathLargestMessageIsSuggest)
{
    const auto tr = run(config(4, 1), {}, std::vector<Value>(4, A));
    const auto m = meter(tr);
    EXPECT_EQ(m.max_message_words, 7u);
    EXPECT_FALSE(m.oversized.has_value());
    EXPECT_TRUE(m.replay_consistent) << m.replay_mismatch;
    for (PartyId p = 1; p <= 4; ++p)
    {
        ASSERT_TRUE(m.decision_value[p - 1].has_value());
        EXPECT_EQ(*m.decision_value[p - 1], A);
    }
}

TEST(Meter, PairWordsInvariantInN)
{
    std::vector<std::size_t> maxima;
    for (std::uint32_t f : {1u, 2u, 3u})
    {
        const std::uint32_t n = 3 * f + 1;
        AdversarySpec adv;
        adv.corrupt[2] = Strategy::Silent; // forces a view change
        const auto tr = run(config(n, f), adv, alternating(n));
        const auto m = meter(tr);
        EXPECT_LE(m.max_pair_words, kPairWordBound) << m.max_pair_witness;
        EXPECT_TRUE(check_word_bounds(tr, m).ok);
        maxima.push_back(m.max_pair_words);
    }
    EXPECT_EQ(maxima[0], maxima[1]);
    EXPECT_EQ(maxima[1], maxima[2]);
}

TEST(Meter, PersistentConstantTransientLinear)
{
    std::vector<std::size_t> persistent;
    for (std::uint32_t f : {1u, 2u, 3u})
    {
        const std::uint32_t n = 3 * f + 1;
        AdversarySpec adv;
        adv.net.kind = NetPolicyKind::RandomUniform;
        const auto tr = run(config(n, f, 5000), adv, alternating(n));
        const auto m = meter(tr);
        EXPECT_EQ(m.persistent_words_min, m.persistent_words_max);
        persistent.push_back(m.persistent_words_max);
        EXPECT_LE(m.transient_words_max, kTransientPerN * n);
        EXPECT_GT(m.max_view[0], 2) << "late GST should force several views";
    }
    EXPECT_EQ(persistent[0], persistent[1]);
    EXPECT_EQ(persistent[1], persistent[2]);
}

TEST(Meter, PureFunctionOfTrace)
{
    AdversarySpec adv;
    adv.corrupt[1] = Strategy::LockBreaker;
    const auto tr = run(config(4, 1, 2000), adv, alternating(4));
    const auto a = meter(tr);
    const auto b = meter(tr);
    EXPECT_EQ(a.per_view.size(), b.per_view.size());
    EXPECT_EQ(a.max_pair_words, b.max_pair_words);
    EXPECT_EQ(a.transient_words_max, b.transient_words_max);
    EXPECT_EQ(a.c_fit, b.c_fit);
}

TEST(Meter, DetectsTamperedTrace)
{
    auto tr = run(config(4, 1), {}, std::vector<Value>(4, A));
    for (auto &e : tr.events)
    {
        if (e.dir == Dir::Send && e.msg->kind == Kind::Echo)
        {
            e.msg->val = B;
            break;
        }
    }
    EXPECT_FALSE(meter(tr).replay_consistent);
}

TEST(Meter, CrashRunReplaysConsistently)
{
    AdversarySpec adv;
    adv.crash_plan = {CrashEvent{3, 250, 1200}};
    const auto tr = run(config(4, 1), adv, alternating(4));
    const auto m = meter(tr);
    EXPECT_TRUE(m.replay_consistent) << m.replay_mismatch;
    EXPECT_EQ(m.persistent_words_min, m.persistent_words_max);
}

TEST(Meter, TotalWordsQuadratic)
{
    std::vector<double> fits;
    for (std::uint32_t f : {1u, 2u, 3u})
    {
        const std::uint32_t n = 3 * f + 1;
        const auto m = meter(run(config(n, f), {}, alternating(n)));
        fits.push_back(m.c_fit);
        EXPECT_LE(m.c_fit, static_cast<double>(kPairWordBound));
    }
    EXPECT_GT(fits[0], 0.0);
}
