#include "iths/checks.hpp"
#include "iths/sim.hpp"

#include <gtest/gtest.h>

using namespace iths;

namespace
{
    const Value A{0xA};
    const Value B{0xB};

    SimConfig config(std::uint32_t n, std::uint32_t f, Time delta = 100, Time gst = 0)
    {
        SimConfig c;
        c.n = n;
        c.f = f;
        c.delta = delta;
        c.small_delta = delta;
        c.gst = gst;
        c.max_time = gst + 400 * delta;
        c.seed = 11;
        return c;
    }

    std::vector<Value> same(std::uint32_t n, Value v) { return std::vector<Value>(n, v); }
} // namespace

TEST(SimConfig, Validation)
{
    auto c = config(4, 1);
    EXPECT_NO_THROW(c.validate());
    c.small_delta = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = config(4, 1);
    c.small_delta = 101;
    EXPECT_THROW(c.validate(), ConfigError);
    c = config(3, 1);
    EXPECT_THROW(c.validate(), ConfigError);
    c = config(4, 1);
    c.gst = -1;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Simulator, RejectsWrongInputCount)
{
    EXPECT_THROW(Simulator(config(4, 1), {}, same(3, A)), ConfigError);
}

TEST(Simulator, HappyPathDecidesWithinElevenDelta)
{
    const auto tr = run(config(4, 1), {}, same(4, A));
    EXPECT_EQ(tr.outcome, Outcome::AllDecided);
    EXPECT_TRUE(check_agreement(tr).ok);
    EXPECT_TRUE(check_validity(tr).ok);
    EXPECT_TRUE(check_terminate_by(tr, 11 * 100).ok) << check_terminate_by(tr, 1100).detail;
    EXPECT_TRUE(check_latency_bound(tr).ok) << check_latency_bound(tr).detail;
}

TEST(Simulator, OptimisticDelay)
{
    auto c = config(4, 1);
    c.small_delta = 10;
    const auto tr = run(c, {}, same(4, B));
    EXPECT_TRUE(check_optimistic_bound(tr).ok) << check_optimistic_bound(tr).detail;
    EXPECT_TRUE(check_terminate_by(tr, 110).ok);
}

TEST(Simulator, DeterministicTraces)
{
    AdversarySpec adv;
    adv.net.kind = NetPolicyKind::RandomUniform;
    adv.corrupt[3] = Strategy::EquivocatingPrimary;
    auto c = config(4, 1, 100, 2000);
    const auto a = run(c, adv, {A, B, A, B});
    const auto b = run(c, adv, {A, B, A, B});
    EXPECT_EQ(a.events, b.events);
    c.seed = 12;
    const auto d = run(c, adv, {A, B, A, B});
    EXPECT_NE(a.events, d.events);
}

TEST(Channel, RejectsForgedSender)
{
    AdversarySpec adv;
    adv.corrupt[4] = Strategy::Silent;
    Simulator sim(config(4, 1), adv, same(4, A));
    EXPECT_FALSE(sim.inject(1, 2, encode(Message::done(B))));
    EXPECT_TRUE(sim.inject(4, 2, encode(Message::done(B))));
    EXPECT_EQ(sim.rejected(), 1u);
}

TEST(Channel, RejectsOversizedAndMalformed)
{
    AdversarySpec adv;
    adv.corrupt[4] = Strategy::Silent;
    Simulator sim(config(4, 1), adv, same(4, A));
    EXPECT_FALSE(sim.inject(4, 2, std::vector<Word>(8, 1)));
    EXPECT_FALSE(sim.inject(4, 2, {static_cast<Word>(Kind::Echo), 1}));
    EXPECT_FALSE(sim.inject(4, 9, encode(Message::done(B))));
    EXPECT_EQ(sim.rejected(), 3u);
}

TEST(Channel, InjectedMessageDeliveredWithTrueSender)
{
    AdversarySpec adv;
    adv.corrupt[4] = Strategy::Silent;
    Simulator sim(config(4, 1), adv, same(4, A));
    ASSERT_TRUE(sim.inject(4, 2, encode(Message::done(B))));
    const auto tr = sim.run();
    bool seen = false;
    for (const auto &e : tr.events)
    {
        if (e.dir == Dir::Recv && e.party == 2 && e.msg->kind == Kind::Done && e.msg->val == B)
        {
            EXPECT_EQ(e.sender, 4u);
            seen = true;
        }
    }
    EXPECT_TRUE(seen);
}

TEST(Channel, EverySendDeliveredOnce)
{
    AdversarySpec adv;
    adv.net.kind = NetPolicyKind::RandomUniform;
    auto c = config(4, 1, 100, 3000);
    c.max_time = 1'000'000;
    Simulator sim(c, adv, {A, B, A, B});
    const auto tr = sim.run();
    std::size_t sends = 0;
    std::size_t recvs = 0;
    for (const auto &e : tr.events)
    {
        sends += e.dir == Dir::Send;
        recvs += e.dir == Dir::Recv || e.dir == Dir::Drop;
    }
    EXPECT_GE(sends, recvs);
    EXPECT_EQ(tr.outcome, Outcome::AllDecided);
}

TEST(Clock, OffsetsBeforeGstOnly)
{
    AdversarySpec adv;
    adv.clock_offsets = {50, -100, 0, 100};
    Simulator sim(config(4, 1, 100, 5000), adv, same(4, A));
    EXPECT_EQ(sim.clock_now(1, 1000), 1050);
    EXPECT_EQ(sim.clock_now(2, 1000), 900);
    EXPECT_EQ(sim.clock_now(1, 5000), 5000);
    EXPECT_EQ(sim.clock_now(4, 7000), 7000);
    // Two parties may disagree by up to 2Δ.
    EXPECT_EQ(sim.clock_now(4, 1000) - sim.clock_now(2, 1000), 200);
}

TEST(Clock, TimerAcrossGst)
{
    AdversarySpec adv;
    adv.clock_offsets = {50, -100, 0, 100};
    Simulator sim(config(4, 1, 100, 5000), adv, same(4, A));
    EXPECT_EQ(sim.timer_fire_time(1, 1000, 1100), 2100) << "pre-GST throughout";
    EXPECT_EQ(sim.timer_fire_time(1, 4500, 1100), 5650) << "fast clock snaps back";
    EXPECT_EQ(sim.timer_fire_time(2, 4500, 1100), 5500) << "slow clock jumps forward at GST";
    EXPECT_EQ(sim.timer_fire_time(2, 4000, 1100), 5000) << "expiry overtaken by the jump";
    EXPECT_EQ(sim.timer_fire_time(3, 6000, 1100), 7100);
}

TEST(Clock, OffsetsOutOfRangeRejected)
{
    AdversarySpec adv;
    adv.clock_offsets = {0, 0, 0, 101};
    EXPECT_THROW(Simulator(config(4, 1), adv, same(4, A)), ConfigError);
}

TEST(Simulator, LateGstStillSafeAndLive)
{
    for (auto policy : {NetPolicyKind::MaxDelay, NetPolicyKind::RandomUniform, NetPolicyKind::TargetedStall})
    {
        AdversarySpec adv;
        adv.net.kind = policy;
        adv.net.victims = {1};
        auto c = config(4, 1, 100, 10'000);
        const auto tr = run(c, adv, {A, B, B, A});
        EXPECT_TRUE(check_agreement(tr).ok);
        EXPECT_EQ(tr.outcome, Outcome::AllDecided) << policy_name(policy);
        EXPECT_TRUE(check_latency_bound(tr).ok) << check_latency_bound(tr).detail;
        EXPECT_TRUE(check_abort_propagation(tr).ok) << check_abort_propagation(tr).detail;
        EXPECT_TRUE(check_termination_propagation(tr).ok) << check_termination_propagation(tr).detail;
    }
}

TEST(Crash, DownPartyLosesMessagesAndRecovers)
{
    AdversarySpec adv;
    adv.crash_plan = {CrashEvent{2, 150, 900}};
    const auto tr = run(config(4, 1), adv, {A, B, A, B});
    std::size_t drops = 0;
    bool rebooted = false;
    for (const auto &e : tr.events)
    {
        drops += e.dir == Dir::Drop && e.party == 2;
        rebooted |= e.dir == Dir::Reboot && e.party == 2;
    }
    EXPECT_GT(drops, 0u);
    EXPECT_TRUE(rebooted);
    EXPECT_EQ(tr.outcome, Outcome::AllDecided);
    EXPECT_TRUE(check_agreement(tr).ok);
}

TEST(Crash, CrashedPrimaryForcesViewChange)
{
    AdversarySpec adv;
    adv.crash_plan = {CrashEvent{2, 0, 5000}};
    const auto tr = run(config(4, 1), adv, same(4, A));
    EXPECT_EQ(tr.outcome, Outcome::AllDecided);
    EXPECT_TRUE(check_validity(tr).ok);
    const auto m = meter(tr);
    EXPECT_GT(m.max_view[0], 1);
}

TEST(Crash, RebootAfterDecisionStillAnswers)
{
    AdversarySpec adv;
    adv.crash_plan = {CrashEvent{1, 900, 950}, CrashEvent{3, 0, 4000}};
    const auto tr = run(config(4, 1), adv, same(4, A));
    EXPECT_EQ(tr.outcome, Outcome::AllDecided);
    EXPECT_TRUE(check_agreement(tr).ok);
}

TEST(Crash, CorruptPartyCannotCrash)
{
    AdversarySpec adv;
    adv.corrupt[2] = Strategy::Silent;
    adv.crash_plan = {CrashEvent{2, 0, 10}};
    EXPECT_THROW(run(config(4, 1), adv, same(4, A)), ConfigError);
}

TEST(Simulator, HorizonReportedDistinctly)
{
    auto c = config(4, 1, 100, 1'000'000);
    c.max_time = 5000;
    AdversarySpec adv;
    adv.net.kind = NetPolicyKind::MaxDelay;
    const auto tr = run(c, adv, same(4, A));
    EXPECT_EQ(tr.outcome, Outcome::Horizon);
    EXPECT_EQ(tr.end_time, 5000);
    EXPECT_FALSE(check_terminate_by(tr, 5000).ok);
}
