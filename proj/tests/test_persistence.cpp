#include "iths/persistence.hpp"

#include <gtest/gtest.h>

using namespace iths;

namespace
{
    const Value A{0xA};
    const Value B{0xB};

    bool has_send(const std::vector<Action> &actions, PartyId to, const Message &m)
    {
        for (const auto &a : actions)
        {
            if (const auto *s = std::get_if<Send>(&a); s && s->to == to && s->msg == m)
            {
                return true;
            }
        }
        return false;
    }

    bool sends_to_all(const std::vector<Action> &actions, const Message &m, std::uint32_t n = 4)
    {
        for (PartyId j = 1; j <= n; ++j)
        {
            if (!has_send(actions, j, m))
            {
                return false;
            }
        }
        return true;
    }

    std::size_t count_kind(const std::vector<Action> &actions, Kind k)
    {
        std::size_t c = 0;
        for (const auto &a : actions)
        {
            if (const auto *s = std::get_if<Send>(&a); s && s->msg.kind == k)
            {
                ++c;
            }
        }
        return c;
    }

    PartyState deliver(PartyState s, PartyId from, const Message &m)
    {
        return handle_event(std::move(s), Delivered{from, m}).state;
    }
} // namespace

TEST(Snapshot, FreshPartyImage)
{
    const auto img = snapshot(init_party(1, 4, 1, A).state);
    EXPECT_EQ(img.view, 1);
    EXPECT_EQ(img.lock, (KeySlot{0, A}));
    EXPECT_EQ(img.key1, (KeyHistory{0, A, -1}));
    EXPECT_EQ(img.last_request, 1);
    EXPECT_EQ(img.authored.size(), 2u);
}

TEST(Snapshot, ReflectsKey1BeforeRelease)
{
    auto s = init_party(1, 4, 1, A).state;
    s = handle_event(std::move(s), LocalViewAdvance{7}).state;
    s = deliver(s, 2, Message::vote(Kind::Echo, B, 7));
    s = deliver(s, 3, Message::vote(Kind::Echo, B, 7));
    auto step = handle_event(s, Delivered{4, Message::vote(Kind::Echo, B, 7)});
    ASSERT_FALSE(step.actions.empty());
    EXPECT_TRUE(std::holds_alternative<PersistHint>(step.actions.front()));
    EXPECT_EQ(snapshot(step.state).key1.key, 7);
}

TEST(Snapshot, SizeIndependentOfViewAndN)
{
    std::vector<std::size_t> sizes;
    for (std::uint32_t f : {1u, 2u, 3u})
    {
        const std::uint32_t n = 3 * f + 1;
        auto s = init_party(1, n, f, A).state;
        sizes.push_back(image_words(snapshot(s)));
        for (View v : {3, 50, 300})
        {
            s = handle_event(s, LocalViewAdvance{v}).state;
            sizes.push_back(image_words(snapshot(s)));
        }
        s.done_sent = B;
        s.decided = B;
        sizes.push_back(image_words(snapshot(s)));
    }
    for (auto sz : sizes)
    {
        EXPECT_EQ(sz, sizes.front());
    }
}

TEST(Serialize, RoundTrip)
{
    auto s = init_party(4, 4, 1, A).state;
    s = handle_event(s, LocalViewAdvance{7}).state;
    s.key2 = KeyHistory{5, B, 2};
    s.lock = KeySlot{5, B};
    s.done_sent = B;
    const auto img = snapshot(s);
    const auto words = serialize(img);
    const auto back = deserialize(words);
    ASSERT_TRUE(back.has_value());
    EXPECT_EQ(*back, img);
}

TEST(Serialize, RejectsTruncatedAndCorrupt)
{
    const auto words = serialize(snapshot(init_party(1, 4, 1, A).state));
    EXPECT_FALSE(deserialize(std::span(words).first(words.size() - 1)).has_value());
    auto bad = words;
    bad[0] = 99;
    EXPECT_FALSE(deserialize(bad).has_value());
}

TEST(Reboot, RejoinsSameViewAndResendsRequest)
{
    auto s = init_party(1, 4, 1, A).state;
    s = handle_event(s, LocalViewAdvance{5}).state;
    s.key1 = KeyHistory{4, B, 1};
    const auto step = reboot(snapshot(s), 4, 1);
    EXPECT_EQ(step.state.view, 5);
    EXPECT_EQ(step.state.key1, (KeyHistory{4, B, 1}));
    for (PartyId j = 1; j <= 4; ++j)
    {
        EXPECT_TRUE(has_send(step.actions, j, Message::request(5)));
        EXPECT_TRUE(has_send(step.actions, j, Message::recover_query(5)));
    }
    EXPECT_EQ(count_kind(step.actions, Kind::RecoverQuery), 4u);
    // Transient state starts empty: gates closed, restored messages pending.
    EXPECT_EQ(step.state.highest_request[1], 0);
    const auto *pf = step.state.round.find_authored(Kind::Proof);
    ASSERT_NE(pf, nullptr);
    EXPECT_TRUE(pf->pending[1]);
}

TEST(Reboot, TerminatedPartyStaysTerminatedAndAnswers)
{
    auto s = init_party(1, 4, 1, A).state;
    for (PartyId p = 2; p <= 4; ++p)
    {
        s = deliver(s, p, Message::done(A));
    }
    ASSERT_TRUE(s.terminated());
    const auto step = reboot(snapshot(s), 4, 1);
    EXPECT_TRUE(step.state.terminated());
    EXPECT_TRUE(sends_to_all(step.actions, Message::done(A)));
    EXPECT_EQ(step.actions.size(), 4u);
    const auto reply = handle_recover_query(step.state, 3, 1);
    EXPECT_TRUE(has_send(reply, 3, Message::done(A)));
}

TEST(Reboot, BeforeAnyPersistIsFreshInit)
{
    PersistentImage img;
    img.id = 2;
    img.view = 0;
    img.lock = KeySlot{0, B};
    const auto a = reboot(img, 4, 1);
    const auto b = init_party(2, 4, 1, B);
    EXPECT_EQ(a.state, b.state);
    EXPECT_EQ(a.actions, b.actions);
}

TEST(RecoverQuery, SameViewIncludesCurrentViewMessages)
{
    auto s = init_party(1, 4, 1, A).state;
    s = handle_event(s, LocalViewAdvance{5}).state;
    const auto reply = handle_recover_query(s, 3, 5);
    EXPECT_TRUE(has_send(reply, 3, Message::request(5)));
    EXPECT_TRUE(has_send(reply, 3, Message::proof(0, A, -1, 5)));
    EXPECT_TRUE(has_send(reply, 3, Message::recover_reply(5)));
}

TEST(RecoverQuery, OtherViewOnlyLastMessages)
{
    auto s = init_party(1, 4, 1, A).state;
    s = handle_event(s, LocalViewAdvance{9}).state;
    s = handle_event(s, ViewTimerFired{9}).state;
    const auto reply = handle_recover_query(s, 3, 5);
    EXPECT_TRUE(has_send(reply, 3, Message::request(9)));
    EXPECT_TRUE(has_send(reply, 3, Message::abort(9)));
    EXPECT_EQ(count_kind(reply, Kind::Proof), 0u);
    EXPECT_EQ(count_kind(reply, Kind::Done), 0u) << "never sent done";
}

TEST(RecoverQuery, ReplySizeConstant)
{
    for (std::uint32_t f : {1u, 3u})
    {
        auto s = init_party(1, 3 * f + 1, f, A).state;
        s = handle_event(s, LocalViewAdvance{5}).state;
        EXPECT_LE(handle_recover_query(s, 2, 5).size(), 12u);
    }
}
