#pragma once

#include "iths/message.hpp"
#include "iths/party.hpp"
#include "iths/types.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace iths
{
    using Time = std::int64_t;

    /// Seeded generator with a portable range mapping, so replays agree across
    /// standard libraries.
    class Rng
    {
    public:
        explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

        std::uint64_t next() { return engine_(); }

        /// Uniform-ish integer in [lo, hi]; returns lo when hi <= lo.
        std::int64_t between(std::int64_t lo, std::int64_t hi)
        {
            if (hi <= lo)
            {
                return lo;
            }
            const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
            return lo + static_cast<std::int64_t>(engine_() % span);
        }

        bool chance(std::uint32_t percent) { return between(0, 99) < static_cast<std::int64_t>(percent); }

        template <typename T>
        const T &pick(const std::vector<T> &items)
        {
            return items[static_cast<std::size_t>(between(0, static_cast<std::int64_t>(items.size()) - 1))];
        }

    private:
        std::mt19937_64 engine_;
    };

    /// Derives independent child seeds from one master seed.
    inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt)
    {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // --------------------------------------------------------------- strategies

    enum class Strategy : std::uint8_t
    {
        Silent,
        EquivocatingPrimary,
        StaleKey,
        LockBreaker,
        DoneSpammer,
        AbortSpammer,
    };

    inline constexpr std::array<std::pair<Strategy, std::string_view>, 6> kStrategyNames = {{
        {Strategy::Silent, "silent"},
        {Strategy::EquivocatingPrimary, "equivocating_primary"},
        {Strategy::StaleKey, "stale_key"},
        {Strategy::LockBreaker, "lock_breaker"},
        {Strategy::DoneSpammer, "done_spammer"},
        {Strategy::AbortSpammer, "abort_spammer"},
    }};

    inline std::string_view strategy_name(Strategy s)
    {
        for (auto [k, name] : kStrategyNames)
        {
            if (k == s)
            {
                return name;
            }
        }
        return "?";
    }

    inline std::optional<Strategy> strategy_from_name(std::string_view name)
    {
        for (auto [k, n] : kStrategyNames)
        {
            if (n == name)
            {
                return k;
            }
        }
        return std::nullopt;
    }

    inline std::vector<Strategy> all_strategies()
    {
        std::vector<Strategy> out;
        for (auto [k, name] : kStrategyNames)
        {
            out.push_back(k);
        }
        return out;
    }

    /// Fabricated value no honest party holds as input.
    inline Value fabricated_value(PartyId id) { return Value{0xBAD000 + id}; }

    /// Local state of one corrupt party.
    struct ByzantineState
    {
        PartyId id = 0;
        Strategy strategy = Strategy::Silent;
        std::uint32_t n = 0;
        std::uint32_t f = 0;
        /// Two values to play against each other; filled from the honest inputs.
        Value left;
        Value right;
        View highest_view_seen = kNoPrev;
        View highest_abort_sent = kNoPrev;
    };

    struct ByzStart
    {
        View first_view = 1;
    };

    struct ByzDelivered
    {
        PartyId from = 0;
        Message msg;
    };

    using ByzEvent = std::variant<ByzStart, ByzDelivered>;

    namespace detail
    {
        inline void to_all(std::vector<Send> &out, std::uint32_t n, const Message &m)
        {
            for (PartyId j = 1; j <= n; ++j)
            {
                out.push_back(Send{j, m});
            }
        }

        /// Lower-numbered half gets `a`, the rest get `b`.
        inline void split(std::vector<Send> &out, std::uint32_t n, const Message &a, const Message &b)
        {
            for (PartyId j = 1; j <= n; ++j)
            {
                out.push_back(Send{j, j <= n / 2 ? a : b});
            }
        }

        inline void enter_view(ByzantineState &st, View v, std::vector<Send> &out)
        {
            const Committee c(st.n, st.f);
            const Value x = fabricated_value(st.id);
            const View below = std::max<View>(v - 1, 0);
            const View two_below = std::max<View>(v - 2, kNoPrev);
            switch (st.strategy)
            {
            case Strategy::Silent:
                break;
            case Strategy::EquivocatingPrimary:
                to_all(out, st.n, Message::request(v));
                if (c.primary_of(v) == st.id)
                {
                    split(out, st.n, Message::propose(below, st.left, v), Message::propose(below, st.right, v));
                }
                for (Kind k : {Kind::Echo, Kind::Key1, Kind::Key2, Kind::Key3, Kind::Lock})
                {
                    split(out, st.n, Message::vote(k, st.left, v), Message::vote(k, st.right, v));
                }
                split(out, st.n, Message::done(st.left), Message::done(st.right));
                break;
            case Strategy::StaleKey:
                to_all(out, st.n, Message::request(v));
                out.push_back(Send{c.primary_of(v), Message::suggest(below, x, below, x, two_below, v)});
                to_all(out, st.n, Message::proof(below, x, two_below, v));
                if (c.primary_of(v) == st.id)
                {
                    to_all(out, st.n, Message::propose(below, x, v));
                }
                break;
            case Strategy::LockBreaker:
                to_all(out, st.n, Message::request(v));
                to_all(out, st.n, Message::proof(below, x, two_below, v));
                to_all(out, st.n, Message::vote(Kind::Echo, x, v));
                to_all(out, st.n, Message::vote(Kind::Key1, x, v));
                if (c.primary_of(v) == st.id)
                {
                    to_all(out, st.n, Message::propose(below, x, v));
                }
                break;
            case Strategy::DoneSpammer:
                to_all(out, st.n, Message::done(x));
                break;
            case Strategy::AbortSpammer: {
                const View a = std::max(v, st.highest_abort_sent) + 1;
                st.highest_abort_sent = a;
                to_all(out, st.n, Message::abort(a));
                break;
            }
            }
        }
    } // namespace detail

    /// One step of a corrupt party. Corrupt parties learn which views are live
    /// from honest request messages and react once per view.
    inline std::vector<Send> byzantine_step(ByzantineState &st, const ByzEvent &ev)
    {
        std::vector<Send> out;
        View v = kNoPrev;
        if (const auto *s = std::get_if<ByzStart>(&ev))
        {
            v = s->first_view;
            if (st.strategy == Strategy::DoneSpammer)
            {
                detail::to_all(out, st.n, Message::done(fabricated_value(st.id)));
                st.highest_view_seen = v;
                return out;
            }
        }
        else if (const auto *d = std::get_if<ByzDelivered>(&ev))
        {
            if (d->msg.kind != Kind::Request)
            {
                return out;
            }
            v = d->msg.view;
        }
        if (v <= st.highest_view_seen)
        {
            return out;
        }
        st.highest_view_seen = v;
        detail::enter_view(st, v, out);
        return out;
    }

    // ------------------------------------------------------------ net policies

    enum class NetPolicyKind : std::uint8_t
    {
        Eager,
        MaxDelay,
        RandomUniform,
        TargetedStall,
    };

    inline constexpr std::array<std::pair<NetPolicyKind, std::string_view>, 4> kPolicyNames = {{
        {NetPolicyKind::Eager, "eager"},
        {NetPolicyKind::MaxDelay, "max_delay"},
        {NetPolicyKind::RandomUniform, "random_uniform"},
        {NetPolicyKind::TargetedStall, "targeted_stall"},
    }};

    inline std::string_view policy_name(NetPolicyKind k)
    {
        for (auto [p, name] : kPolicyNames)
        {
            if (p == k)
            {
                return name;
            }
        }
        return "?";
    }

    inline std::optional<NetPolicyKind> policy_from_name(std::string_view name)
    {
        for (auto [p, n] : kPolicyNames)
        {
            if (n == name)
            {
                return p;
            }
        }
        return std::nullopt;
    }

    struct NetPolicy
    {
        NetPolicyKind kind = NetPolicyKind::Eager;
        std::vector<PartyId> victims; // TargetedStall only

        friend bool operator==(const NetPolicy &, const NetPolicy &) = default;
    };

    /// Delivery window of one message: [earliest, deadline].
    struct DeliveryWindow
    {
        PartyId sender = 0;
        PartyId recipient = 0;
        Time earliest = 0;
        Time deadline = 0;
    };

    /// Picks a delivery time inside the window.
    inline Time choose_delivery(const NetPolicy &policy, const DeliveryWindow &w, Rng &rng)
    {
        Time t = w.earliest;
        switch (policy.kind)
        {
        case NetPolicyKind::Eager:
            t = w.earliest;
            break;
        case NetPolicyKind::MaxDelay:
            t = w.deadline;
            break;
        case NetPolicyKind::RandomUniform:
            t = rng.between(w.earliest, w.deadline);
            break;
        case NetPolicyKind::TargetedStall: {
            const auto &v = policy.victims;
            const bool hit = std::find(v.begin(), v.end(), w.sender) != v.end() ||
                             std::find(v.begin(), v.end(), w.recipient) != v.end();
            t = hit ? w.deadline : w.earliest;
            break;
        }
        }
        return std::clamp(t, w.earliest, w.deadline);
    }

    // ------------------------------------------------------------ full spec

    struct CrashEvent
    {
        PartyId party = 0;
        Time crash_at = 0;
        Time reboot_at = 0;

        friend bool operator==(const CrashEvent &, const CrashEvent &) = default;
    };

    struct AdversarySpec
    {
        std::map<PartyId, Strategy> corrupt;
        NetPolicy net;
        std::vector<CrashEvent> crash_plan;
        /// Per-party clock offsets before GST; empty means drawn from the seed.
        std::vector<Time> clock_offsets;
        /// Test-only: permits more than f corrupt parties.
        bool allow_excess_corruption = false;

        [[nodiscard]] bool is_corrupt(PartyId p) const { return corrupt.contains(p); }

        void validate(std::uint32_t n, std::uint32_t f) const
        {
            if (corrupt.size() > f && !allow_excess_corruption)
            {
                throw ConfigError("at most f=" + std::to_string(f) + " parties may be corrupt");
            }
            for (const auto &[p, s] : corrupt)
            {
                if (p == 0 || p > n)
                {
                    throw ConfigError("corrupt party " + std::to_string(p) + " out of range");
                }
            }
            for (const auto &c : crash_plan)
            {
                if (c.party == 0 || c.party > n)
                {
                    throw ConfigError("crash plan names party " + std::to_string(c.party) + " out of range");
                }
                if (is_corrupt(c.party))
                {
                    throw ConfigError("crash plan party " + std::to_string(c.party) + " is corrupt");
                }
                if (c.reboot_at < c.crash_at)
                {
                    throw ConfigError("reboot before crash for party " + std::to_string(c.party));
                }
            }
            if (!clock_offsets.empty() && clock_offsets.size() != n)
            {
                throw ConfigError("clock_offsets must have n entries");
            }
        }
    };
} // namespace iths
