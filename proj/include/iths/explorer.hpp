#pragma once

#include "iths/message.hpp"
#include "iths/party.hpp"
#include "iths/types.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_set>
#include <utility>
#include <vector>

namespace iths
{
    // Bounded exhaustive search over message orderings and the actions of one
    // Byzantine party. Time is abstracted away: any pending message may be
    // delivered next and a view timeout may fire at any moment.
    //
    // Reductions, each of which keeps every reachable violation reachable:
    //  - requests, self-deliveries and proofs in the recipient's view are
    //    delivered at once;
    //  - a delivery that leaves its recipient silent only moves a tally, so it
    //    is postponed to the delivery that makes the tally fire;
    //  - a party in the last explored view can only be frozen by a view change,
    //    which looks the same as never receiving anything again, so it gets no
    //    timeouts or aborts;
    //  - a vote batch in the last view that commutes with everything else its
    //    recipient can do is explored alone.

    struct ExploreConfig
    {
        std::uint32_t n = 4;
        std::uint32_t f = 1;
        /// Views first_view .. first_view+view_bound-1 are explored; a party
        /// that moves past them is frozen.
        View view_bound = 1;
        std::size_t depth_bound = 1000;
        std::size_t max_states = 4'000'000;
        /// 0 = every party is nonfaulty.
        PartyId byzantine = 0;
        /// Inputs per party; empty means alternating A, B.
        std::vector<Value> inputs;
        /// Lets the Byzantine party use a value no nonfaulty party holds.
        bool fresh_value = true;
        ProtocolOptions options;
    };

    enum class Verdict : std::uint8_t
    {
        Verified,
        Counterexample,
        Inconclusive,
    };

    inline std::string_view verdict_name(Verdict v)
    {
        switch (v)
        {
        case Verdict::Verified:
            return "verified";
        case Verdict::Counterexample:
            return "counterexample";
        case Verdict::Inconclusive:
            return "inconclusive";
        }
        return "?";
    }

    struct ExploreResult
    {
        Verdict verdict = Verdict::Inconclusive;
        std::size_t states = 0;
        std::size_t transitions = 0;
        std::size_t max_depth = 0;
        std::string violation; // counterexample only
        std::vector<std::string> path;
        std::string reason; // inconclusive only
    };

    inline constexpr Value kExploreA{0xA};
    inline constexpr Value kExploreB{0xB};
    inline constexpr Value kExploreFresh{0xC};

    namespace detail::explore
    {
        struct Pending
        {
            PartyId to = 0;
            PartyId from = 0;
            std::array<Word, kMaxMessageWords> words{};
            Message msg;

            static Pending of(PartyId from, PartyId to, const Message &m)
            {
                Pending p{to, from, {}, m};
                const auto w = encode(m);
                std::copy(w.begin(), w.end(), p.words.begin());
                return p;
            }

            friend bool operator<(const Pending &a, const Pending &b)
            {
                return std::tie(a.to, a.from, a.words) < std::tie(b.to, b.from, b.words);
            }
            friend bool operator==(const Pending &a, const Pending &b)
            {
                return a.to == b.to && a.from == b.from && a.words == b.words;
            }
        };

        /// (kind, view, value) of every nonfaulty key1/key2/key3/lock/done sent so far.
        struct LedgerEntry
        {
            Kind kind;
            View view;
            Value value;

            friend auto operator<=>(const LedgerEntry &, const LedgerEntry &) = default;
        };

        struct World
        {
            std::vector<PartyState> parties; // index id-1; the Byzantine slot is unused
            std::vector<Pending> pending;    // sorted, no duplicates
            std::vector<LedgerEntry> ledger; // sorted
        };

        struct Hash128
        {
            std::uint64_t a = 0;
            std::uint64_t b = 0;
            friend bool operator==(const Hash128 &, const Hash128 &) = default;
        };

        struct Hash128Hasher
        {
            std::size_t operator()(const Hash128 &h) const { return static_cast<std::size_t>(h.a ^ (h.b * 31)); }
        };

        class Hasher
        {
        public:
            void add(std::uint64_t x)
            {
                a_ = mix(a_ ^ x, 0x9e3779b97f4a7c15ULL);
                b_ = mix(b_ + x, 0xc2b2ae3d27d4eb4fULL);
            }
            void add(std::int64_t x) { add(static_cast<std::uint64_t>(x)); }
            void add(Value v) { add(v.token); }
            void add(const std::optional<Value> &v)
            {
                add(std::uint64_t{v.has_value()});
                add(v.value_or(Value{}));
            }
            [[nodiscard]] Hash128 digest() const { return {a_, b_}; }

        private:
            static std::uint64_t mix(std::uint64_t z, std::uint64_t k)
            {
                z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL + k;
                z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
                return z ^ (z >> 31);
            }
            std::uint64_t a_ = 0x243f6a8885a308d3ULL;
            std::uint64_t b_ = 0x13198a2e03707344ULL;
        };

        /// Nonfaulty parties vote once per kind and view, so which of them were
        /// counted only matters through the per-value counts. The Byzantine
        /// party's entry is kept as is.
        inline void hash_tally(Hasher &h, const Tally &t, PartyId byz)
        {
            // Once the large level fired, senders and counts are irrelevant.
            const auto large = t.fired(Level::Large);
            h.add(large);
            if (large)
            {
                return;
            }
            h.add(t.fired(Level::Small));
            std::vector<std::uint64_t> values;
            const auto &senders = t.senders();
            for (std::size_t i = 0; i < senders.size(); ++i)
            {
                if (i + 1 != byz && senders[i])
                {
                    values.push_back(senders[i]->token);
                }
            }
            std::sort(values.begin(), values.end());
            h.add(std::uint64_t{values.size()});
            for (auto v : values)
            {
                h.add(v);
            }
            if (byz != 0)
            {
                h.add(senders[byz - 1]);
            }
        }

        inline void hash_message(Hasher &h, const Message &m)
        {
            for (Word w : encode(m))
            {
                h.add(w);
            }
        }

        inline void hash_party(Hasher &h, const PartyState &s, PartyId byz)
        {
            h.add(s.view);
            h.add(s.lock.key);
            h.add(s.lock.val);
            h.add(s.key3.key);
            h.add(s.key3.val);
            for (const auto *k : {&s.key2, &s.key1})
            {
                h.add(k->key);
                h.add(k->val);
                h.add(k->prev);
            }
            for (View v : s.highest_request)
            {
                h.add(v);
            }
            for (View v : s.highest_abort)
            {
                h.add(v);
            }
            h.add(s.done_sent);
            h.add(s.decided);
            h.add(s.last_request);
            h.add(s.last_abort);
            for (Kind k : {Kind::Echo, Kind::Key1, Kind::Key2, Kind::Key3, Kind::Lock, Kind::Done})
            {
                hash_tally(h, s.quorum.tally(k), byz);
            }
            const auto &r = s.round;
            h.add(r.cur_view);
            // Authored messages are flushed as a set.
            std::vector<std::pair<std::array<Word, kMaxMessageWords>, std::uint64_t>> authored;
            for (const auto &a : r.authored)
            {
                std::array<Word, kMaxMessageWords> words{};
                const auto enc = encode(a.msg);
                std::copy(enc.begin(), enc.end(), words.begin());
                std::uint64_t flags = a.only_to;
                for (std::size_t i = 0; i < a.pending.size(); ++i)
                {
                    flags |= std::uint64_t{a.pending[i]} << (8 + i);
                }
                authored.emplace_back(words, flags);
            }
            std::sort(authored.begin(), authored.end());
            h.add(std::uint64_t{authored.size()});
            for (const auto &[words, flags] : authored)
            {
                for (Word x : words)
                {
                    h.add(x);
                }
                h.add(flags);
            }
            // These lists are only ever counted or maximised over, so their
            // order is not part of the state.
            for (const auto *list : {&r.suggestions, &r.awaiting_support})
            {
                std::vector<std::tuple<View, std::uint64_t, PartyId>> items;
                for (const auto &sg : *list)
                {
                    items.emplace_back(sg.key, sg.val.token, sg.sender);
                }
                std::sort(items.begin(), items.end());
                h.add(std::uint64_t{items.size()});
                for (const auto &[k, v, from] : items)
                {
                    h.add(k);
                    h.add(v);
                    h.add(std::uint64_t{from});
                }
            }
            for (const auto *list : {&r.key2_proofs, &r.proofs})
            {
                std::vector<std::tuple<View, std::uint64_t, View>> items;
                for (const auto &p : *list)
                {
                    items.emplace_back(p.key, p.val.token, p.prev);
                }
                std::sort(items.begin(), items.end());
                h.add(std::uint64_t{items.size()});
                for (const auto &[k, v, prev] : items)
                {
                    h.add(k);
                    h.add(v);
                    h.add(prev);
                }
            }
            for (const auto *flags : {&r.suggest_seen, &r.proof_seen})
            {
                for (bool b : *flags)
                {
                    h.add(std::uint64_t{b});
                }
            }
            h.add(std::uint64_t{r.propose_seen});
            h.add(std::uint64_t{r.pending_propose.has_value()});
            if (r.pending_propose)
            {
                h.add(r.pending_propose->key);
                h.add(r.pending_propose->val);
            }
        }

        inline Hash128 hash_world(const World &w, PartyId byz)
        {
            Hasher h;
            for (PartyId p = 1; p <= w.parties.size(); ++p)
            {
                if (p != byz)
                {
                    hash_party(h, w.parties[p - 1], byz);
                }
            }
            // Pending votes and done messages are anonymous for the same reason
            // as the tallies.
            std::vector<Pending> pending = w.pending;
            for (auto &m : pending)
            {
                if (is_vote(m.msg.kind) || m.msg.kind == Kind::Done)
                {
                    m.from = 0;
                }
            }
            std::sort(pending.begin(), pending.end());
            h.add(std::uint64_t{pending.size()});
            for (const auto &m : pending)
            {
                h.add(std::uint64_t{m.to});
                h.add(std::uint64_t{m.from});
                for (Word x : m.words)
                {
                    h.add(x);
                }
            }
            for (const auto &e : w.ledger)
            {
                h.add(std::uint64_t{static_cast<std::uint8_t>(e.kind)});
                h.add(e.view);
                h.add(e.value);
            }
            return h.digest();
        }

        class Explorer
        {
        public:
            explicit Explorer(ExploreConfig cfg) : cfg_(std::move(cfg)), committee_(cfg_.n, cfg_.f)
            {
                if (cfg_.n > 5)
                {
                    throw ConfigError("explorer supports n <= 5");
                }
                if (cfg_.view_bound < 1)
                {
                    throw ConfigError("view_bound must be >= 1");
                }
                if (cfg_.byzantine > cfg_.n)
                {
                    throw ConfigError("byzantine party out of range");
                }
                if (cfg_.byzantine != 0 && cfg_.f == 0)
                {
                    throw ConfigError("a Byzantine party needs f >= 1");
                }
                if (cfg_.inputs.empty())
                {
                    for (PartyId p = 1; p <= cfg_.n; ++p)
                    {
                        cfg_.inputs.push_back(p % 2 ? kExploreA : kExploreB);
                    }
                }
                if (cfg_.inputs.size() != cfg_.n)
                {
                    throw ConfigError("inputs must have n entries");
                }
                last_view_ = cfg_.options.first_view + cfg_.view_bound - 1;
                for (PartyId p = 1; p <= cfg_.n; ++p)
                {
                    if (p != cfg_.byzantine && std::find(values_.begin(), values_.end(), cfg_.inputs[p - 1]) == values_.end())
                    {
                        values_.push_back(cfg_.inputs[p - 1]);
                    }
                }
                all_inputs_equal_ = values_.size() == 1;
                common_input_ = values_.front();
                if (cfg_.byzantine != 0 && cfg_.fresh_value)
                {
                    values_.push_back(kExploreFresh);
                }
            }

            ExploreResult run()
            {
                World w;
                w.parties.resize(cfg_.n);
                std::string violation;
                std::vector<std::vector<Action>> initial(cfg_.n);
                for (PartyId p = 1; p <= cfg_.n; ++p)
                {
                    if (p != cfg_.byzantine)
                    {
                        auto step = init_party(p, cfg_.n, cfg_.f, cfg_.inputs[p - 1], cfg_.options);
                        w.parties[p - 1] = std::move(step.state);
                        initial[p - 1] = std::move(step.actions);
                    }
                }
                for (PartyId p = 1; p <= cfg_.n; ++p)
                {
                    if (auto v = absorb(w, p, initial[p - 1]); v && violation.empty())
                    {
                        violation = *v;
                    }
                }
                if (violation.empty())
                {
                    if (auto v = settle(w))
                    {
                        violation = *v;
                    }
                }
                if (!violation.empty())
                {
                    result_.verdict = Verdict::Counterexample;
                    result_.violation = violation;
                    result_.path = {"init"};
                    return result_;
                }
                path_.clear();
                const bool found = dfs(w, 0);
                if (found)
                {
                    result_.verdict = Verdict::Counterexample;
                }
                else if (truncated_)
                {
                    result_.verdict = Verdict::Inconclusive;
                }
                else
                {
                    result_.verdict = Verdict::Verified;
                }
                result_.states = visited_.size();
                return result_;
            }

        private:
            struct Transition
            {
                enum class Type : std::uint8_t
                {
                    Deliver,
                    Batch,
                    Timeout,
                    Byzantine,
                } type;
                PartyId to = 0;
                PartyId from = 0;
                Message msg;
                Kind kind = Kind::Echo;
                Value value;
                View view = 0; // abort batches
                std::optional<Message> byz;  // Byzantine message delivered ahead of the class
                bool with_class = true;
            };

            [[nodiscard]] bool honest(PartyId p) const { return p != cfg_.byzantine; }

            [[nodiscard]] bool active(const PartyState &s) const
            {
                return s.id != 0 && !s.terminated() && s.view <= last_view_;
            }

            // ----- applying steps

            std::optional<std::string> check_step(const PartyState &before, const PartyState &after) const
            {
                const std::string who = "party " + std::to_string(after.id);
                if (after.view < before.view || after.lock.key < before.lock.key || after.key3.key < before.key3.key ||
                    after.key2.key < before.key2.key || after.key1.key < before.key1.key)
                {
                    return who + ": view or key went backwards";
                }
                for (std::size_t j = 0; j < before.highest_request.size(); ++j)
                {
                    if (after.highest_request[j] < before.highest_request[j] ||
                        after.highest_abort[j] < before.highest_abort[j])
                    {
                        return who + ": request/abort record went backwards";
                    }
                }
                for (const auto *k : {&after.key1, &after.key2})
                {
                    if (k->key != kNoKey && k->prev >= k->key)
                    {
                        return who + ": key history has prev >= key";
                    }
                }
                auto fired = [&](Kind k) { return after.quorum.fired(k); };
                const auto causal = [&](bool changed, Kind quorum, Value v, const char *what) -> std::optional<std::string> {
                    if (changed && fired(quorum) != v)
                    {
                        return who + ": " + what + " updated to " + to_string(v) + " without a " +
                               std::string(kind_name(quorum)) + " quorum for it";
                    }
                    return std::nullopt;
                };
                if (auto e = causal(!(after.key1 == before.key1), Kind::Echo, after.key1.val, "key1"))
                {
                    return e;
                }
                if (auto e = causal(!(after.key2 == before.key2), Kind::Key1, after.key2.val, "key2"))
                {
                    return e;
                }
                if (auto e = causal(!(after.key3 == before.key3), Kind::Key2, after.key3.val, "key3"))
                {
                    return e;
                }
                if (auto e = causal(!(after.lock == before.lock), Kind::Key3, after.lock.val, "lock"))
                {
                    return e;
                }
                if (after.done_sent && !before.done_sent)
                {
                    const Value v = *after.done_sent;
                    if (fired(Kind::Lock) != v && after.quorum.tally(Kind::Done).fired(Level::Small) != v)
                    {
                        return who + ": sent done " + to_string(v) + " without a lock or done quorum";
                    }
                }
                if (after.decided && !before.decided && after.quorum.tally(Kind::Done).fired(Level::Large) != after.decided)
                {
                    return who + ": decided without a done quorum";
                }
                return std::nullopt;
            }

            std::optional<std::string> record_send(World &w, PartyId from, const Message &m) const
            {
                if (!(is_vote(m.kind) && m.kind != Kind::Echo) && m.kind != Kind::Done)
                {
                    return std::nullopt;
                }
                const View view = m.kind == Kind::Done ? 0 : m.view;
                const LedgerEntry e{m.kind, view, m.val};
                const auto lo = std::lower_bound(w.ledger.begin(), w.ledger.end(), LedgerEntry{m.kind, view, Value{0}});
                for (auto it = lo; it != w.ledger.end() && it->kind == m.kind && it->view == view; ++it)
                {
                    if (it->value != m.val)
                    {
                        return "two nonfaulty " + std::string(kind_name(m.kind)) + " values " + to_string(it->value) +
                               " and " + to_string(m.val) + (m.kind == Kind::Done ? "" : " in view " + std::to_string(view)) +
                               " (second from party " + std::to_string(from) + ")";
                    }
                }
                const auto pos = std::lower_bound(w.ledger.begin(), w.ledger.end(), e);
                if (pos == w.ledger.end() || !(*pos == e))
                {
                    w.ledger.insert(pos, e);
                }
                return std::nullopt;
            }

            /// Feeds one event to party p and everything it triggers at once:
            /// self-deliveries and requests are delivered immediately.
            std::optional<std::string> step(World &w, PartyId p, const Event &ev, bool *reacted = nullptr)
            {
                bool first = true;
                std::deque<std::pair<PartyId, Event>> queue;
                queue.emplace_back(p, ev);
                std::optional<std::string> violation;
                while (!queue.empty())
                {
                    auto [q, e] = std::move(queue.front());
                    queue.pop_front();
                    auto &s = w.parties[q - 1];
                    if (!active(s))
                    {
                        continue;
                    }
                    auto next = handle_event(s, e);
                    if (first && reacted)
                    {
                        *reacted = !next.actions.empty();
                    }
                    first = false;
                    if (auto v = check_step(s, next.state); v && !violation)
                    {
                        violation = v;
                    }
                    s = std::move(next.state);
                    if (auto v = absorb(w, q, next.actions, &queue); v && !violation)
                    {
                        violation = v;
                    }
                }
                return violation;
            }

            std::optional<std::string> absorb(World &w, PartyId p, const std::vector<Action> &actions,
                                              std::deque<std::pair<PartyId, Event>> *queue = nullptr)
            {
                std::deque<std::pair<PartyId, Event>> local;
                auto &q = queue ? *queue : local;
                std::optional<std::string> violation;
                for (const auto &a : actions)
                {
                    const auto *s = std::get_if<Send>(&a);
                    if (!s)
                    {
                        continue;
                    }
                    if (auto v = record_send(w, p, s->msg); v && !violation)
                    {
                        violation = v;
                    }
                    if (s->to == cfg_.byzantine)
                    {
                        continue;
                    }
                    if (s->to == p || s->msg.kind == Kind::Request)
                    {
                        q.emplace_back(s->to, Delivered{p, s->msg});
                        continue;
                    }
                    const auto item = Pending::of(p, s->to, s->msg);
                    const auto pos = std::lower_bound(w.pending.begin(), w.pending.end(), item);
                    if (pos == w.pending.end() || !(*pos == item))
                    {
                        w.pending.insert(pos, item);
                    }
                }
                if (!queue)
                {
                    while (!local.empty())
                    {
                        auto [to, e] = std::move(local.front());
                        local.pop_front();
                        if (auto v = step(w, to, e); v && !violation)
                        {
                            violation = v;
                        }
                    }
                }
                return violation;
            }

            /// A pending message that can no longer change its recipient.
            [[nodiscard]] bool dead(const World &w, const Pending &m) const
            {
                const auto &s = w.parties[m.to - 1];
                if (!active(s))
                {
                    return true;
                }
                const Message &msg = m.msg;
                if (!is_view_exempt(msg.kind))
                {
                    if (msg.view < s.view || msg.view > last_view_)
                    {
                        return true;
                    }
                    if (msg.view > s.view)
                    {
                        return false;
                    }
                }
                const auto &r = s.round;
                switch (msg.kind)
                {
                case Kind::Suggest:
                    return !s.is_primary() || r.has_authored(Kind::Propose) || r.suggest_seen[m.from - 1];
                case Kind::Proof:
                    return r.proof_seen[m.from - 1];
                case Kind::Propose:
                    return m.from != r.primary || r.propose_seen;
                case Kind::Echo:
                case Kind::Key1:
                case Kind::Key2:
                case Kind::Key3:
                case Kind::Lock:
                case Kind::Done: {
                    const auto &t = s.quorum.tally(msg.kind);
                    return t.fired(Level::Large).has_value() || t.has_voted(m.from);
                }
                case Kind::Abort:
                    return s.view >= last_view_ || msg.view <= s.highest_abort[m.from - 1];
                default:
                    return false;
                }
            }

            /// Garbage-collects dead messages, delivers proofs the moment their
            /// recipient is in their view, and checks the state invariants.
            std::optional<std::string> settle(World &w)
            {
                std::optional<std::string> violation;
                while (true)
                {
                    std::erase_if(w.pending, [&](const Pending &m) { return dead(w, m); });
                    const auto it = std::find_if(w.pending.begin(), w.pending.end(), [&](const Pending &m) {
                        return m.msg.kind == Kind::Proof && m.msg.view == w.parties[m.to - 1].view;
                    });
                    if (it == w.pending.end())
                    {
                        break;
                    }
                    const Pending m = *it;
                    w.pending.erase(it);
                    if (auto v = step(w, m.to, Delivered{m.from, m.msg}); v && !violation)
                    {
                        violation = v;
                    }
                }
                if (violation)
                {
                    return violation;
                }
                std::optional<Value> decided;
                std::optional<Value> done;
                for (PartyId p = 1; p <= cfg_.n; ++p)
                {
                    if (!honest(p))
                    {
                        continue;
                    }
                    const auto &s = w.parties[p - 1];
                    if (s.decided)
                    {
                        if (decided && *decided != *s.decided)
                        {
                            return "agreement: nonfaulty parties decided " + to_string(*decided) + " and " +
                                   to_string(*s.decided);
                        }
                        decided = s.decided;
                        if (cfg_.byzantine == 0 && all_inputs_equal_ && *s.decided != common_input_)
                        {
                            return "validity: party " + std::to_string(p) + " decided " + to_string(*s.decided) +
                                   " though every input was " + to_string(common_input_);
                        }
                    }
                    if (s.done_sent)
                    {
                        if (done && *done != *s.done_sent)
                        {
                            return "unique done: nonfaulty done messages for " + to_string(*done) + " and " +
                                   to_string(*s.done_sent);
                        }
                        done = s.done_sent;
                    }
                }
                return std::nullopt;
            }

            // ----- enumerating transitions

            std::vector<Message> menu_for(const PartyState &s) const
            {
                // Requests from the Byzantine party only release messages
                // addressed to it, which are not modelled.
                std::vector<Message> out;
                const View first = cfg_.options.first_view;
                const View v = s.view;
                if (v < first || v > last_view_)
                {
                    return out;
                }
                if (s.is_primary())
                {
                    for (View k3 = 0; k3 < v; ++k3)
                    {
                        for (Value x3 : values_)
                        {
                            for (View k2 = 0; k2 < v; ++k2)
                            {
                                for (Value x2 : values_)
                                {
                                    for (View pk = kNoPrev; pk < k2; ++pk)
                                    {
                                        out.push_back(Message::suggest(k3, x3, k2, x2, pk, v));
                                    }
                                }
                            }
                        }
                    }
                }
                for (View k1 = 0; k1 < v; ++k1)
                {
                    for (Value x : values_)
                    {
                        for (View pk = kNoPrev; pk < k1; ++pk)
                        {
                            out.push_back(Message::proof(k1, x, pk, v));
                        }
                    }
                }
                if (s.round.primary == cfg_.byzantine)
                {
                    for (View k = 0; k < v; ++k)
                    {
                        for (Value x : values_)
                        {
                            out.push_back(Message::propose(k, x, v));
                        }
                    }
                }
                return out;
            }

            /// Byzantine votes, done and abort messages only matter once they
            /// help a quorum fire, so they ride ahead of an honest class.
            void byzantine_batches(const World &w, PartyId p, std::vector<Transition> &out) const
            {
                const auto &s = w.parties[p - 1];
                const PartyId b = cfg_.byzantine;
                const auto open = [&](Kind k) {
                    const auto &t = s.quorum.tally(k);
                    return !t.fired(Level::Large) && !t.has_voted(b);
                };
                if (s.view >= cfg_.options.first_view && s.view <= last_view_)
                {
                    for (Kind k : {Kind::Echo, Kind::Key1, Kind::Key2, Kind::Key3, Kind::Lock})
                    {
                        if (!open(k))
                        {
                            continue;
                        }
                        for (Value x : values_)
                        {
                            Transition t{Transition::Type::Batch, p, b, {}, k, x, 0};
                            t.byz = Message::vote(k, x, s.view);
                            out.push_back(t);
                        }
                    }
                }
                if (open(Kind::Done))
                {
                    for (Value x : values_)
                    {
                        Transition t{Transition::Type::Batch, p, b, {}, Kind::Done, x, 0};
                        t.byz = Message::done(x);
                        out.push_back(t);
                    }
                }
                if (s.view >= last_view_)
                {
                    return;
                }
                std::vector<View> classes;
                for (const auto &m : w.pending)
                {
                    if (m.to == p && m.msg.kind == Kind::Abort &&
                        std::find(classes.begin(), classes.end(), m.msg.view) == classes.end())
                    {
                        classes.push_back(m.msg.view);
                    }
                }
                for (View u = std::max(s.highest_abort[b - 1] + 1, cfg_.options.first_view); u <= last_view_ + 1; ++u)
                {
                    Transition alone{Transition::Type::Batch, p, b, {}, Kind::Abort, {}, 0};
                    alone.byz = Message::abort(u);
                    alone.with_class = false;
                    out.push_back(alone);
                    for (View c : classes)
                    {
                        Transition t{Transition::Type::Batch, p, b, {}, Kind::Abort, {}, c};
                        t.byz = Message::abort(u);
                        out.push_back(t);
                    }
                }
            }

            static bool batched(Kind k) { return is_vote(k) || k == Kind::Done || k == Kind::Abort; }
            static Value batch_value(const Message &m) { return m.kind == Kind::Abort ? Value{} : m.val; }
            static View batch_view(const Message &m) { return m.kind == Kind::Abort ? m.view : 0; }

            /// Cheap necessary condition for a vote or done batch to make its
            /// recipient react, so hopeless ones are never tried.
            [[nodiscard]] bool may_react(const World &w, const Transition &t) const
            {
                if (t.type != Transition::Type::Batch || t.kind == Kind::Abort)
                {
                    return true;
                }
                const auto &s = w.parties[t.to - 1];
                const auto &tally = s.quorum.tally(t.kind);
                if (tally.fired(Level::Large))
                {
                    return false;
                }
                std::uint32_t have = t.byz ? 1 : 0;
                for (const auto &[v, c] : tally.counts())
                {
                    if (v == t.value)
                    {
                        have += c;
                    }
                }
                if (t.with_class)
                {
                    for (const auto &m : w.pending)
                    {
                        if (m.to == t.to && m.msg.kind == t.kind && m.msg.val == t.value)
                        {
                            ++have;
                        }
                    }
                }
                const auto th = s.quorum.thresholds();
                if (t.kind == Kind::Done)
                {
                    return have >= th.large || (!s.done_sent && have >= th.small);
                }
                return have >= th.large;
            }

            std::vector<Transition> transitions(const World &w) const
            {
                std::vector<Transition> out;
                // Batches first: they drive the protocol forward, which finds
                // counterexamples sooner.
                for (const auto &m : w.pending)
                {
                    if (!batched(m.msg.kind))
                    {
                        continue;
                    }
                    const Transition t{Transition::Type::Batch, m.to, 0, {}, m.msg.kind, batch_value(m.msg),
                                       batch_view(m.msg)};
                    const bool seen = std::any_of(out.begin(), out.end(), [&](const Transition &o) {
                        return o.type == t.type && o.to == t.to && o.kind == t.kind && o.value == t.value &&
                               o.view == t.view;
                    });
                    if (!seen)
                    {
                        out.push_back(t);
                    }
                }
                for (const auto &m : w.pending)
                {
                    if (!batched(m.msg.kind))
                    {
                        out.push_back(Transition{Transition::Type::Deliver, m.to, m.from, m.msg, m.msg.kind, {}});
                    }
                }
                for (PartyId p = 1; p <= cfg_.n; ++p)
                {
                    const auto &s = w.parties[p - 1];
                    if (honest(p) && active(s) && s.view < last_view_ && s.highest_abort[p - 1] < s.view)
                    {
                        out.push_back(Transition{Transition::Type::Timeout, p, 0, {}, Kind::Abort, {}});
                    }
                }
                if (cfg_.byzantine != 0)
                {
                    for (PartyId p = 1; p <= cfg_.n; ++p)
                    {
                        const auto &s = w.parties[p - 1];
                        if (!honest(p) || !active(s))
                        {
                            continue;
                        }
                        byzantine_batches(w, p, out);
                        for (const auto &m : menu_for(s))
                        {
                            out.push_back(Transition{Transition::Type::Byzantine, p, cfg_.byzantine, m, m.kind, {}});
                        }
                    }
                }
                std::erase_if(out, [&](const Transition &t) { return !may_react(w, t); });
                return out;
            }

            std::string label(const Transition &t, std::size_t batch_size) const
            {
                switch (t.type)
                {
                case Transition::Type::Deliver:
                    return "deliver " + std::to_string(t.from) + "->" + std::to_string(t.to) + " " + to_string(t.msg);
                case Transition::Type::Batch: {
                    std::string out = t.byz ? "byzantine " + std::to_string(t.from) + "->" + std::to_string(t.to) +
                                                  " " + to_string(*t.byz) + ", then "
                                            : std::string();
                    return out + "deliver " + std::to_string(batch_size) + "x " + std::string(kind_name(t.kind)) +
                           "(" + (t.kind == Kind::Abort ? std::to_string(t.view) : to_string(t.value)) + ") to " +
                           std::to_string(t.to);
                }
                case Transition::Type::Timeout:
                    return "timeout at " + std::to_string(t.to);
                case Transition::Type::Byzantine:
                    return "byzantine " + std::to_string(t.from) + "->" + std::to_string(t.to) + " " + to_string(t.msg);
                }
                return "?";
            }

            /// Deliveries that leave their recipient silent only move a tally,
            /// and can be postponed until the delivery that makes it fire. So
            /// such transitions are reported as disabled.
            std::optional<std::string> apply(World &w, const Transition &t, std::size_t &batch_size, bool &enabled)
            {
                batch_size = 0;
                enabled = true;
                std::optional<std::string> violation;
                switch (t.type)
                {
                case Transition::Type::Deliver:
                case Transition::Type::Byzantine: {
                    const auto item = Pending::of(t.from, t.to, t.msg);
                    const auto pos = std::lower_bound(w.pending.begin(), w.pending.end(), item);
                    if (pos != w.pending.end() && *pos == item)
                    {
                        w.pending.erase(pos);
                    }
                    bool reacted = false;
                    violation = step(w, t.to, Delivered{t.from, t.msg}, &reacted);
                    // A Byzantine proof that changes nothing visible can as well
                    // arrive right after the next proof or proposal.
                    if (t.type == Transition::Type::Byzantine && t.msg.kind == Kind::Proof && !reacted)
                    {
                        enabled = false;
                        return std::nullopt;
                    }
                    break;
                }
                case Transition::Type::Timeout:
                    violation = step(w, t.to, ViewTimerFired{w.parties[t.to - 1].view});
                    break;
                case Transition::Type::Batch: {
                    // Deliver the class until the recipient reacts; the rest
                    // stay pending.
                    bool reacted = false;
                    if (t.byz)
                    {
                        violation = step(w, t.to, Delivered{t.from, *t.byz}, &reacted);
                    }
                    while (!reacted && t.with_class)
                    {
                        const auto it = std::find_if(w.pending.begin(), w.pending.end(), [&](const Pending &m) {
                            return m.to == t.to && m.msg.kind == t.kind && batch_value(m.msg) == t.value &&
                                   batch_view(m.msg) == t.view;
                        });
                        if (it == w.pending.end())
                        {
                            break;
                        }
                        const Pending m = *it;
                        w.pending.erase(it);
                        ++batch_size;
                        violation = step(w, t.to, Delivered{m.from, m.msg}, &reacted);
                    }
                    if (!reacted && !violation)
                    {
                        enabled = false;
                        return std::nullopt;
                    }
                    break;
                }
                }
                if (auto v = settle(w); v && !violation)
                {
                    violation = v;
                }
                return violation;
            }

            /// A nonfaulty vote batch in the last view that makes its recipient
            /// fire commutes with everything else the recipient can still do,
            /// provided no other value can ever fire for that kind and the lock
            /// it may write is no longer read. Exploring it alone is enough.
            [[nodiscard]] bool reducible(const World &w, const Transition &t) const
            {
                if (t.type != Transition::Type::Batch || t.byz || !is_vote(t.kind) || t.kind == Kind::Lock)
                {
                    return false;
                }
                const auto &r = w.parties[t.to - 1];
                if (r.view != last_view_)
                {
                    return false;
                }
                const auto &round = r.round;
                if (t.kind == Kind::Key3 && !round.has_authored(Kind::Echo) &&
                    !(round.propose_seen && !round.pending_propose))
                {
                    return false;
                }
                std::uint32_t silent = 0;
                std::vector<std::pair<Value, std::uint32_t>> votes;
                for (PartyId q = 1; q <= cfg_.n; ++q)
                {
                    const auto &s = w.parties[q - 1];
                    if (!honest(q) || s.view > r.view)
                    {
                        continue;
                    }
                    const auto &authored = s.round.authored;
                    const auto it = std::find_if(authored.begin(), authored.end(), [&](const auto &a) {
                        return a.msg.kind == t.kind && a.msg.view == r.view;
                    });
                    if (s.view == r.view && it != authored.end())
                    {
                        const auto pos = std::find_if(votes.begin(), votes.end(),
                                                      [&](const auto &e) { return e.first == it->msg.val; });
                        if (pos == votes.end())
                        {
                            votes.emplace_back(it->msg.val, 1);
                        }
                        else
                        {
                            ++pos->second;
                        }
                    }
                    else if (active(s))
                    {
                        ++silent;
                    }
                }
                const auto &tally = r.quorum.tally(t.kind);
                const auto byz_vote = cfg_.byzantine != 0 ? tally.senders()[cfg_.byzantine - 1] : std::nullopt;
                const std::uint32_t large = r.quorum.thresholds().large;
                for (Value y : values_)
                {
                    if (y == t.value)
                    {
                        continue;
                    }
                    std::uint32_t possible = silent;
                    for (const auto &[v, c] : votes)
                    {
                        if (v == y)
                        {
                            possible += c;
                        }
                    }
                    if (cfg_.byzantine != 0 && (!byz_vote || *byz_vote == y))
                    {
                        ++possible;
                    }
                    if (possible >= large)
                    {
                        return false;
                    }
                }
                return true;
            }

            bool dfs(const World &w, std::size_t depth)
            {
                if (!visited_.insert(hash_world(w, cfg_.byzantine)).second)
                {
                    return false;
                }
                result_.max_depth = std::max(result_.max_depth, depth);
                if (visited_.size() >= cfg_.max_states)
                {
                    truncated_ = true;
                    result_.reason = "state bound " + std::to_string(cfg_.max_states) + " reached";
                    return false;
                }
                if (depth >= cfg_.depth_bound)
                {
                    truncated_ = true;
                    result_.reason = "depth bound " + std::to_string(cfg_.depth_bound) + " reached";
                    return false;
                }
                auto ts = transitions(w);
                for (const auto &t : ts)
                {
                    if (!reducible(w, t))
                    {
                        continue;
                    }
                    World probe = w;
                    std::size_t batch = 0;
                    bool enabled = true;
                    const auto violation = apply(probe, t, batch, enabled);
                    if (enabled || violation)
                    {
                        ts = {t};
                        break;
                    }
                }
                for (const auto &t : ts)
                {
                    if (truncated_ && visited_.size() >= cfg_.max_states)
                    {
                        return false;
                    }
                    World next = w;
                    std::size_t batch = 0;
                    bool enabled = true;
                    const auto violation = apply(next, t, batch, enabled);
                    if (!enabled)
                    {
                        continue;
                    }
                    ++result_.transitions;
                    path_.push_back(label(t, batch));
                    if (violation)
                    {
                        result_.violation = *violation;
                        result_.path = path_;
                        return true;
                    }
                    if (dfs(next, depth + 1))
                    {
                        return true;
                    }
                    path_.pop_back();
                }
                return false;
            }

            ExploreConfig cfg_;
            Committee committee_;
            View last_view_ = 0;
            std::vector<Value> values_;
            bool all_inputs_equal_ = false;
            Value common_input_;
            std::unordered_set<Hash128, Hash128Hasher> visited_;
            std::vector<std::string> path_;
            bool truncated_ = false;
            ExploreResult result_;
        };
    } // namespace detail::explore

    /// Verified: every reachable state within the bounds satisfies the safety
    /// invariants. Counterexample: a path to a violation. Inconclusive: a
    /// bound was hit first.
    inline ExploreResult explore(const ExploreConfig &cfg) { return detail::explore::Explorer(cfg).run(); }
} // namespace iths
