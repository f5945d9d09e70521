#pragma once

#include "iths/message.hpp"
#include "iths/quorum.hpp"
#include "iths/types.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <variant>
#include <vector>

namespace iths
{
    /// Knobs that alter the protocol. Everything except first_view exists to
    /// check that the test harnesses can fail.
    struct ProtocolOptions
    {
        /// View entered at start. Keys and locks use 0 as "never set", so a
        /// first view of 0 makes a lock taken in that view look unset.
        View first_view = 1;
        /// Test-only: every n-f vote/done threshold becomes f+1.
        bool lowered_quorum = false;
        /// Test-only: a key2 quorum locks directly, no key3 messages.
        bool skip_key3_round = false;

        friend bool operator==(const ProtocolOptions &, const ProtocolOptions &) = default;
    };

    // ---------------------------------------------------------------- actions

    enum class PersistField : std::uint8_t
    {
        View,
        Lock,
        Key3,
        Key2,
        Key1,
        Done,
        Request,
        Abort,
        Decision,
        Authored,
    };

    struct Send
    {
        PartyId to = 0;
        Message msg;
        friend bool operator==(const Send &, const Send &) = default;
    };

    struct Decide
    {
        Value value;
        friend bool operator==(const Decide &, const Decide &) = default;
    };

    struct SetViewTimer
    {
        View view = 0;
        friend bool operator==(const SetViewTimer &, const SetViewTimer &) = default;
    };

    /// The named persistent field changed; must be durable before any later
    /// action in the same batch is released.
    struct PersistHint
    {
        PersistField field;
        friend bool operator==(const PersistHint &, const PersistHint &) = default;
    };

    struct Terminate
    {
        friend bool operator==(const Terminate &, const Terminate &) = default;
    };

    using Action = std::variant<Send, Decide, SetViewTimer, PersistHint, Terminate>;

    // ----------------------------------------------------------------- events

    struct Delivered
    {
        PartyId from = 0;
        Message msg;
    };

    struct ViewTimerFired
    {
        View view = 0;
    };

    /// Moves the party straight into a later view, as if an abort quorum had
    /// been observed.
    struct LocalViewAdvance
    {
        View view = 0;
    };

    using Event = std::variant<Delivered, ViewTimerFired, LocalViewAdvance>;

    // ------------------------------------------------------------------ state

    /// A message the party created in the current view. Recipients whose
    /// request for this view has not arrived yet are marked pending.
    struct Authored
    {
        Message msg;
        PartyId only_to = 0; // 0 = every party
        std::vector<bool> pending;

        [[nodiscard]] bool addressed_to(PartyId j) const { return only_to == 0 || only_to == j; }
        friend bool operator==(const Authored &, const Authored &) = default;
    };

    struct Suggestion
    {
        View key = kNoKey;
        Value val;
        PartyId sender = 0;
        friend bool operator==(const Suggestion &, const Suggestion &) = default;
    };

    struct PendingPropose
    {
        View key = kNoKey;
        Value val;
        friend bool operator==(const PendingPropose &, const PendingPropose &) = default;
    };

    /// Everything that is thrown away when the party changes view.
    struct PerViewState
    {
        View cur_view = 0;
        PartyId primary = 0;
        std::vector<Authored> authored;

        // primary only
        std::vector<Suggestion> suggestions;
        std::vector<Suggestion> awaiting_support;
        std::vector<KeyProof> key2_proofs;
        std::vector<bool> suggest_seen;

        std::vector<KeyProof> proofs;
        std::vector<bool> proof_seen;
        bool propose_seen = false;
        std::optional<PendingPropose> pending_propose;

        static PerViewState fresh(View v, PartyId primary, std::uint32_t n)
        {
            PerViewState p;
            p.cur_view = v;
            p.primary = primary;
            p.suggest_seen.assign(n, false);
            p.proof_seen.assign(n, false);
            return p;
        }

        [[nodiscard]] const Authored *find_authored(Kind k) const
        {
            for (const auto &a : authored)
            {
                if (a.msg.kind == k)
                {
                    return &a;
                }
            }
            return nullptr;
        }

        [[nodiscard]] bool has_authored(Kind k) const { return find_authored(k) != nullptr; }

        friend bool operator==(const PerViewState &, const PerViewState &) = default;
    };

    struct PartyState
    {
        PartyId id = 0;
        Committee committee{1, 0};
        ProtocolOptions options;

        View view = 0;
        KeySlot lock;
        KeySlot key3;
        KeyHistory key2;
        KeyHistory key1;

        std::vector<View> highest_request;
        std::vector<View> highest_abort;

        std::optional<Value> done_sent;
        std::optional<Value> decided;
        View last_request = kNoPrev;
        View last_abort = kNoPrev;

        QuorumTracker quorum;
        PerViewState round;

        [[nodiscard]] std::uint32_t n() const { return committee.n(); }
        [[nodiscard]] std::uint32_t f() const { return committee.f(); }
        [[nodiscard]] bool terminated() const { return decided.has_value(); }
        [[nodiscard]] bool is_primary() const { return round.primary == id; }

        friend bool operator==(const PartyState &, const PartyState &) = default;
    };

    struct Step
    {
        PartyState state;
        std::vector<Action> actions;
    };

    // ------------------------------------------------------ pure predicates

    /// True iff at least f+1 triples support accepting (key, value): either the
    /// sender's previous key already reached `key`, or its key did with the same value.
    inline bool accept_key(View key, Value value, std::span<const KeyProof> proofs, std::uint32_t f)
    {
        std::uint32_t supporting = 0;
        for (const auto &p : proofs)
        {
            if (key <= p.prev || (key <= p.key && value == p.val))
            {
                ++supporting;
            }
        }
        return supporting >= f + 1;
    }

    /// True iff at least f+1 triples show some other value progressed at or after the lock.
    inline bool open_lock(KeySlot lock, std::span<const KeyProof> proofs, std::uint32_t f)
    {
        std::uint32_t supporting = 0;
        for (const auto &p : proofs)
        {
            if (lock.key <= p.prev || (lock.key <= p.key && p.val != lock.val))
            {
                ++supporting;
            }
        }
        return supporting >= f + 1;
    }

    /// Picks a suggestion with maximal key; ties go to the lowest sender.
    inline Suggestion select_proposal(std::span<const Suggestion> suggestions)
    {
        const auto best = std::min_element(suggestions.begin(), suggestions.end(),
                                           [](const Suggestion &a, const Suggestion &b) {
                                               if (a.key != b.key)
                                               {
                                                   return a.key > b.key;
                                               }
                                               return a.sender < b.sender;
                                           });
        return best == suggestions.end() ? Suggestion{} : *best;
    }

    /// k-th largest entry (1-based).
    inline View kth_largest(std::vector<View> values, std::uint32_t k)
    {
        if (k == 0 || k > values.size())
        {
            return kNoPrev;
        }
        std::nth_element(values.begin(), values.begin() + (k - 1), values.end(), std::greater<>{});
        return values[k - 1];
    }

    inline Thresholds thresholds_for(const Committee &c, const ProtocolOptions &o)
    {
        Thresholds t = Thresholds::of(c);
        if (o.lowered_quorum)
        {
            t.large = c.small_quorum();
        }
        return t;
    }

    /// Transient footprint in words: the two n-arrays, the quorum tallies and
    /// the per-view collections.
    inline std::size_t transient_words(const PartyState &s)
    {
        const auto &r = s.round;
        std::size_t w = s.highest_request.size() + s.highest_abort.size();
        w += s.quorum.words();
        w += 3 * (r.suggestions.size() + r.awaiting_support.size() + r.key2_proofs.size() + r.proofs.size());
        w += r.suggest_seen.size() + r.proof_seen.size();
        for (const auto &a : r.authored)
        {
            w += a.pending.size();
        }
        w += 6; // cur_view, primary, propose flags, pending propose pair
        return w;
    }

    namespace detail
    {
        class Machine
        {
        public:
            explicit Machine(PartyState &s) : s_(s) {}

            std::vector<Action> finish()
            {
                std::vector<Action> out;
                out.reserve(hints_.size() + actions_.size());
                for (auto f : hints_)
                {
                    out.emplace_back(PersistHint{f});
                }
                for (auto &a : actions_)
                {
                    out.push_back(std::move(a));
                }
                return out;
            }

            void start_view(View v)
            {
                s_.view = v;
                touch(PersistField::View);
                s_.round = PerViewState::fresh(v, s_.committee.primary_of(v), s_.n());
                s_.quorum.reset_for_view();

                broadcast(Message::request(v));
                s_.last_request = v;
                touch(PersistField::Request);
                actions_.emplace_back(SetViewTimer{v});

                author(Message::suggest(s_.key3.key, s_.key3.val, s_.key2.key, s_.key2.val, s_.key2.prev, v),
                       s_.round.primary);
                author(Message::proof(s_.key1.key, s_.key1.val, s_.key1.prev, v), 0);
            }

            void dispatch(const Event &e)
            {
                if (const auto *d = std::get_if<Delivered>(&e))
                {
                    deliver(d->from, d->msg);
                }
                else if (const auto *t = std::get_if<ViewTimerFired>(&e))
                {
                    on_view_timeout(t->view);
                }
                else if (const auto *a = std::get_if<LocalViewAdvance>(&e))
                {
                    if (!s_.terminated() && a->view > s_.view)
                    {
                        start_view(a->view);
                    }
                }
            }

            void deliver(PartyId from, const Message &m)
            {
                if (from == 0 || from > s_.n())
                {
                    return;
                }
                if (m.kind == Kind::RecoverQuery)
                {
                    answer_recover_query(from, m.view);
                    return;
                }
                if (s_.terminated())
                {
                    return;
                }
                if (!is_view_exempt(m.kind) && m.view != s_.view)
                {
                    return;
                }
                switch (m.kind)
                {
                case Kind::Request:
                    on_request(from, m.view);
                    break;
                case Kind::Suggest:
                    on_suggest(from, m);
                    break;
                case Kind::Proof:
                    on_proof(from, m);
                    break;
                case Kind::Propose:
                    on_propose(from, m);
                    break;
                case Kind::Echo:
                case Kind::Key1:
                case Kind::Key2:
                case Kind::Key3:
                case Kind::Lock:
                    on_vote(from, m.kind, m.val);
                    break;
                case Kind::Done:
                    on_done(from, m.val);
                    break;
                case Kind::Abort:
                    on_abort(from, m.view);
                    break;
                case Kind::RecoverReply:
                case Kind::RecoverQuery:
                    break;
                }
            }

            void answer_recover_query(PartyId requester, View asked)
            {
                if (s_.done_sent)
                {
                    send(requester, Message::done(*s_.done_sent));
                }
                if (s_.last_request != kNoPrev)
                {
                    send(requester, Message::request(s_.last_request));
                }
                if (s_.last_abort != kNoPrev)
                {
                    send(requester, Message::abort(s_.last_abort));
                }
                if (s_.view == asked && !s_.terminated())
                {
                    for (const auto &a : s_.round.authored)
                    {
                        if (a.addressed_to(requester))
                        {
                            send(requester, a.msg);
                        }
                    }
                }
                send(requester, Message::recover_reply(s_.view));
            }

        private:
            void touch(PersistField f)
            {
                if (std::find(hints_.begin(), hints_.end(), f) == hints_.end())
                {
                    hints_.push_back(f);
                }
            }

            void send(PartyId to, Message m) { actions_.emplace_back(Send{to, std::move(m)}); }

            void broadcast(const Message &m)
            {
                for (PartyId j = 1; j <= s_.n(); ++j)
                {
                    send(j, m);
                }
            }

            [[nodiscard]] bool gate_open(PartyId j) const { return s_.highest_request[j - 1] >= s_.view; }

            /// Creates a message for this view and releases it to every
            /// recipient whose request for this view already arrived.
            void author(Message m, PartyId only_to)
            {
                Authored a{.msg = std::move(m), .only_to = only_to, .pending = std::vector<bool>(s_.n(), false)};
                for (PartyId j = 1; j <= s_.n(); ++j)
                {
                    if (!a.addressed_to(j))
                    {
                        continue;
                    }
                    if (gate_open(j))
                    {
                        send(j, a.msg);
                    }
                    else
                    {
                        a.pending[j - 1] = true;
                    }
                }
                s_.round.authored.push_back(std::move(a));
                touch(PersistField::Authored);
            }

            void flush(PartyId j)
            {
                for (auto &a : s_.round.authored)
                {
                    if (a.pending[j - 1])
                    {
                        a.pending[j - 1] = false;
                        send(j, a.msg);
                    }
                }
            }

            void on_request(PartyId j, View v)
            {
                auto &hr = s_.highest_request[j - 1];
                if (hr < v)
                {
                    hr = v;
                }
                if (gate_open(j))
                {
                    flush(j);
                }
            }

            void on_suggest(PartyId j, const Message &m)
            {
                auto &r = s_.round;
                if (!s_.is_primary() || r.has_authored(Kind::Propose) || r.suggest_seen[j - 1])
                {
                    return;
                }
                r.suggest_seen[j - 1] = true;

                bool grew = false;
                if (m.prev < m.key2 && m.key2 < s_.view)
                {
                    r.key2_proofs.push_back(KeyProof{m.key2, m.val2, m.prev});
                    grew = true;
                }
                if (m.key == kNoKey)
                {
                    r.suggestions.push_back(Suggestion{m.key, m.val, j});
                }
                else if (m.key > kNoKey && m.key < s_.view)
                {
                    if (accept_key(m.key, m.val, r.key2_proofs, s_.f()))
                    {
                        r.suggestions.push_back(Suggestion{m.key, m.val, j});
                    }
                    else
                    {
                        r.awaiting_support.push_back(Suggestion{m.key, m.val, j});
                    }
                }
                if (grew)
                {
                    std::erase_if(r.awaiting_support, [&](const Suggestion &sg) {
                        if (accept_key(sg.key, sg.val, r.key2_proofs, s_.f()))
                        {
                            r.suggestions.push_back(sg);
                            return true;
                        }
                        return false;
                    });
                }
                if (r.suggestions.size() >= s_.committee.large_quorum())
                {
                    const Suggestion pick = select_proposal(r.suggestions);
                    author(Message::propose(pick.key, pick.val, s_.view), 0);
                    r.suggestions.clear();
                    r.awaiting_support.clear();
                    r.key2_proofs.clear();
                }
            }

            void on_proof(PartyId j, const Message &m)
            {
                auto &r = s_.round;
                if (r.proof_seen[j - 1])
                {
                    return;
                }
                r.proof_seen[j - 1] = true;
                if (s_.view > m.key && m.key > m.prev)
                {
                    r.proofs.push_back(KeyProof{m.key, m.val, m.prev});
                    try_pending_echo();
                }
            }

            void on_propose(PartyId j, const Message &m)
            {
                auto &r = s_.round;
                if (j != r.primary || r.propose_seen)
                {
                    return;
                }
                r.propose_seen = true;
                if (s_.lock.key == kNoKey || m.val == s_.lock.val)
                {
                    echo(m.val);
                }
                else if (s_.view > m.key && m.key >= s_.lock.key)
                {
                    r.pending_propose = PendingPropose{m.key, m.val};
                    try_pending_echo();
                }
            }

            void try_pending_echo()
            {
                auto &r = s_.round;
                if (r.pending_propose && open_lock(s_.lock, r.proofs, s_.f()))
                {
                    const Value v = r.pending_propose->val;
                    r.pending_propose.reset();
                    echo(v);
                }
            }

            void echo(Value v)
            {
                if (!s_.round.has_authored(Kind::Echo))
                {
                    author(Message::vote(Kind::Echo, v, s_.view), 0);
                }
            }

            static void advance(KeyHistory &k, View view, Value v)
            {
                if (k.val != v)
                {
                    k.prev = k.key;
                    k.val = v;
                }
                k.key = view;
            }

            void on_vote(PartyId j, Kind kind, Value v)
            {
                for (const Fired &fired : s_.quorum.record_vote(kind, j, v))
                {
                    if (fired.level == Level::Large)
                    {
                        on_vote_quorum(kind, fired.value);
                    }
                }
            }

            void on_vote_quorum(Kind kind, Value v)
            {
                const View view = s_.view;
                switch (kind)
                {
                case Kind::Echo:
                    advance(s_.key1, view, v);
                    touch(PersistField::Key1);
                    author(Message::vote(Kind::Key1, v, view), 0);
                    break;
                case Kind::Key1:
                    advance(s_.key2, view, v);
                    touch(PersistField::Key2);
                    author(Message::vote(Kind::Key2, v, view), 0);
                    break;
                case Kind::Key2:
                    s_.key3 = KeySlot{view, v};
                    touch(PersistField::Key3);
                    if (s_.options.skip_key3_round)
                    {
                        s_.lock = KeySlot{view, v};
                        touch(PersistField::Lock);
                        author(Message::vote(Kind::Lock, v, view), 0);
                    }
                    else
                    {
                        author(Message::vote(Kind::Key3, v, view), 0);
                    }
                    break;
                case Kind::Key3:
                    s_.lock = KeySlot{view, v};
                    touch(PersistField::Lock);
                    author(Message::vote(Kind::Lock, v, view), 0);
                    break;
                case Kind::Lock:
                    send_done_once(v);
                    break;
                default:
                    break;
                }
            }

            void send_done_once(Value v)
            {
                if (!s_.done_sent)
                {
                    s_.done_sent = v;
                    touch(PersistField::Done);
                    broadcast(Message::done(v));
                }
            }

            void on_done(PartyId j, Value v)
            {
                for (const Fired &fired : s_.quorum.record_vote(Kind::Done, j, v))
                {
                    if (fired.level == Level::Small)
                    {
                        send_done_once(fired.value);
                    }
                    else if (!s_.decided)
                    {
                        s_.decided = fired.value;
                        touch(PersistField::Decision);
                        actions_.emplace_back(Decide{fired.value});
                        actions_.emplace_back(Terminate{});
                    }
                }
            }

            void on_abort(PartyId j, View v)
            {
                auto &ha = s_.highest_abort;
                if (v <= ha[j - 1])
                {
                    return;
                }
                ha[j - 1] = v;
                check_aborts();
            }

            void check_aborts()
            {
                auto &ha = s_.highest_abort;
                const View u = kth_largest(ha, s_.committee.small_quorum());
                if (u > ha[s_.id - 1])
                {
                    ha[s_.id - 1] = u;
                    s_.last_abort = std::max(s_.last_abort, u);
                    touch(PersistField::Abort);
                    broadcast(Message::abort(u));
                }
                const View w = kth_largest(ha, s_.committee.large_quorum());
                if (w >= s_.view)
                {
                    start_view(w + 1);
                }
            }

            void on_view_timeout(View v)
            {
                auto &own = s_.highest_abort[s_.id - 1];
                if (s_.terminated() || v != s_.view || own >= v)
                {
                    return;
                }
                // Our own entry moves now rather than on self-delivery, so the
                // amplification rule can never re-send this same view.
                own = v;
                s_.last_abort = std::max(s_.last_abort, v);
                touch(PersistField::Abort);
                broadcast(Message::abort(v));
                check_aborts();
            }

            PartyState &s_;
            std::vector<PersistField> hints_;
            std::vector<Action> actions_;
        };
    } // namespace detail

    inline PartyState make_initial_state(PartyId id, const Committee &c, Value input, const ProtocolOptions &opts)
    {
        if (id == 0 || id > c.n())
        {
            throw ConfigError("party id " + std::to_string(id) + " outside 1.." + std::to_string(c.n()));
        }
        PartyState s;
        s.id = id;
        s.committee = c;
        s.options = opts;
        s.view = opts.first_view - 1;
        s.lock = KeySlot{kNoKey, input};
        s.key3 = KeySlot{kNoKey, input};
        s.key2 = KeyHistory{kNoKey, input, kNoPrev};
        s.key1 = KeyHistory{kNoKey, input, kNoPrev};
        s.highest_request.assign(c.n(), opts.first_view - 1);
        s.highest_abort.assign(c.n(), opts.first_view - 1);
        s.quorum = QuorumTracker(c.n(), thresholds_for(c, opts));
        s.round = PerViewState::fresh(s.view, c.primary_of(s.view), c.n());
        return s;
    }

    /// Creates party `id` with the given input and enters the first view.
    inline Step init_party(PartyId id, std::uint32_t n, std::uint32_t f, Value input, ProtocolOptions opts = {})
    {
        Step step{make_initial_state(id, Committee(n, f), input, opts), {}};
        detail::Machine m(step.state);
        m.start_view(opts.first_view);
        step.actions = m.finish();
        return step;
    }

    /// Single entry point: applies one event, returns the successor state and
    /// the actions to carry out. Never touches clocks or sockets.
    inline Step handle_event(PartyState state, const Event &event)
    {
        Step step{std::move(state), {}};
        detail::Machine m(step.state);
        m.dispatch(event);
        step.actions = m.finish();
        return step;
    }

    /// Enters view v directly (v must exceed the current view).
    inline Step start_view(PartyState state, View v) { return handle_event(std::move(state), LocalViewAdvance{v}); }
} // namespace iths
