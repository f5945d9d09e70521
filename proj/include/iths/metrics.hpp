#pragma once

#include "iths/persistence.hpp"
#include "iths/sim.hpp"

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace iths
{
    /// Largest number of words one party can send one peer in a single view:
    /// one message of every kind it may author toward that peer.
    inline constexpr std::size_t kPairWordBound = 2 /*request*/ + 7 /*suggest*/ + 5 /*proof*/ + 4 /*propose*/ +
                                                  5 * 3 /*votes*/ + 2 /*done*/ + 2 /*abort*/;
    static_assert(kPairWordBound == 37);

    struct ViewWords
    {
        View view = 0;
        std::size_t total = 0;
        std::size_t max_pair = 0;
        PartyId max_from = 0;
        PartyId max_to = 0;
    };

    struct Metrics
    {
        std::uint32_t n = 0;
        std::size_t messages = 0;
        std::size_t words = 0;
        std::size_t max_message_words = 0;
        std::optional<std::string> oversized; // first message over the bound, if any

        std::vector<ViewWords> per_view;
        std::size_t max_pair_words = 0;
        std::string max_pair_witness;
        double c_fit = 0.0; // max per-view total / n^2

        std::vector<std::optional<Time>> decision_time;
        std::vector<std::optional<Value>> decision_value;
        std::vector<View> max_view;
        std::vector<std::size_t> views_entered;

        std::size_t persistent_words_min = 0;
        std::size_t persistent_words_max = 0;
        std::size_t transient_words_max = 0;
        double transient_per_n = 0.0;

        bool replay_consistent = true;
        std::string replay_mismatch;
    };

    namespace detail
    {
        /// Re-executes the honest parties of a trace through the core.
        class Replayer
        {
        public:
            explicit Replayer(const Trace &tr) : tr_(tr)
            {
                const auto n = tr.config.n;
                states_.resize(n);
                images_.resize(n);
                expected_.resize(n);
            }

            template <typename Observe>
            void run(Metrics &m, Observe &&observe)
            {
                const auto &cfg = tr_.config;
                for (PartyId p = 1; p <= cfg.n; ++p)
                {
                    if (tr_.honest(p))
                    {
                        take(p, init_party(p, cfg.n, cfg.f, tr_.inputs[p - 1], cfg.options), m, observe);
                    }
                }
                for (const auto &e : tr_.events)
                {
                    if (!tr_.honest(e.party))
                    {
                        continue;
                    }
                    auto &st = states_[e.party - 1];
                    switch (e.dir)
                    {
                    case Dir::Recv:
                        take(e.party, handle_event(*st, Delivered{e.sender, *e.msg}), m, observe);
                        break;
                    case Dir::Timer:
                        take(e.party, handle_event(*st, ViewTimerFired{e.view}), m, observe);
                        break;
                    case Dir::Crash:
                        images_[e.party - 1] = snapshot(*st);
                        break;
                    case Dir::Reboot:
                        take(e.party, reboot(*images_[e.party - 1], cfg.n, cfg.f, cfg.options), m, observe);
                        break;
                    case Dir::Send:
                        match_send(e, m);
                        break;
                    default:
                        break;
                    }
                }
                for (PartyId p = 1; p <= cfg.n; ++p)
                {
                    if (!expected_[p - 1].empty())
                    {
                        mismatch(m, "party " + std::to_string(p) + " has unsent replayed messages");
                    }
                }
            }

        private:
            template <typename Observe>
            void take(PartyId p, Step step, Metrics &m, Observe &observe)
            {
                states_[p - 1] = std::move(step.state);
                for (const auto &a : step.actions)
                {
                    if (const auto *s = std::get_if<Send>(&a))
                    {
                        expected_[p - 1].push_back(*s);
                    }
                }
                (void)m;
                observe(*states_[p - 1]);
            }

            void match_send(const TraceEvent &e, Metrics &m)
            {
                auto &q = expected_[e.party - 1];
                if (q.empty())
                {
                    mismatch(m, "unexpected send by party " + std::to_string(e.party) + " at t=" + std::to_string(e.t));
                    return;
                }
                const Send want = q.front();
                q.pop_front();
                if (want.to != e.to || want.msg != *e.msg)
                {
                    mismatch(m, "send by party " + std::to_string(e.party) + " at t=" + std::to_string(e.t) +
                                    " differs from replay: " + to_string(*e.msg) + " vs " + to_string(want.msg));
                }
            }

            static void mismatch(Metrics &m, std::string why)
            {
                if (m.replay_consistent)
                {
                    m.replay_consistent = false;
                    m.replay_mismatch = std::move(why);
                }
            }

            const Trace &tr_;
            std::vector<std::optional<PartyState>> states_;
            std::vector<std::optional<PersistentImage>> images_;
            std::vector<std::deque<Send>> expected_;
        };
    } // namespace detail

    /// Recomputes every measurement from the trace alone.
    inline Metrics meter(const Trace &tr)
    {
        const auto n = tr.config.n;
        Metrics m;
        m.n = n;
        m.decision_time.assign(n, std::nullopt);
        m.decision_value.assign(n, std::nullopt);
        m.max_view.assign(n, kNoPrev);
        m.views_entered.assign(n, 0);

        std::vector<View> cur_view(n, tr.config.options.first_view - 1);
        std::map<View, std::map<std::pair<PartyId, PartyId>, std::size_t>> pair_words;

        for (const auto &e : tr.events)
        {
            const PartyId p = e.party;
            switch (e.dir)
            {
            case Dir::View:
                cur_view[p - 1] = e.view;
                m.max_view[p - 1] = std::max(m.max_view[p - 1], e.view);
                ++m.views_entered[p - 1];
                break;
            case Dir::Decide:
                if (!m.decision_time[p - 1])
                {
                    m.decision_time[p - 1] = e.t;
                    m.decision_value[p - 1] = e.value;
                }
                break;
            case Dir::Send: {
                if (!tr.honest(p) || e.to == p)
                {
                    break;
                }
                const std::size_t w = encode(*e.msg).size();
                ++m.messages;
                m.words += w;
                if (w > m.max_message_words)
                {
                    m.max_message_words = w;
                }
                if (w > kMaxMessageWords && !m.oversized)
                {
                    m.oversized = to_string(*e.msg) + " from " + std::to_string(p) + " at t=" + std::to_string(e.t);
                }
                const View tag = e.msg->has_view() ? e.msg->view : cur_view[p - 1];
                pair_words[tag][{p, e.to}] += w;
                break;
            }
            default:
                break;
            }
        }

        double worst_total = 0.0;
        for (const auto &[view, pairs] : pair_words)
        {
            ViewWords vw{.view = view};
            for (const auto &[pair, w] : pairs)
            {
                vw.total += w;
                if (w > vw.max_pair)
                {
                    vw.max_pair = w;
                    vw.max_from = pair.first;
                    vw.max_to = pair.second;
                }
            }
            if (vw.max_pair > m.max_pair_words)
            {
                m.max_pair_words = vw.max_pair;
                m.max_pair_witness = "view " + std::to_string(view) + ": " + std::to_string(vw.max_from) + "->" +
                                     std::to_string(vw.max_to) + " sent " + std::to_string(vw.max_pair) + " words";
            }
            worst_total = std::max(worst_total, static_cast<double>(vw.total));
            m.per_view.push_back(vw);
        }
        m.c_fit = worst_total / (static_cast<double>(n) * n);

        bool first = true;
        detail::Replayer replayer(tr);
        replayer.run(m, [&](const PartyState &s) {
            const std::size_t pw = image_words(snapshot(s));
            const std::size_t tw = transient_words(s);
            if (first)
            {
                m.persistent_words_min = m.persistent_words_max = pw;
                first = false;
            }
            m.persistent_words_min = std::min(m.persistent_words_min, pw);
            m.persistent_words_max = std::max(m.persistent_words_max, pw);
            m.transient_words_max = std::max(m.transient_words_max, tw);
        });
        m.transient_per_n = static_cast<double>(m.transient_words_max) / n;
        return m;
    }
} // namespace iths
