#pragma once

#include "iths/metrics.hpp"
#include "iths/sim.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace iths
{
    struct CheckResult
    {
        std::string name;
        bool ok = true;
        std::string detail;
        std::vector<TraceEvent> excerpt; // a few events that witness a failure
    };

    /// Transient words allowed per party, as a multiple of n.
    inline constexpr std::size_t kTransientPerN = 64;

    namespace detail
    {
        inline std::set<PartyId> crashed_parties(const Trace &tr)
        {
            std::set<PartyId> out;
            for (const auto &c : tr.adversary.crash_plan)
            {
                out.insert(c.party);
            }
            return out;
        }

        /// GST, or 2Δ after the last planned reboot if later. A down party
        /// counts against f and misses what was sent meanwhile; the recovery
        /// round trip takes 2Δ, so timing guarantees start after it.
        inline Time settled_time(const Trace &tr)
        {
            Time t = tr.config.gst;
            for (const auto &c : tr.adversary.crash_plan)
            {
                t = std::max(t, c.reboot_at + 2 * tr.config.delta);
            }
            return t;
        }

        inline std::vector<const TraceEvent *> honest_decisions(const Trace &tr)
        {
            std::vector<const TraceEvent *> out;
            std::set<PartyId> seen;
            for (const auto &e : tr.events)
            {
                if (e.dir == Dir::Decide && tr.honest(e.party) && seen.insert(e.party).second)
                {
                    out.push_back(&e);
                }
            }
            return out;
        }

        /// Earliest time each honest party reached a view >= v, per party.
        inline std::map<View, Time> first_start_by_view(const Trace &tr, const std::set<PartyId> &skip)
        {
            std::map<View, Time> out;
            for (const auto &e : tr.events)
            {
                if (e.dir == Dir::View && tr.honest(e.party) && !skip.contains(e.party) && !out.contains(e.view))
                {
                    out[e.view] = e.t;
                }
            }
            return out;
        }
    } // namespace detail

    inline CheckResult check_agreement(const Trace &tr)
    {
        CheckResult r{.name = "agreement"};
        const auto d = detail::honest_decisions(tr);
        for (const auto *e : d)
        {
            if (e->value != d.front()->value)
            {
                r.ok = false;
                r.detail = "party " + std::to_string(d.front()->party) + " decided " + to_string(*d.front()->value) +
                           ", party " + std::to_string(e->party) + " decided " + to_string(*e->value);
                r.excerpt = {*d.front(), *e};
                return r;
            }
        }
        r.detail = std::to_string(d.size()) + " nonfaulty decisions agree";
        return r;
    }

    /// Applies only when every party is nonfaulty and all inputs are equal.
    inline CheckResult check_validity(const Trace &tr)
    {
        CheckResult r{.name = "validity"};
        const bool all_same = std::all_of(tr.inputs.begin(), tr.inputs.end(), [&](Value v) { return v == tr.inputs[0]; });
        if (!tr.adversary.corrupt.empty() || !all_same)
        {
            r.detail = "not applicable";
            return r;
        }
        for (const auto *e : detail::honest_decisions(tr))
        {
            if (*e->value != tr.inputs[0])
            {
                r.ok = false;
                r.detail = "party " + std::to_string(e->party) + " decided " + to_string(*e->value) +
                           " but every input was " + to_string(tr.inputs[0]);
                r.excerpt = {*e};
                return r;
            }
        }
        r.detail = "all decisions equal the common input";
        return r;
    }

    /// Every done message sent by a nonfaulty party carries the same value.
    inline CheckResult check_unique_done(const Trace &tr)
    {
        CheckResult r{.name = "unique_done"};
        const TraceEvent *first = nullptr;
        for (const auto &e : tr.events)
        {
            if (e.dir != Dir::Send || !tr.honest(e.party) || e.msg->kind != Kind::Done)
            {
                continue;
            }
            if (!first)
            {
                first = &e;
            }
            else if (e.msg->val != first->msg->val)
            {
                r.ok = false;
                r.detail = "done values " + to_string(first->msg->val) + " and " + to_string(e.msg->val);
                r.excerpt = {*first, e};
                return r;
            }
        }
        r.detail = first ? "one done value" : "no done sent";
        return r;
    }

    inline CheckResult check_terminate_by(const Trace &tr, Time deadline)
    {
        CheckResult r{.name = "terminate_by"};
        const auto d = detail::honest_decisions(tr);
        std::set<PartyId> decided;
        for (const auto *e : d)
        {
            decided.insert(e->party);
            if (e->t > deadline)
            {
                r.ok = false;
                r.detail = "party " + std::to_string(e->party) + " decided at " + std::to_string(e->t) + " > " +
                           std::to_string(deadline);
                r.excerpt = {*e};
                return r;
            }
        }
        for (PartyId p = 1; p <= tr.config.n; ++p)
        {
            if (tr.honest(p) && !decided.contains(p))
            {
                r.ok = false;
                r.detail = "party " + std::to_string(p) + " never decided (run ended: " +
                           std::string(outcome_name(tr.outcome)) + " at " + std::to_string(tr.end_time) + ")";
                return r;
            }
        }
        r.detail = "all nonfaulty decided by " + std::to_string(deadline);
        return r;
    }

    /// First view whose primary is nonfaulty and whose first nonfaulty start
    /// is at or after GST, with that start time.
    inline std::optional<std::pair<View, Time>> first_good_view(const Trace &tr)
    {
        const Committee c(tr.config.n, tr.config.f);
        for (const auto &[v, t] : detail::first_start_by_view(tr, {}))
        {
            if (t >= tr.config.gst && tr.honest(c.primary_of(v)))
            {
                return std::make_pair(v, t);
            }
        }
        return std::nullopt;
    }

    namespace detail
    {
        inline CheckResult decide_within(const Trace &tr, std::string name, Time per_view_bound)
        {
            CheckResult r{.name = std::move(name)};
            const auto good = first_good_view(tr);
            const auto d = honest_decisions(tr);
            std::size_t honest = 0;
            for (PartyId p = 1; p <= tr.config.n; ++p)
            {
                honest += tr.honest(p) ? 1 : 0;
            }
            if (!good)
            {
                if (d.size() == honest)
                {
                    r.detail = "all decided before any post-GST view with a nonfaulty primary";
                    return r;
                }
                r.ok = false;
                r.detail = "no post-GST view with a nonfaulty primary started and not everyone decided";
                return r;
            }
            const auto [v, start] = *good;
            const Time limit = start + per_view_bound;
            if (d.size() != honest)
            {
                r.ok = false;
                r.detail = "only " + std::to_string(d.size()) + " of " + std::to_string(honest) +
                           " nonfaulty parties decided; view " + std::to_string(v) + " started at " +
                           std::to_string(start);
                return r;
            }
            for (const auto *e : d)
            {
                if (e->t > limit || e->view > v)
                {
                    r.ok = false;
                    r.detail = "party " + std::to_string(e->party) + " decided at t=" + std::to_string(e->t) +
                               " in view " + std::to_string(e->view) + "; view " + std::to_string(v) +
                               " started at " + std::to_string(start) + ", limit " + std::to_string(limit);
                    r.excerpt = {*e};
                    return r;
                }
            }
            r.detail = "view " + std::to_string(v) + " started at " + std::to_string(start) +
                       ", all decided by " + std::to_string(limit);
            return r;
        }
    } // namespace detail

    /// All nonfaulty parties decide within the first good view, at most 11Δ
    /// after its first nonfaulty start.
    inline CheckResult check_latency_bound(const Trace &tr)
    {
        return detail::decide_within(tr, "latency_bound", kTimeoutDeltas * tr.config.delta);
    }

    /// Same, measured against the actual delay δ.
    inline CheckResult check_optimistic_bound(const Trace &tr)
    {
        return detail::decide_within(tr, "optimistic_bound", kTimeoutDeltas * tr.config.small_delta);
    }

    /// After GST, once a nonfaulty party starts view v, every nonfaulty party
    /// is in v or later, or has terminated, within 2Δ. Parties with a crash
    /// plan are left out, and the clock starts after the last reboot.
    inline CheckResult check_abort_propagation(const Trace &tr)
    {
        CheckResult r{.name = "abort_propagation"};
        const auto crashed = detail::crashed_parties(tr);
        const Time window = 2 * tr.config.delta;
        const auto n = tr.config.n;
        // view_at[p] = (time, view) history; decided_at[p].
        std::vector<std::vector<std::pair<Time, View>>> hist(n);
        std::vector<std::optional<Time>> decided_at(n);
        for (const auto &e : tr.events)
        {
            if (!tr.honest(e.party) || crashed.contains(e.party))
            {
                continue;
            }
            if (e.dir == Dir::View)
            {
                hist[e.party - 1].emplace_back(e.t, e.view);
            }
            else if (e.dir == Dir::Decide && !decided_at[e.party - 1])
            {
                decided_at[e.party - 1] = e.t;
            }
        }
        auto view_by = [&](PartyId p, Time t) {
            View v = kNoPrev;
            for (const auto &[when, view] : hist[p - 1])
            {
                if (when <= t)
                {
                    v = std::max(v, view);
                }
            }
            return v;
        };
        std::size_t checked = 0;
        for (const auto &[v, start] : detail::first_start_by_view(tr, crashed))
        {
            if (start < detail::settled_time(tr))
            {
                continue;
            }
            const Time limit = start + window;
            if (limit > tr.end_time && tr.outcome != Outcome::AllDecided)
            {
                continue;
            }
            ++checked;
            for (PartyId p = 1; p <= n; ++p)
            {
                if (!tr.honest(p) || crashed.contains(p))
                {
                    continue;
                }
                const bool done = decided_at[p - 1] && *decided_at[p - 1] <= limit;
                const bool joined = view_by(p, limit) >= v;
                // A run that stops because everyone decided has nothing left to check.
                const bool run_over = tr.outcome == Outcome::AllDecided && limit > tr.end_time;
                if (!done && !joined && !run_over)
                {
                    r.ok = false;
                    r.detail = "view " + std::to_string(v) + " first started at " + std::to_string(start) +
                               " but party " + std::to_string(p) + " was in view " +
                               std::to_string(view_by(p, limit)) + " at " + std::to_string(limit);
                    return r;
                }
            }
        }
        r.detail = std::to_string(checked) + " post-GST view starts checked";
        return r;
    }

    /// After a nonfaulty party terminates, every nonfaulty party terminates
    /// by max(t, GST) + 2Δ. Parties with a crash plan are left out, and GST is
    /// pushed to the last reboot.
    inline CheckResult check_termination_propagation(const Trace &tr)
    {
        CheckResult r{.name = "termination_propagation"};
        const auto crashed = detail::crashed_parties(tr);
        std::map<PartyId, Time> decided;
        for (const auto *e : detail::honest_decisions(tr))
        {
            if (!crashed.contains(e->party))
            {
                decided[e->party] = e->t;
            }
        }
        if (decided.empty())
        {
            r.detail = "no termination";
            return r;
        }
        Time first = decided.begin()->second;
        for (const auto &[p, t] : decided)
        {
            first = std::min(first, t);
        }
        const Time limit = std::max(first, detail::settled_time(tr)) + 2 * tr.config.delta;
        for (PartyId p = 1; p <= tr.config.n; ++p)
        {
            if (!tr.honest(p) || crashed.contains(p))
            {
                continue;
            }
            const auto it = decided.find(p);
            if (it == decided.end())
            {
                if (tr.end_time < limit)
                {
                    continue; // ran out of horizon before the window closed
                }
                r.ok = false;
                r.detail = "party " + std::to_string(p) + " never terminated; first termination at " +
                           std::to_string(first);
                return r;
            }
            if (it->second > limit)
            {
                r.ok = false;
                r.detail = "party " + std::to_string(p) + " terminated at " + std::to_string(it->second) +
                           ", limit " + std::to_string(limit);
                return r;
            }
        }
        r.detail = "all terminated by " + std::to_string(limit);
        return r;
    }

    /// Every message fits in 7 words; without crashes, no party sends any
    /// peer more than 37 words attributed to one view.
    inline CheckResult check_word_bounds(const Trace &tr, const Metrics &m)
    {
        CheckResult r{.name = "word_bounds"};
        if (m.oversized)
        {
            r.ok = false;
            r.detail = "oversized message " + *m.oversized;
            return r;
        }
        if (tr.adversary.crash_plan.empty() && m.max_pair_words > kPairWordBound)
        {
            r.ok = false;
            r.detail = m.max_pair_witness + " (bound " + std::to_string(kPairWordBound) + ")";
            return r;
        }
        r.detail = "max message " + std::to_string(m.max_message_words) + " words, max per pair per view " +
                   std::to_string(m.max_pair_words);
        return r;
    }

    inline CheckResult check_persistent_size(const Metrics &m, std::size_t bound)
    {
        CheckResult r{.name = "persistent_size_bound"};
        if (m.persistent_words_max > bound || m.persistent_words_min != m.persistent_words_max)
        {
            r.ok = false;
        }
        r.detail = "persistent image " + std::to_string(m.persistent_words_min) + ".." +
                   std::to_string(m.persistent_words_max) + " words, bound " + std::to_string(bound);
        return r;
    }

    inline CheckResult check_transient_size(const Metrics &m, std::size_t per_n)
    {
        CheckResult r{.name = "transient_size_bound"};
        const std::size_t bound = per_n * m.n;
        r.ok = m.transient_words_max <= bound;
        r.detail = "max transient " + std::to_string(m.transient_words_max) + " words, bound " + std::to_string(bound);
        return r;
    }

    inline CheckResult check_replay(const Metrics &m)
    {
        CheckResult r{.name = "replay_consistent"};
        r.ok = m.replay_consistent;
        r.detail = m.replay_consistent ? "trace matches the core" : m.replay_mismatch;
        return r;
    }
} // namespace iths
