#pragma once

#include "iths/checks.hpp"
#include "iths/metrics.hpp"
#include "iths/scenario.hpp"
#include "iths/sim.hpp"
#include "iths/trace_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace iths
{
    /// Process exit codes shared by every CLI verb.
    enum ExitCode : int
    {
        kExitPass = 0,
        kExitViolation = 1,
        kExitUsage = 2,
        kExitInconclusive = 3,
    };

    struct RunReport
    {
        Trace trace;
        Metrics metrics;
        std::vector<CheckResult> results;

        [[nodiscard]] bool ok() const
        {
            return std::all_of(results.begin(), results.end(), [](const auto &r) { return r.ok; });
        }
    };

    inline std::vector<CheckResult> evaluate(const Trace &tr, const Metrics &m, const Checks &c)
    {
        std::vector<CheckResult> out;
        if (c.agreement)
        {
            out.push_back(check_agreement(tr));
        }
        if (c.validity)
        {
            out.push_back(check_validity(tr));
        }
        if (c.unique_done)
        {
            out.push_back(check_unique_done(tr));
        }
        if (c.replay_consistent)
        {
            out.push_back(check_replay(m));
        }
        if (c.terminate_by)
        {
            out.push_back(check_terminate_by(tr, *c.terminate_by));
        }
        if (c.latency_bound)
        {
            out.push_back(check_latency_bound(tr));
        }
        if (c.optimistic_bound)
        {
            out.push_back(check_optimistic_bound(tr));
        }
        if (c.abort_propagation)
        {
            out.push_back(check_abort_propagation(tr));
        }
        if (c.termination_propagation)
        {
            out.push_back(check_termination_propagation(tr));
        }
        if (c.word_bounds)
        {
            out.push_back(check_word_bounds(tr, m));
        }
        if (c.persistent_size_bound)
        {
            out.push_back(check_persistent_size(m, *c.persistent_size_bound));
        }
        if (c.transient_per_n)
        {
            out.push_back(check_transient_size(m, *c.transient_per_n));
        }
        return out;
    }

    inline RunReport run_scenario(const Scenario &s)
    {
        RunReport r;
        r.trace = run(s.config, s.adversary, s.inputs);
        r.metrics = meter(r.trace);
        r.results = evaluate(r.trace, r.metrics, s.checks);
        return r;
    }

    // ------------------------------------------------------------ reporting

    inline ojson metrics_to_json(const Metrics &m)
    {
        ojson j;
        j["n"] = m.n;
        j["messages"] = m.messages;
        j["words"] = m.words;
        j["max_message_words"] = m.max_message_words;
        j["oversized"] = m.oversized ? ojson(*m.oversized) : ojson(nullptr);
        j["max_pair_words"] = m.max_pair_words;
        j["max_pair_witness"] = m.max_pair_witness;
        j["c_fit"] = m.c_fit;
        ojson views = ojson::array();
        for (const auto &v : m.per_view)
        {
            views.push_back({{"view", v.view},
                             {"total", v.total},
                             {"max_pair", v.max_pair},
                             {"max_from", v.max_from},
                             {"max_to", v.max_to}});
        }
        j["per_view"] = views;
        ojson parties = ojson::array();
        for (std::size_t i = 0; i < m.decision_time.size(); ++i)
        {
            parties.push_back({{"party", i + 1},
                               {"decided_at", m.decision_time[i] ? ojson(*m.decision_time[i]) : ojson(nullptr)},
                               {"value", m.decision_value[i] ? ojson(m.decision_value[i]->token) : ojson(nullptr)},
                               {"max_view", m.max_view[i]},
                               {"views_entered", m.views_entered[i]}});
        }
        j["parties"] = parties;
        j["persistent_words_min"] = m.persistent_words_min;
        j["persistent_words_max"] = m.persistent_words_max;
        j["transient_words_max"] = m.transient_words_max;
        j["transient_per_n"] = m.transient_per_n;
        j["replay_consistent"] = m.replay_consistent;
        j["replay_mismatch"] = m.replay_mismatch;
        return j;
    }

    inline ojson results_to_json(const std::vector<CheckResult> &results)
    {
        ojson a = ojson::array();
        for (const auto &r : results)
        {
            ojson ex = ojson::array();
            for (const auto &e : r.excerpt)
            {
                ex.push_back(event_to_json(e));
            }
            a.push_back({{"name", r.name}, {"ok", r.ok}, {"detail", r.detail}, {"excerpt", ex}});
        }
        return a;
    }

    inline void write_text(const std::filesystem::path &p, const std::string &text)
    {
        if (p.has_parent_path())
        {
            std::filesystem::create_directories(p.parent_path());
        }
        std::ofstream out(p, std::ios::binary);
        if (!out)
        {
            throw std::runtime_error("cannot write " + p.string());
        }
        out << text;
    }

    /// trace.jsonl, metrics.json and report.json under `dir`.
    inline void write_artifacts(const std::filesystem::path &dir, const RunReport &r, const Checks &checks,
                                const std::string &prefix = "")
    {
        write_text(dir / (prefix + "trace.jsonl"), trace_to_jsonl(r.trace, checks));
        write_text(dir / (prefix + "metrics.json"), metrics_to_json(r.metrics).dump(2) + "\n");
        ojson rep;
        rep["outcome"] = std::string(outcome_name(r.trace.outcome));
        rep["end_time"] = r.trace.end_time;
        rep["ok"] = r.ok();
        rep["checks"] = results_to_json(r.results);
        write_text(dir / (prefix + "report.json"), rep.dump(2) + "\n");
    }

    // ---------------------------------------------------------------- fuzz

    /// Ranges for the fields a fuzz template leaves open.
    struct FuzzSpace
    {
        std::vector<Strategy> strategies = all_strategies();
        std::vector<NetPolicyKind> net_policies = {NetPolicyKind::Eager, NetPolicyKind::MaxDelay,
                                                   NetPolicyKind::RandomUniform, NetPolicyKind::TargetedStall};
        std::uint32_t corrupt_min = 0;
        std::optional<std::uint32_t> corrupt_max; // default f
        Time gst_max_deltas = 50;
        std::uint32_t crash_min = 0;
        std::uint32_t crash_max = 0;
        std::uint32_t distinct_inputs = 2;
        Time horizon_deltas = 500;
    };

    /// A base scenario plus the set of keys the template pinned. Pinned keys
    /// are copied into every run; the rest are drawn per run.
    struct FuzzTemplate
    {
        Scenario base;
        std::set<std::string> pinned;
        FuzzSpace space;
    };

    inline FuzzTemplate parse_fuzz_template(const std::string &text)
    {
        ojson j = parse_json_text(text);
        if (!j.is_object())
        {
            throw ParseError("template must be an object", 1);
        }
        FuzzTemplate t;
        for (const auto &[k, v] : j.items())
        {
            t.pinned.insert(k);
        }
        if (j.contains("fuzz"))
        {
            detail::Reader r(j.at("fuzz"), text, "fuzz");
            auto &sp = t.space;
            if (r.has("strategies"))
            {
                sp.strategies.clear();
                for (const auto &x : r.array("strategies"))
                {
                    const auto s = x.is_string() ? strategy_from_name(x.get<std::string>()) : std::nullopt;
                    if (!s)
                    {
                        r.fail("unknown strategy in fuzz.strategies", "strategies");
                    }
                    sp.strategies.push_back(*s);
                }
            }
            if (r.has("net_policies"))
            {
                sp.net_policies.clear();
                for (const auto &x : r.array("net_policies"))
                {
                    const auto p = x.is_string() ? policy_from_name(x.get<std::string>()) : std::nullopt;
                    if (!p)
                    {
                        r.fail("unknown policy in fuzz.net_policies", "net_policies");
                    }
                    sp.net_policies.push_back(*p);
                }
            }
            sp.corrupt_min = static_cast<std::uint32_t>(r.unsigned_integer("corrupt_min", 0));
            if (r.has("corrupt_max"))
            {
                sp.corrupt_max = static_cast<std::uint32_t>(r.unsigned_integer("corrupt_max", 0));
            }
            sp.gst_max_deltas = static_cast<Time>(r.unsigned_integer("gst_max_deltas", 50));
            sp.crash_min = static_cast<std::uint32_t>(r.unsigned_integer("crash_min", 0));
            sp.crash_max = static_cast<std::uint32_t>(r.unsigned_integer("crash_max", 0));
            sp.distinct_inputs = static_cast<std::uint32_t>(r.unsigned_integer("distinct_inputs", 2));
            sp.horizon_deltas = static_cast<Time>(r.unsigned_integer("horizon_deltas", 500));
            r.finish();
            if (sp.strategies.empty() || sp.net_policies.empty() || sp.distinct_inputs == 0 ||
                sp.crash_min > sp.crash_max || sp.horizon_deltas == 0)
            {
                throw ParseError("fuzz block has an empty or inverted range", detail::line_of_key(text, "fuzz"));
            }
        }
        ojson base = j;
        base.erase("fuzz");
        if (!base.contains("inputs") && base.contains("n") && base.at("n").is_number_integer())
        {
            base["inputs"] = std::vector<std::uint64_t>(base.at("n").get<std::size_t>(), 1);
        }
        t.base = scenario_from_json(base, text);
        const auto f = t.base.config.f;
        const auto cmax = t.space.corrupt_max.value_or(f);
        if (t.space.corrupt_min > cmax || (cmax > f && !t.base.adversary.allow_excess_corruption))
        {
            throw ParseError("fuzz corrupt range must lie within 0..f", detail::line_of_key(text, "fuzz"));
        }
        return t;
    }

    inline FuzzTemplate load_fuzz_template(const std::string &path) { return parse_fuzz_template(read_file(path)); }

    inline std::uint64_t fuzz_run_seed(std::uint64_t master, std::uint64_t index) { return mix_seed(master, index); }

    /// The scenario of run `index`; a pure function of its arguments.
    inline Scenario fuzz_scenario(const FuzzTemplate &t, std::uint64_t master_seed, std::uint64_t index)
    {
        Scenario s = t.base;
        const auto &sp = t.space;
        const auto n = s.config.n;
        const auto delta = s.config.delta;
        const auto run_seed = fuzz_run_seed(master_seed, index);
        if (!t.pinned.contains("seed"))
        {
            s.config.seed = run_seed;
        }
        Rng rng(mix_seed(run_seed, 7));
        auto open = [&](const char *k) { return !t.pinned.contains(k); };

        if (open("gst"))
        {
            s.config.gst = rng.between(0, sp.gst_max_deltas * delta);
        }
        if (open("max_time"))
        {
            s.config.max_time = s.config.gst + sp.horizon_deltas * delta;
        }
        if (open("corrupt"))
        {
            s.adversary.corrupt.clear();
            const auto cmax = sp.corrupt_max.value_or(s.config.f);
            const auto k = static_cast<std::uint32_t>(rng.between(sp.corrupt_min, cmax));
            std::vector<PartyId> ids;
            for (PartyId p = 1; p <= n; ++p)
            {
                ids.push_back(p);
            }
            for (std::uint32_t i = 0; i < k; ++i)
            {
                const auto pick = static_cast<std::size_t>(rng.between(i, n - 1));
                std::swap(ids[i], ids[pick]);
                s.adversary.corrupt[ids[i]] = rng.pick(sp.strategies);
            }
        }
        if (open("net_policy"))
        {
            s.adversary.net.kind = rng.pick(sp.net_policies);
        }
        if (open("victims"))
        {
            s.adversary.net.victims = {static_cast<PartyId>(rng.between(1, n))};
        }
        if (open("inputs"))
        {
            for (auto &v : s.inputs)
            {
                v = Value{static_cast<std::uint64_t>(rng.between(1, sp.distinct_inputs))};
            }
        }
        if (open("crash_plan"))
        {
            s.adversary.crash_plan.clear();
            std::vector<PartyId> honest;
            for (PartyId p = 1; p <= n; ++p)
            {
                if (!s.adversary.is_corrupt(p))
                {
                    honest.push_back(p);
                }
            }
            const auto hi = std::min<std::uint32_t>(sp.crash_max, static_cast<std::uint32_t>(honest.size()));
            const auto lo = std::min(sp.crash_min, hi);
            const auto k = static_cast<std::uint32_t>(rng.between(lo, hi));
            for (std::uint32_t i = 0; i < k; ++i)
            {
                const auto pick = static_cast<std::size_t>(rng.between(i, honest.size() - 1));
                std::swap(honest[i], honest[pick]);
                const Time crash = rng.between(0, s.config.gst + 20 * delta);
                const Time reboot = crash + rng.between(1, 30 * delta);
                s.adversary.crash_plan.push_back(CrashEvent{honest[i], crash, reboot});
            }
        }
        // Offsets stay empty unless pinned: the simulator draws them from the seed.
        return s;
    }

    struct Counterexample
    {
        std::uint64_t index = 0;
        Scenario scenario;
        RunReport report;
    };

    struct Distribution
    {
        std::vector<double> samples;

        [[nodiscard]] ojson to_json() const
        {
            if (samples.empty())
            {
                return nullptr;
            }
            auto s = samples;
            std::sort(s.begin(), s.end());
            auto q = [&](double p) { return s[static_cast<std::size_t>(p * static_cast<double>(s.size() - 1))]; };
            return {{"count", s.size()}, {"min", s.front()}, {"p50", q(0.5)}, {"p95", q(0.95)}, {"max", s.back()}};
        }
    };

    struct FuzzSummary
    {
        std::uint64_t master_seed = 0;
        std::uint64_t requested = 0;
        std::uint64_t completed = 0;
        std::optional<Counterexample> counterexample;
        std::map<std::string, std::uint64_t> strategy_runs;
        std::map<std::string, std::uint64_t> outcomes;
        std::uint64_t crash_runs = 0;
        Distribution latency_deltas; // all decided, measured from the first good view start
        std::size_t worst_message_words = 0;
        std::size_t worst_pair_words = 0;
        double worst_c_fit = 0.0;
        double worst_transient_per_n = 0.0;
        std::size_t worst_persistent_words = 0;

        [[nodiscard]] ojson to_json() const
        {
            ojson j;
            j["master_seed"] = master_seed;
            j["runs"] = requested;
            j["completed"] = completed;
            j["violations"] = counterexample ? 1 : 0;
            if (counterexample)
            {
                const auto &c = *counterexample;
                ojson failed = ojson::array();
                for (const auto &r : c.report.results)
                {
                    if (!r.ok)
                    {
                        failed.push_back({{"name", r.name}, {"detail", r.detail}});
                    }
                }
                j["counterexample"] = {{"run", c.index},
                                       {"seed", c.scenario.config.seed},
                                       {"failed", failed},
                                       {"scenario", scenario_to_json(scenario_of(c.report.trace, c.scenario.checks))}};
            }
            else
            {
                j["counterexample"] = nullptr;
            }
            j["strategy_runs"] = strategy_runs;
            j["outcomes"] = outcomes;
            j["crash_runs"] = crash_runs;
            j["latency_deltas"] = latency_deltas.to_json();
            j["worst"] = {{"max_message_words", worst_message_words},
                          {"max_pair_words", worst_pair_words},
                          {"c_fit", worst_c_fit},
                          {"transient_per_n", worst_transient_per_n},
                          {"persistent_words", worst_persistent_words}};
            return j;
        }
    };

    /// Checks every fuzz run asserts, on top of whatever the template enables.
    inline Checks fuzz_checks(Checks c, const Scenario &s)
    {
        c.agreement = true;
        c.validity = true;
        c.unique_done = true;
        c.abort_propagation = true;
        c.termination_propagation = true;
        c.word_bounds = true;
        if (!c.terminate_by)
        {
            c.terminate_by = s.config.max_time;
        }
        return c;
    }

    /// Runs until `runs` complete or a check fails; halts on the first failure.
    inline FuzzSummary fuzz(const FuzzTemplate &t, std::uint64_t runs, std::uint64_t master_seed,
                            const std::function<void(std::uint64_t, const RunReport &)> &on_run = {})
    {
        FuzzSummary sum;
        sum.master_seed = master_seed;
        sum.requested = runs;
        for (std::uint64_t i = 0; i < runs; ++i)
        {
            Scenario s = fuzz_scenario(t, master_seed, i);
            s.checks = fuzz_checks(s.checks, s);
            RunReport rep = run_scenario(s);
            ++sum.completed;
            for (const auto &[p, strat] : s.adversary.corrupt)
            {
                ++sum.strategy_runs[std::string(strategy_name(strat))];
            }
            if (s.adversary.corrupt.empty())
            {
                ++sum.strategy_runs["none"];
            }
            ++sum.outcomes[std::string(outcome_name(rep.trace.outcome))];
            sum.crash_runs += s.adversary.crash_plan.empty() ? 0 : 1;
            const auto &m = rep.metrics;
            sum.worst_message_words = std::max(sum.worst_message_words, m.max_message_words);
            if (s.adversary.crash_plan.empty())
            {
                sum.worst_pair_words = std::max(sum.worst_pair_words, m.max_pair_words);
            }
            sum.worst_c_fit = std::max(sum.worst_c_fit, m.c_fit);
            sum.worst_transient_per_n = std::max(sum.worst_transient_per_n, m.transient_per_n);
            sum.worst_persistent_words = std::max(sum.worst_persistent_words, m.persistent_words_max);
            if (const auto good = first_good_view(rep.trace); good && rep.trace.outcome == Outcome::AllDecided)
            {
                Time last = 0;
                for (const auto &d : m.decision_time)
                {
                    last = std::max(last, d.value_or(0));
                }
                sum.latency_deltas.samples.push_back(static_cast<double>(std::max<Time>(0, last - good->second)) /
                                                     static_cast<double>(s.config.delta));
            }
            if (on_run)
            {
                on_run(i, rep);
            }
            if (!rep.ok())
            {
                sum.counterexample = Counterexample{i, s, std::move(rep)};
                break;
            }
        }
        return sum;
    }

    // -------------------------------------------------------------- replay

    struct ReplayResult
    {
        bool identical = false;
        std::size_t first_diff_line = 0; // 1-based, 0 when identical
        std::string expected;
        std::string actual;
    };

    /// Re-runs the scenario in a trace's meta line and compares the output
    /// byte for byte.
    inline ReplayResult replay_trace_text(const std::string &text)
    {
        const auto loaded = parse_trace(text);
        const auto fresh = run(loaded.scenario.config, loaded.scenario.adversary, loaded.scenario.inputs);
        const auto again = trace_to_jsonl(fresh, loaded.scenario.checks);
        ReplayResult r;
        if (again == text)
        {
            r.identical = true;
            return r;
        }
        std::istringstream a(text);
        std::istringstream b(again);
        std::string la;
        std::string lb;
        std::size_t line = 0;
        while (true)
        {
            ++line;
            const bool ga = static_cast<bool>(std::getline(a, la));
            const bool gb = static_cast<bool>(std::getline(b, lb));
            if (!ga && !gb)
            {
                break;
            }
            if (!ga || !gb || la != lb)
            {
                r.first_diff_line = line;
                r.expected = ga ? la : "<eof>";
                r.actual = gb ? lb : "<eof>";
                break;
            }
        }
        return r;
    }
} // namespace iths
