// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Set ITHS_ACCEPTANCE_SCALE (e.g. 0.1) to shrink the
// run counts for a quick look; the default is full scale.

#include "iths/iths.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

using namespace iths;

namespace
{
    double scale()
    {
        if (const char *s = std::getenv("ITHS_ACCEPTANCE_SCALE"))
        {
            return std::max(0.001, std::atof(s));
        }
        return 1.0;
    }

    std::uint64_t scaled(std::uint64_t runs) { return std::max<std::uint64_t>(1, std::llround(runs * scale())); }

    struct Scoreboard
    {
        int failed = 0;

        void report(int id, bool ok, const std::string &what, const std::string &detail)
        {
            std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << what << " -- " << detail
                      << std::endl;
            failed += ok ? 0 : 1;
        }
    };

    /// Fuzz totals across several batches.
    struct Totals
    {
        std::uint64_t runs = 0;
        std::uint64_t decided_runs = 0;
        std::size_t max_message = 0;
        std::size_t max_pair = 0;
        double c_fit = 0;
        std::string failure;
        std::set<std::string> failed_checks;

        void add(const FuzzSummary &s, const std::string &label)
        {
            runs += s.completed;
            const auto it = s.outcomes.find("all_decided");
            decided_runs += it == s.outcomes.end() ? 0 : it->second;
            max_message = std::max(max_message, s.worst_message_words);
            max_pair = std::max(max_pair, s.worst_pair_words);
            c_fit = std::max(c_fit, s.worst_c_fit);
            if (s.counterexample && failure.empty())
            {
                std::ostringstream out;
                out << label << " run " << s.counterexample->index << " seed " << s.counterexample->scenario.config.seed;
                for (const auto &r : s.counterexample->report.results)
                {
                    if (!r.ok)
                    {
                        failed_checks.insert(r.name);
                        out << " [" << r.name << ": " << r.detail << "]";
                    }
                }
                failure = out.str();
            }
        }
    };

    FuzzTemplate make_template(const std::string &json) { return parse_fuzz_template(json); }

    std::string committee(std::uint32_t n, std::uint32_t f, Time delta = 100)
    {
        return "\"n\": " + std::to_string(n) + ", \"f\": " + std::to_string(f) + ", \"delta\": " + std::to_string(delta);
    }

    std::string fixed(double x)
    {
        std::ostringstream out;
        out.precision(2);
        out << std::fixed << x;
        return out.str();
    }
} // namespace

int main()
{
    Scoreboard result;
    const auto t0 = std::chrono::steady_clock::now();

    // 1, 5, 6, 7 (part): every strategy at both committee sizes, with the
    // propagation and word checks on every trace.
    Totals adversarial;
    for (auto [n, f] : {std::pair{4u, 1u}, std::pair{7u, 2u}})
    {
        for (Strategy s : all_strategies())
        {
            const auto t = make_template("{" + committee(n, f) + ", \"fuzz\": {\"strategies\": [\"" +
                                         std::string(strategy_name(s)) + "\"], \"corrupt_min\": 1}}");
            adversarial.add(fuzz(t, scaled(1000), 1000 + n * 10 + static_cast<std::uint64_t>(s)),
                            "n=" + std::to_string(n) + " " + std::string(strategy_name(s)));
        }
    }
    result.report(1, adversarial.failure.empty(), "agreement under every adversary strategy",
                  std::to_string(adversarial.runs) + " runs over " + std::to_string(all_strategies().size()) +
                      " strategies at n=4 and n=7" +
                      (adversarial.failure.empty() ? "" : "; first failure " + adversarial.failure));

    // 2: no corruption, one input value.
    Totals valid;
    for (auto [n, f] : {std::pair{4u, 1u}, std::pair{7u, 2u}, std::pair{10u, 3u}})
    {
        const auto t = make_template("{" + committee(n, f) + ", \"corrupt\": {}, \"fuzz\": {\"distinct_inputs\": 1}}");
        valid.add(fuzz(t, scaled(400), 2000 + n), "n=" + std::to_string(n));
    }
    result.report(2, valid.failure.empty() && valid.decided_runs == valid.runs,
                  "validity with unanimous inputs and no corruption",
                  std::to_string(valid.runs) + " runs, " + std::to_string(valid.decided_runs) + " decided the common input" +
                      (valid.failure.empty() ? "" : "; " + valid.failure));

    // 3: first view with a nonfaulty primary after GST decides within 11 delta.
    Totals latency;
    for (auto [n, f] : {std::pair{4u, 1u}, std::pair{7u, 2u}, std::pair{10u, 3u}})
    {
        const auto t = make_template("{" + committee(n, f) + ", \"checks\": {\"latency_bound\": true}}");
        latency.add(fuzz(t, scaled(300), 3000 + n), "n=" + std::to_string(n));
    }
    result.report(3, latency.failure.empty(), "decision within 11 delta of the first good view",
                  std::to_string(latency.runs) + " runs with random GST, primaries and strategies" +
                      (latency.failure.empty() ? "" : "; " + latency.failure));

    // 4: optimistic responsiveness with actual delay delta/10.
    Totals optimistic;
    for (auto [n, f] : {std::pair{4u, 1u}, std::pair{7u, 2u}, std::pair{10u, 3u}})
    {
        const auto t = make_template("{" + committee(n, f, 1000) +
                                     ", \"small_delta\": 100, \"gst\": 0, \"net_policy\": \"eager\", "
                                     "\"checks\": {\"optimistic_bound\": true}}");
        optimistic.add(fuzz(t, scaled(300), 4000 + n), "n=" + std::to_string(n));
    }
    result.report(4, optimistic.failure.empty(), "decision within 11 small-delta of the first good view",
                  std::to_string(optimistic.runs) + " runs, messages delayed small_delta = delta/10" +
                      (optimistic.failure.empty() ? "" : "; " + optimistic.failure));

    // 5 and 6 rode along on every fuzz run above.
    const auto propagation_runs = adversarial.runs + valid.runs + latency.runs + optimistic.runs;
    auto check_held = [&](const std::string &name) {
        for (const Totals *t : {&adversarial, &valid, &latency, &optimistic})
        {
            if (t->failed_checks.contains(name))
            {
                return false;
            }
        }
        return true;
    };
    result.report(5, check_held("abort_propagation"), "abort propagation within 2 delta after GST",
                  "checked on " + std::to_string(propagation_runs) + " fuzz traces");
    result.report(6, check_held("termination_propagation"), "termination propagation within 2 delta after GST",
                  "checked on " + std::to_string(propagation_runs) + " fuzz traces");

    // 7: word bounds, and the per-pair count does not grow with n.
    {
        std::vector<std::size_t> pair_words;
        double c_fit = 0;
        bool ok = adversarial.max_message <= kMaxMessageWords && adversarial.max_pair <= kPairWordBound;
        std::string detail;
        for (auto [n, f] : {std::pair{4u, 1u}, std::pair{7u, 2u}, std::pair{10u, 3u}})
        {
            // Late GST forces several views, so the per-view figures cover
            // aborts and view changes as well as the deciding view.
            const auto s = parse_scenario("{" + committee(n, f) + ", \"gst\": 3000, \"seed\": 4, \"inputs\": [" +
                                          [n] {
                                              std::string in;
                                              for (std::uint32_t i = 0; i < n; ++i)
                                              {
                                                  in += (i ? ", " : "") + std::to_string(i % 2 + 1);
                                              }
                                              return in;
                                          }() +
                                          "], \"net_policy\": \"max_delay\", \"checks\": {\"word_bounds\": true}}");
            const auto rep = run_scenario(s);
            ok = ok && rep.ok();
            pair_words.push_back(rep.metrics.max_pair_words);
            c_fit = std::max(c_fit, rep.metrics.c_fit);
        }
        ok = ok && pair_words[0] == pair_words[1] && pair_words[1] == pair_words[2];
        c_fit = std::max(c_fit, adversarial.c_fit);
        detail = "max message " + std::to_string(adversarial.max_message) + " words (bound " +
                 std::to_string(kMaxMessageWords) + "), max per pair per view " + std::to_string(adversarial.max_pair) +
                 " (bound " + std::to_string(kPairWordBound) + "), per-pair at n=4/7/10: " +
                 std::to_string(pair_words[0]) + "/" + std::to_string(pair_words[1]) + "/" +
                 std::to_string(pair_words[2]) + ", fitted c = " + fixed(c_fit);
        result.report(7, ok, "word bounds", detail);
    }

    // 8: storage, plus crash and reboot runs keeping agreement and validity.
    {
        std::string why;
        std::vector<std::size_t> persistent;
        std::size_t transient_per_n = 0;
        for (auto [n, f] : {std::pair{4u, 1u}, std::pair{7u, 2u}, std::pair{10u, 3u}})
        {
            const auto s = parse_scenario("{" + committee(n, f) +
                                          ", \"gst\": 20000, \"seed\": 8, \"net_policy\": \"random_uniform\", \"inputs\": [" +
                                          [n] {
                                              std::string in;
                                              for (std::uint32_t i = 0; i < n; ++i)
                                              {
                                                  in += (i ? ", " : "") + std::to_string(i % 3 + 1);
                                              }
                                              return in;
                                          }() +
                                          "], \"checks\": {\"transient_per_n\": " + std::to_string(kTransientPerN) +
                                          ", \"persistent_size_bound\": 1000000}}");
            const auto rep = run_scenario(s);
            const View views = *std::max_element(rep.metrics.max_view.begin(), rep.metrics.max_view.end());
            for (const auto &r : rep.results)
            {
                if (!r.ok)
                {
                    why += "; n=" + std::to_string(n) + " " + r.name + ": " + r.detail;
                }
            }
            if (rep.metrics.persistent_words_min != rep.metrics.persistent_words_max)
            {
                why += "; n=" + std::to_string(n) + " persistent image size varied";
            }
            if (views <= 3)
            {
                why += "; n=" + std::to_string(n) + " reached only view " + std::to_string(views);
            }
            persistent.push_back(rep.metrics.persistent_words_max);
            transient_per_n = std::max(transient_per_n, rep.metrics.transient_words_max / n);
        }
        if (persistent[0] != persistent[1] || persistent[1] != persistent[2])
        {
            why += "; persistent image size depends on n";
        }
        Totals crash;
        for (auto [n, f] : {std::pair{4u, 1u}, std::pair{7u, 2u}})
        {
            const auto t = make_template("{" + committee(n, f) + ", \"fuzz\": {\"crash_min\": 1, \"crash_max\": " +
                                         std::to_string(f) + "}}");
            crash.add(fuzz(t, scaled(150), 8000 + n), "n=" + std::to_string(n));
        }
        const bool ok = why.empty() && crash.failure.empty();
        result.report(8, ok, "storage bounds and crash recovery",
                      "persistent image " + std::to_string(persistent[0]) + "/" + std::to_string(persistent[1]) + "/" +
                          std::to_string(persistent[2]) + " words at n=4/7/10 across all views, transient <= " +
                          std::to_string(transient_per_n) + "n words (bound " + std::to_string(kTransientPerN) +
                          "n), " + std::to_string(crash.runs) + " crash/reboot runs" +
                          why + (crash.failure.empty() ? "" : "; " + crash.failure));
    }

    // 9: exhaustive small model, with the Byzantine party in every seat, and
    // both mutations caught.
    {
        bool ok = true;
        std::string detail;
        for (PartyId byz = 1; byz <= 4; ++byz)
        {
            ExploreConfig c;
            c.byzantine = byz;
            const auto r = explore(c);
            ok = ok && r.verdict == Verdict::Verified;
            detail += "byzantine " + std::to_string(byz) + ": " + std::string(verdict_name(r.verdict)) + " (" +
                      std::to_string(r.states) + " states)" + (r.reason.empty() ? "" : " " + r.reason) +
                      (r.violation.empty() ? "" : " " + r.violation) + "; ";
        }
        for (int m = 0; m < 2; ++m)
        {
            ExploreConfig c;
            c.byzantine = 2;
            c.options.lowered_quorum = m == 0;
            c.options.skip_key3_round = m == 1;
            const auto r = explore(c);
            ok = ok && r.verdict == Verdict::Counterexample;
            detail += std::string(m == 0 ? "lowered quorum" : "skipped key3") + ": " +
                      std::string(verdict_name(r.verdict)) + (r.violation.empty() ? "" : " (" + r.violation + ")") +
                      (m == 0 ? "; " : "");
        }
        result.report(9, ok, "exhaustive n=4, f=1, one view, full Byzantine menu", detail);
    }

    // 10: reported runs replay byte for byte from their seeds.
    {
        std::uint64_t checked = 0;
        bool ok = true;
        const auto t = make_template("{" + committee(4, 1) + ", \"fuzz\": {\"crash_max\": 1}}");
        for (std::uint64_t i = 0; i < scaled(100); ++i)
        {
            const auto s = fuzz_scenario(t, 10, i);
            const auto text = trace_to_jsonl(run_scenario(s).trace, s.checks);
            ok = ok && replay_trace_text(text).identical;
            ++checked;
        }
        const auto again = fuzz(t, scaled(50), 10).to_json().dump();
        ok = ok && again == fuzz(t, scaled(50), 10).to_json().dump();
        result.report(10, ok, "determinism and byte-identical replay",
                      std::to_string(checked) + " traces replayed, fuzz summary reproduced");
    }

    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (result.failed ? "FAILED " : "ALL PASSED ") << "(" << fixed(secs) << " s)" << std::endl;
    return result.failed ? 1 : 0;
}
