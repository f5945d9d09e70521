#include "iths/iths.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

using namespace iths;

namespace
{
    struct Options
    {
        std::string file;
        std::string out;
        std::uint64_t runs = 0;
        std::uint64_t seed = 0;
        std::uint32_t n = 4;
        std::uint32_t f = 1;
        View views = 1;
        PartyId byz = 0;
        std::size_t depth = 1000;
        std::size_t max_states = 4'000'000;
        bool lowered_quorum = false;
        bool skip_key3 = false;
    };

    void print_results(const std::vector<CheckResult> &results)
    {
        for (const auto &r : results)
        {
            std::cout << (r.ok ? "PASS " : "FAIL ") << r.name;
            if (!r.detail.empty())
            {
                std::cout << ": " << r.detail;
            }
            std::cout << '\n';
            if (!r.ok)
            {
                for (const auto &e : r.excerpt)
                {
                    std::cout << "    " << event_to_json(e).dump() << '\n';
                }
            }
        }
    }

    int cmd_run(const Options &o)
    {
        const Scenario s = load_scenario(o.file);
        const RunReport rep = run_scenario(s);
        std::cout << "outcome " << outcome_name(rep.trace.outcome) << " at t=" << rep.trace.end_time << '\n';
        print_results(rep.results);
        if (!o.out.empty())
        {
            write_artifacts(o.out, rep, s.checks);
        }
        return rep.ok() ? kExitPass : kExitViolation;
    }

    int cmd_fuzz(const Options &o)
    {
        if (o.runs == 0)
        {
            std::cerr << "error: --runs must be at least 1\n";
            return kExitUsage;
        }
        const FuzzTemplate t = load_fuzz_template(o.file);
        const FuzzSummary sum = fuzz(t, o.runs, o.seed);
        const ojson j = sum.to_json();
        std::cout << j.dump(2) << '\n';
        if (!o.out.empty())
        {
            write_text(std::filesystem::path(o.out) / "fuzz_summary.json", j.dump(2) + "\n");
            if (sum.counterexample)
            {
                const auto &c = *sum.counterexample;
                const Scenario replayable = scenario_of(c.report.trace, c.scenario.checks);
                write_text(std::filesystem::path(o.out) / "counterexample.json",
                           scenario_to_json(replayable).dump(2) + "\n");
                write_artifacts(o.out, c.report, c.scenario.checks, "counterexample_");
            }
        }
        if (sum.counterexample)
        {
            std::cerr << "run " << sum.counterexample->index << " (seed " << sum.counterexample->scenario.config.seed
                      << ") failed\n";
            print_results(sum.counterexample->report.results);
            return kExitViolation;
        }
        return kExitPass;
    }

    int cmd_explore(const Options &o)
    {
        ExploreConfig c;
        c.n = o.n;
        c.f = o.f;
        c.view_bound = o.views;
        c.byzantine = o.byz;
        c.depth_bound = o.depth;
        c.max_states = o.max_states;
        c.options.lowered_quorum = o.lowered_quorum;
        c.options.skip_key3_round = o.skip_key3;
        const ExploreResult r = explore(c);
        std::cout << verdict_name(r.verdict) << " states=" << r.states << " transitions=" << r.transitions
                  << " depth=" << r.max_depth << '\n';
        if (r.verdict == Verdict::Counterexample)
        {
            std::cout << "violation: " << r.violation << '\n';
            for (const auto &step : r.path)
            {
                std::cout << "  " << step << '\n';
            }
        }
        if (r.verdict == Verdict::Inconclusive)
        {
            std::cout << "bound: " << r.reason << '\n';
        }
        if (!o.out.empty())
        {
            ojson j;
            j["n"] = c.n;
            j["f"] = c.f;
            j["views"] = c.view_bound;
            j["byzantine"] = c.byzantine;
            j["lowered_quorum"] = c.options.lowered_quorum;
            j["skip_key3_round"] = c.options.skip_key3_round;
            j["verdict"] = std::string(verdict_name(r.verdict));
            j["states"] = r.states;
            j["transitions"] = r.transitions;
            j["max_depth"] = r.max_depth;
            j["violation"] = r.violation.empty() ? ojson(nullptr) : ojson(r.violation);
            j["path"] = r.path;
            j["reason"] = r.reason.empty() ? ojson(nullptr) : ojson(r.reason);
            write_text(std::filesystem::path(o.out) / "explore.json", j.dump(2) + "\n");
        }
        switch (r.verdict)
        {
        case Verdict::Verified:
            return kExitPass;
        case Verdict::Counterexample:
            return kExitViolation;
        case Verdict::Inconclusive:
            return kExitInconclusive;
        }
        return kExitInconclusive;
    }

    int cmd_meter(const Options &o)
    {
        const auto loaded = parse_trace(read_file(o.file));
        const Metrics m = meter(loaded.trace);
        const CheckResult words = check_word_bounds(loaded.trace, m);
        const std::string text = metrics_to_json(m).dump(2) + "\n";
        std::cout << text;
        print_results({words});
        if (!o.out.empty())
        {
            write_text(std::filesystem::path(o.out) / "metrics.json", text);
        }
        return words.ok ? kExitPass : kExitViolation;
    }

    int cmd_replay(const Options &o)
    {
        const ReplayResult r = replay_trace_text(read_file(o.file));
        if (r.identical)
        {
            std::cout << "identical\n";
        }
        else
        {
            std::cout << "differs at line " << r.first_diff_line << "\n  stored:   " << r.expected
                      << "\n  replayed: " << r.actual << '\n';
        }
        if (!o.out.empty())
        {
            ojson j;
            j["identical"] = r.identical;
            j["first_diff_line"] = r.first_diff_line;
            write_text(std::filesystem::path(o.out) / "replay.json", j.dump(2) + "\n");
        }
        return r.identical ? kExitPass : kExitViolation;
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"IT-HS agreement: simulation, fuzzing, exploration and metering"};
    app.require_subcommand(1);
    Options o;

    auto *run = app.add_subcommand("run", "Simulate one scenario and evaluate its checks");
    run->add_option("scenario", o.file, "Scenario JSON file")->required();

    auto *fz = app.add_subcommand("fuzz", "Run randomized scenarios drawn from a template");
    fz->add_option("template", o.file, "Fuzz template JSON file")->required();
    fz->add_option("--runs", o.runs, "Number of runs")->required();
    fz->add_option("--seed", o.seed, "Master seed");

    auto *ex = app.add_subcommand("explore", "Exhaustively explore schedules of a small committee");
    ex->add_option("--n", o.n, "Committee size (at most 5)");
    ex->add_option("--f", o.f, "Fault bound");
    ex->add_option("--views", o.views, "Number of views to explore");
    ex->add_option("--byz", o.byz, "Byzantine party id, 0 for none");
    ex->add_option("--depth", o.depth, "Depth bound");
    ex->add_option("--max-states", o.max_states, "State bound");
    ex->add_flag("--lowered-quorum", o.lowered_quorum, "Mutation: n-f thresholds become f+1");
    ex->add_flag("--skip-key3", o.skip_key3, "Mutation: lock straight from a key2 quorum");

    auto *me = app.add_subcommand("meter", "Recompute metrics from a stored trace");
    me->add_option("trace", o.file, "Trace JSONL file")->required();

    auto *rp = app.add_subcommand("replay", "Re-run a stored trace and compare byte for byte");
    rp->add_option("trace", o.file, "Trace JSONL file")->required();

    for (auto *sub : {run, fz, ex, me, rp})
    {
        sub->add_option("--out", o.out, "Directory for output artifacts");
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return kExitUsage;
    }

    try
    {
        if (!o.out.empty())
        {
            std::filesystem::create_directories(o.out);
        }
        if (run->parsed())
        {
            return cmd_run(o);
        }
        if (fz->parsed())
        {
            return cmd_fuzz(o);
        }
        if (ex->parsed())
        {
            return cmd_explore(o);
        }
        if (me->parsed())
        {
            return cmd_meter(o);
        }
        return cmd_replay(o);
    }
    catch (const ParseError &e)
    {
        std::cerr << "error: " << o.file << ": " << e.what() << '\n';
        return kExitUsage;
    }
    catch (const ConfigError &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }
}
