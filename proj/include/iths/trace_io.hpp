#pragma once

#include "iths/scenario.hpp"
#include "iths/sim.hpp"

#include <json.hpp>

#include <sstream>
#include <string>
#include <utility>

namespace iths
{
    /// Scenario a trace was produced from, with resolved clock offsets.
    inline Scenario scenario_of(const Trace &tr, const Checks &checks)
    {
        Scenario s{tr.config, tr.adversary, tr.inputs, checks};
        s.adversary.clock_offsets = tr.clock_offsets;
        return s;
    }

    inline ojson event_to_json(const TraceEvent &e)
    {
        ojson j;
        j["t"] = e.t;
        j["party"] = e.party;
        j["dir"] = std::string(dir_name(e.dir));
        if (e.msg)
        {
            const Message &m = *e.msg;
            j["kind"] = std::string(kind_name(m.kind));
            j["view"] = m.kind == Kind::Done ? ojson(nullptr) : ojson(m.view);
            j["value"] = m.kind == Kind::Request || m.kind == Kind::Abort || m.kind == Kind::RecoverQuery ||
                                 m.kind == Kind::RecoverReply
                             ? ojson(nullptr)
                             : ojson(m.val.token);
            j["sender"] = e.sender;
            j["to"] = e.to;
            j["words"] = encode(m);
        }
        else
        {
            j["kind"] = nullptr;
            j["view"] = e.view >= 0 ? ojson(e.view) : ojson(nullptr);
            j["value"] = e.value ? ojson(e.value->token) : ojson(nullptr);
            j["sender"] = nullptr;
            j["to"] = nullptr;
            j["words"] = nullptr;
        }
        return j;
    }

    /// JSON lines: a meta line holding the scenario, one line per event, and
    /// an end line holding the outcome.
    inline std::string trace_to_jsonl(const Trace &tr, const Checks &checks)
    {
        std::ostringstream out;
        ojson meta;
        meta["dir"] = "meta";
        meta["scenario"] = scenario_to_json(scenario_of(tr, checks));
        out << meta.dump() << '\n';
        for (const auto &e : tr.events)
        {
            out << event_to_json(e).dump() << '\n';
        }
        ojson end;
        end["dir"] = "end";
        end["t"] = tr.end_time;
        end["outcome"] = std::string(outcome_name(tr.outcome));
        end["rejected"] = tr.rejected_submissions;
        out << end.dump() << '\n';
        return out.str();
    }

    namespace detail
    {
        inline TraceEvent event_from_json(const ojson &j, std::size_t line)
        {
            auto fail = [line](const std::string &m) -> ParseError { return ParseError(m, line); };
            try
            {
                TraceEvent e;
                e.t = j.at("t").get<Time>();
                e.party = j.at("party").get<PartyId>();
                const auto dir = dir_from_name(j.at("dir").get<std::string>());
                if (!dir)
                {
                    throw fail("unknown dir");
                }
                e.dir = *dir;
                if (j.contains("words") && !j.at("words").is_null())
                {
                    const auto words = j.at("words").get<std::vector<Word>>();
                    const auto m = decode(words);
                    if (!m)
                    {
                        throw fail("words do not decode to a message");
                    }
                    e.msg = *m;
                    e.sender = j.at("sender").get<PartyId>();
                    e.to = j.at("to").get<PartyId>();
                }
                else
                {
                    if (!j.at("view").is_null())
                    {
                        e.view = j.at("view").get<View>();
                    }
                    if (!j.at("value").is_null())
                    {
                        e.value = Value{j.at("value").get<std::uint64_t>()};
                    }
                }
                return e;
            }
            catch (const nlohmann::json::exception &ex)
            {
                throw fail(std::string("bad trace event: ") + ex.what());
            }
        }
    } // namespace detail

    struct LoadedTrace
    {
        Scenario scenario;
        Trace trace;
    };

    inline LoadedTrace parse_trace(const std::string &text)
    {
        LoadedTrace out;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        bool have_meta = false;
        bool have_end = false;
        while (std::getline(in, line))
        {
            ++lineno;
            if (line.empty())
            {
                continue;
            }
            if (have_end)
            {
                throw ParseError("content after end line", lineno);
            }
            ojson j;
            try
            {
                j = ojson::parse(line);
            }
            catch (const nlohmann::json::parse_error &e)
            {
                throw ParseError(std::string("malformed JSON: ") + e.what(), lineno);
            }
            if (!j.is_object() || !j.contains("dir") || !j.at("dir").is_string())
            {
                throw ParseError("each line must be an object with a dir", lineno);
            }
            const auto dir = j.at("dir").get<std::string>();
            if (!have_meta)
            {
                if (dir != "meta" || !j.contains("scenario"))
                {
                    throw ParseError("first line must be the meta line", lineno);
                }
                try
                {
                    out.scenario = scenario_from_json(j.at("scenario"), line);
                }
                catch (const ParseError &e)
                {
                    throw ParseError(e.what(), lineno);
                }
                auto &tr = out.trace;
                tr.config = out.scenario.config;
                tr.adversary = out.scenario.adversary;
                tr.inputs = out.scenario.inputs;
                tr.clock_offsets = out.scenario.adversary.clock_offsets;
                have_meta = true;
            }
            else if (dir == "end")
            {
                try
                {
                    out.trace.end_time = j.at("t").get<Time>();
                    const auto o = j.at("outcome").get<std::string>();
                    if (o == "all_decided")
                    {
                        out.trace.outcome = Outcome::AllDecided;
                    }
                    else if (o == "quiescent")
                    {
                        out.trace.outcome = Outcome::Quiescent;
                    }
                    else if (o == "horizon")
                    {
                        out.trace.outcome = Outcome::Horizon;
                    }
                    else
                    {
                        throw ParseError("unknown outcome " + o, lineno);
                    }
                    out.trace.rejected_submissions = j.at("rejected").get<std::size_t>();
                }
                catch (const nlohmann::json::exception &ex)
                {
                    throw ParseError(std::string("bad end line: ") + ex.what(), lineno);
                }
                have_end = true;
            }
            else
            {
                out.trace.events.push_back(detail::event_from_json(j, lineno));
            }
        }
        if (!have_meta)
        {
            throw ParseError("empty trace", 0);
        }
        if (!have_end)
        {
            throw ParseError("trace has no end line (truncated?)", lineno);
        }
        return out;
    }
} // namespace iths
