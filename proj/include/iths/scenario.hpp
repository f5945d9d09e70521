#pragma once

#include "iths/adversary.hpp"
#include "iths/sim.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace iths
{
    using ojson = nlohmann::ordered_json;

    /// Properties a scenario asserts. agreement, validity, unique_done and
    /// replay_consistent default on; everything else is off unless given.
    struct Checks
    {
        bool agreement = true;
        bool validity = true;
        bool unique_done = true;
        bool replay_consistent = true;
        std::optional<Time> terminate_by;
        bool latency_bound = false;
        bool optimistic_bound = false;
        bool abort_propagation = false;
        bool termination_propagation = false;
        bool word_bounds = false;
        std::optional<std::size_t> persistent_size_bound;
        std::optional<std::size_t> transient_per_n;

        friend bool operator==(const Checks &, const Checks &) = default;
    };

    struct Scenario
    {
        SimConfig config;
        AdversarySpec adversary;
        std::vector<Value> inputs;
        Checks checks;

        void validate() const
        {
            config.validate();
            adversary.validate(config.n, config.f);
            if (inputs.size() != config.n)
            {
                throw ConfigError("inputs must have n=" + std::to_string(config.n) + " entries");
            }
        }
    };

    /// Error in a scenario or trace file, with a 1-based line when known.
    class ParseError : public std::runtime_error
    {
    public:
        ParseError(std::string what, std::size_t line)
            : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line)
        {
        }
        [[nodiscard]] std::size_t line() const { return line_; }

    private:
        std::size_t line_;
    };

    namespace detail
    {
        inline std::size_t line_of_offset(const std::string &text, std::size_t offset)
        {
            offset = std::min(offset, text.size());
            return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
        }

        /// Line of the first occurrence of `"key"`, or 0.
        inline std::size_t line_of_key(const std::string &text, const std::string &key)
        {
            const auto pos = text.find("\"" + key + "\"");
            return pos == std::string::npos ? 0 : line_of_offset(text, pos);
        }

        /// Reads typed fields out of one JSON object and rejects unknown keys.
        class Reader
        {
        public:
            Reader(const ojson &obj, const std::string &text, std::string where)
                : obj_(obj), text_(text), where_(std::move(where))
            {
                if (!obj_.is_object())
                {
                    fail(where_ + " must be an object", where_);
                }
            }

            [[noreturn]] void fail(const std::string &msg, const std::string &key) const
            {
                throw ParseError(msg, line_of_key(text_, key));
            }

            bool has(const std::string &key)
            {
                seen_.insert(key);
                return obj_.contains(key) && !obj_.at(key).is_null();
            }

            const ojson &at(const std::string &key)
            {
                if (!has(key))
                {
                    fail("missing required key '" + key + "' in " + where_, where_);
                }
                return obj_.at(key);
            }

            std::int64_t integer(const std::string &key)
            {
                const auto &v = at(key);
                if (!v.is_number_integer())
                {
                    fail("'" + key + "' must be an integer", key);
                }
                return v.get<std::int64_t>();
            }

            std::int64_t integer(const std::string &key, std::int64_t dflt) { return has(key) ? integer(key) : dflt; }

            std::uint64_t unsigned_integer(const std::string &key, std::uint64_t dflt)
            {
                if (!has(key))
                {
                    return dflt;
                }
                const auto &v = obj_.at(key);
                if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
                {
                    fail("'" + key + "' must be a non-negative integer", key);
                }
                return v.get<std::uint64_t>();
            }

            bool boolean(const std::string &key, bool dflt)
            {
                if (!has(key))
                {
                    return dflt;
                }
                const auto &v = obj_.at(key);
                if (!v.is_boolean())
                {
                    fail("'" + key + "' must be true or false", key);
                }
                return v.get<bool>();
            }

            std::string string(const std::string &key, const std::string &dflt)
            {
                if (!has(key))
                {
                    return dflt;
                }
                const auto &v = obj_.at(key);
                if (!v.is_string())
                {
                    fail("'" + key + "' must be a string", key);
                }
                return v.get<std::string>();
            }

            const ojson &array(const std::string &key)
            {
                const auto &v = at(key);
                if (!v.is_array())
                {
                    fail("'" + key + "' must be an array", key);
                }
                return v;
            }

            void finish() const
            {
                for (const auto &[k, v] : obj_.items())
                {
                    if (!seen_.contains(k))
                    {
                        fail("unknown key '" + k + "' in " + where_, k);
                    }
                }
            }

            [[nodiscard]] const std::string &text() const { return text_; }

        private:
            const ojson &obj_;
            const std::string &text_;
            std::string where_;
            std::set<std::string> seen_;
        };

        inline std::vector<std::int64_t> int_list(Reader &r, const std::string &key)
        {
            std::vector<std::int64_t> out;
            for (const auto &x : r.array(key))
            {
                if (!x.is_number_integer())
                {
                    r.fail("'" + key + "' entries must be integers", key);
                }
                out.push_back(x.get<std::int64_t>());
            }
            return out;
        }

        inline PartyId party_id(Reader &r, std::int64_t v, const std::string &key)
        {
            if (v < 1 || v > 1'000'000)
            {
                r.fail("'" + key + "' holds an invalid party id " + std::to_string(v), key);
            }
            return static_cast<PartyId>(v);
        }
    } // namespace detail

    // ----------------------------------------------------------- to JSON

    inline ojson checks_to_json(const Checks &c)
    {
        ojson j;
        j["agreement"] = c.agreement;
        j["validity"] = c.validity;
        j["unique_done"] = c.unique_done;
        j["replay_consistent"] = c.replay_consistent;
        j["terminate_by"] = c.terminate_by ? ojson(*c.terminate_by) : ojson(nullptr);
        j["latency_bound"] = c.latency_bound;
        j["optimistic_bound"] = c.optimistic_bound;
        j["abort_propagation"] = c.abort_propagation;
        j["termination_propagation"] = c.termination_propagation;
        j["word_bounds"] = c.word_bounds;
        j["persistent_size_bound"] = c.persistent_size_bound ? ojson(*c.persistent_size_bound) : ojson(nullptr);
        j["transient_per_n"] = c.transient_per_n ? ojson(*c.transient_per_n) : ojson(nullptr);
        return j;
    }

    /// Fully explicit form: every default is written out.
    inline ojson scenario_to_json(const Scenario &s)
    {
        ojson j;
        const auto &c = s.config;
        j["n"] = c.n;
        j["f"] = c.f;
        j["delta"] = c.delta;
        j["small_delta"] = c.small_delta;
        j["gst"] = c.gst;
        j["max_time"] = c.max_time;
        j["seed"] = c.seed;
        j["first_view"] = c.options.first_view;
        j["lowered_quorum"] = c.options.lowered_quorum;
        j["skip_key3_round"] = c.options.skip_key3_round;
        ojson inputs = ojson::array();
        for (Value v : s.inputs)
        {
            inputs.push_back(v.token);
        }
        j["inputs"] = inputs;
        ojson corrupt = ojson::object();
        for (const auto &[p, strat] : s.adversary.corrupt)
        {
            corrupt[std::to_string(p)] = std::string(strategy_name(strat));
        }
        j["corrupt"] = corrupt;
        j["allow_excess_corruption"] = s.adversary.allow_excess_corruption;
        j["net_policy"] = std::string(policy_name(s.adversary.net.kind));
        j["victims"] = s.adversary.net.victims;
        ojson crashes = ojson::array();
        for (const auto &cr : s.adversary.crash_plan)
        {
            ojson e;
            e["party"] = cr.party;
            e["crash_at"] = cr.crash_at;
            e["reboot_at"] = cr.reboot_at;
            crashes.push_back(e);
        }
        j["crash_plan"] = crashes;
        j["clock_offsets"] = s.adversary.clock_offsets;
        j["checks"] = checks_to_json(s.checks);
        return j;
    }

    // --------------------------------------------------------- from JSON

    inline Checks checks_from_json(const ojson &j, const std::string &text)
    {
        detail::Reader r(j, text, "checks");
        Checks c;
        c.agreement = r.boolean("agreement", true);
        c.validity = r.boolean("validity", true);
        c.unique_done = r.boolean("unique_done", true);
        c.replay_consistent = r.boolean("replay_consistent", true);
        if (r.has("terminate_by"))
        {
            c.terminate_by = r.integer("terminate_by");
        }
        c.latency_bound = r.boolean("latency_bound", false);
        c.optimistic_bound = r.boolean("optimistic_bound", false);
        c.abort_propagation = r.boolean("abort_propagation", false);
        c.termination_propagation = r.boolean("termination_propagation", false);
        c.word_bounds = r.boolean("word_bounds", false);
        if (r.has("persistent_size_bound"))
        {
            c.persistent_size_bound = static_cast<std::size_t>(r.unsigned_integer("persistent_size_bound", 0));
        }
        if (r.has("transient_per_n"))
        {
            c.transient_per_n = static_cast<std::size_t>(r.unsigned_integer("transient_per_n", 0));
        }
        r.finish();
        return c;
    }

    /// Reads a scenario object. `extra` names keys owned by a caller (the fuzz
    /// block of a template) that must not be flagged as unknown.
    inline Scenario scenario_from_json(const ojson &j, const std::string &text,
                                       const std::vector<std::string> &extra = {})
    {
        detail::Reader r(j, text, "scenario");
        for (const auto &k : extra)
        {
            (void)r.has(k);
        }
        Scenario s;
        auto &c = s.config;
        const auto n = r.integer("n");
        const auto f = r.integer("f");
        if (n < 1 || n > 1000 || f < 0)
        {
            r.fail("n must be in 1..1000 and f >= 0", "n");
        }
        c.n = static_cast<std::uint32_t>(n);
        c.f = static_cast<std::uint32_t>(f);
        c.delta = r.integer("delta");
        c.small_delta = r.integer("small_delta", c.delta);
        c.gst = r.integer("gst", 0);
        c.max_time = r.integer("max_time", c.gst + 500 * c.delta);
        c.seed = r.unsigned_integer("seed", 0);
        c.options.first_view = r.integer("first_view", 1);
        if (c.options.first_view < 0)
        {
            r.fail("first_view must be >= 0", "first_view");
        }
        c.options.lowered_quorum = r.boolean("lowered_quorum", false);
        c.options.skip_key3_round = r.boolean("skip_key3_round", false);

        for (const auto &x : r.array("inputs"))
        {
            if (!x.is_number_unsigned() && !(x.is_number_integer() && x.get<std::int64_t>() >= 0))
            {
                r.fail("inputs must be non-negative integers", "inputs");
            }
            s.inputs.push_back(Value{x.get<std::uint64_t>()});
        }

        if (r.has("corrupt"))
        {
            const auto &cj = r.at("corrupt");
            if (!cj.is_object())
            {
                r.fail("'corrupt' must map party ids to strategy names", "corrupt");
            }
            for (const auto &[k, v] : cj.items())
            {
                std::int64_t id = 0;
                try
                {
                    id = std::stoll(k);
                }
                catch (const std::exception &)
                {
                    r.fail("corrupt key '" + k + "' is not a party id", "corrupt");
                }
                const auto strat = v.is_string() ? strategy_from_name(v.get<std::string>()) : std::nullopt;
                if (!strat)
                {
                    r.fail("unknown strategy for party " + k, "corrupt");
                }
                s.adversary.corrupt[detail::party_id(r, id, "corrupt")] = *strat;
            }
        }
        s.adversary.allow_excess_corruption = r.boolean("allow_excess_corruption", false);
        const auto policy = policy_from_name(r.string("net_policy", "eager"));
        if (!policy)
        {
            r.fail("unknown net_policy", "net_policy");
        }
        s.adversary.net.kind = *policy;
        if (r.has("victims"))
        {
            for (auto v : detail::int_list(r, "victims"))
            {
                s.adversary.net.victims.push_back(detail::party_id(r, v, "victims"));
            }
        }
        if (r.has("crash_plan"))
        {
            for (const auto &e : r.array("crash_plan"))
            {
                detail::Reader cr(e, text, "crash_plan entry");
                CrashEvent ev;
                ev.party = detail::party_id(cr, cr.integer("party"), "party");
                ev.crash_at = cr.integer("crash_at");
                ev.reboot_at = cr.integer("reboot_at");
                cr.finish();
                s.adversary.crash_plan.push_back(ev);
            }
        }
        if (r.has("clock_offsets"))
        {
            s.adversary.clock_offsets = detail::int_list(r, "clock_offsets");
        }
        if (r.has("checks"))
        {
            s.checks = checks_from_json(r.at("checks"), text);
        }
        r.finish();
        try
        {
            s.validate();
        }
        catch (const ConfigError &e)
        {
            throw ParseError(e.what(), 0);
        }
        return s;
    }

    inline ojson parse_json_text(const std::string &text)
    {
        try
        {
            return ojson::parse(text);
        }
        catch (const nlohmann::json::parse_error &e)
        {
            throw ParseError(std::string("malformed JSON: ") + e.what(),
                             detail::line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0));
        }
    }

    inline std::string read_file(const std::string &path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
        {
            throw ParseError("cannot open " + path, 0);
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    inline Scenario parse_scenario(const std::string &text) { return scenario_from_json(parse_json_text(text), text); }

    inline Scenario load_scenario(const std::string &path) { return parse_scenario(read_file(path)); }
} // namespace iths
