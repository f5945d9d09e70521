#pragma once

#include "iths/adversary.hpp"
#include "iths/message.hpp"
#include "iths/party.hpp"
#include "iths/persistence.hpp"

#include <cstdint>
#include <optional>
#include <queue>
#include <string_view>
#include <vector>

namespace iths
{
    /// View timers fire this many Δ after the view starts on the local clock.
    inline constexpr Time kTimeoutDeltas = 11;

    struct SimConfig
    {
        std::uint32_t n = 4;
        std::uint32_t f = 1;
        Time delta = 100;       // Δ, post-GST delivery bound
        Time small_delta = 100; // δ, minimum delivery delay
        Time gst = 0;
        Time max_time = 100000;
        std::uint64_t seed = 0;
        ProtocolOptions options;

        [[nodiscard]] Time timeout() const { return kTimeoutDeltas * delta; }

        void validate() const
        {
            (void)Committee(n, f);
            if (small_delta <= 0 || small_delta > delta)
            {
                throw ConfigError("need 0 < small_delta <= delta");
            }
            if (gst < 0)
            {
                throw ConfigError("gst must be >= 0");
            }
            if (max_time < 0)
            {
                throw ConfigError("max_time must be >= 0");
            }
        }

        friend bool operator==(const SimConfig &, const SimConfig &) = default;
    };

    // ------------------------------------------------------------------ trace

    enum class Dir : std::uint8_t
    {
        Send,
        Recv,
        Timer,
        Decide,
        Crash,
        Reboot,
        View,
        Drop,
    };

    inline constexpr std::array<std::string_view, 8> kDirNames = {"send",  "recv",   "timer", "decide",
                                                                  "crash", "reboot", "view",  "drop"};

    inline std::string_view dir_name(Dir d) { return kDirNames[static_cast<std::size_t>(d)]; }

    inline std::optional<Dir> dir_from_name(std::string_view s)
    {
        for (std::size_t i = 0; i < kDirNames.size(); ++i)
        {
            if (kDirNames[i] == s)
            {
                return static_cast<Dir>(i);
            }
        }
        return std::nullopt;
    }

    /// One line of the trace. `party` is where the event happens; `sender` and
    /// `to` are filled for message events; `view` for timer and view events.
    struct TraceEvent
    {
        Time t = 0;
        PartyId party = 0;
        Dir dir = Dir::Send;
        std::optional<Message> msg;
        PartyId sender = 0;
        PartyId to = 0;
        View view = kNoPrev;
        std::optional<Value> value;

        friend bool operator==(const TraceEvent &, const TraceEvent &) = default;
    };

    enum class Outcome : std::uint8_t
    {
        AllDecided,
        Quiescent,
        Horizon,
    };

    inline std::string_view outcome_name(Outcome o)
    {
        switch (o)
        {
        case Outcome::AllDecided:
            return "all_decided";
        case Outcome::Quiescent:
            return "quiescent";
        case Outcome::Horizon:
            return "horizon";
        }
        return "?";
    }

    struct Trace
    {
        SimConfig config;
        AdversarySpec adversary;
        std::vector<Value> inputs;
        std::vector<Time> clock_offsets;
        std::vector<TraceEvent> events;
        Outcome outcome = Outcome::Quiescent;
        Time end_time = 0;
        std::size_t rejected_submissions = 0;

        [[nodiscard]] bool honest(PartyId p) const { return !adversary.is_corrupt(p); }
    };

    // -------------------------------------------------------------- simulator

    class Simulator
    {
    public:
        Simulator(SimConfig cfg, AdversarySpec adv, std::vector<Value> inputs)
            : cfg_(cfg), adv_(std::move(adv)), inputs_(std::move(inputs)), net_rng_(mix_seed(cfg.seed, 1))
        {
            cfg_.validate();
            adv_.validate(cfg_.n, cfg_.f);
            if (inputs_.size() != cfg_.n)
            {
                throw ConfigError("inputs must have n entries");
            }
            const std::uint32_t n = cfg_.n;
            offsets_ = adv_.clock_offsets;
            if (offsets_.empty())
            {
                Rng clock_rng(mix_seed(cfg_.seed, 2));
                for (std::uint32_t i = 0; i < n; ++i)
                {
                    offsets_.push_back(clock_rng.between(-cfg_.delta, cfg_.delta));
                }
            }
            for (auto o : offsets_)
            {
                if (o < -cfg_.delta || o > cfg_.delta)
                {
                    throw ConfigError("clock offsets must lie in [-delta, delta]");
                }
            }
            states_.resize(n);
            images_.resize(n);
            byz_.resize(n);
            down_.assign(n, false);
            incarnation_.assign(n, 0);
            decided_.assign(n, false);
        }

        /// Local clock of party p at global time t: offset before GST, exact after.
        [[nodiscard]] Time clock_now(PartyId p, Time t) const { return t < cfg_.gst ? t + offsets_[p - 1] : t; }

        /// Global time at which a timer armed at `now` for `duration` local
        /// units goes off. The local clock jumps to global time at GST.
        [[nodiscard]] Time timer_fire_time(PartyId p, Time now, Time duration) const
        {
            const Time target = clock_now(p, now) + duration;
            if (now >= cfg_.gst)
            {
                return target;
            }
            const Time before = target - offsets_[p - 1];
            if (before < cfg_.gst)
            {
                return before;
            }
            return std::max(target, cfg_.gst);
        }

        /// Adversary-originated submission. The channel refuses senders the
        /// adversary does not control and anything that is not a well-formed
        /// message of at most kMaxMessageWords words.
        bool inject(PartyId claimed_sender, PartyId to, std::vector<Word> words, Time at = 0)
        {
            if (!adv_.is_corrupt(claimed_sender) || to == 0 || to > cfg_.n || words.size() > kMaxMessageWords ||
                !decode(words))
            {
                ++rejected_;
                return false;
            }
            submit(claimed_sender, to, std::move(words), at, true);
            return true;
        }

        Trace run()
        {
            start();
            Outcome outcome = Outcome::Quiescent;
            Time end = 0;
            while (!queue_.empty())
            {
                const Item item = queue_.top();
                if (item.t > cfg_.max_time)
                {
                    outcome = Outcome::Horizon;
                    end = cfg_.max_time;
                    break;
                }
                queue_.pop();
                now_ = item.t;
                end = now_;
                process(item);
                if (all_honest_decided())
                {
                    outcome = Outcome::AllDecided;
                    break;
                }
            }
            Trace tr;
            tr.config = cfg_;
            tr.adversary = adv_;
            tr.inputs = inputs_;
            tr.clock_offsets = offsets_;
            tr.events = std::move(events_);
            tr.outcome = outcome;
            tr.end_time = end;
            tr.rejected_submissions = rejected_;
            return tr;
        }

        [[nodiscard]] std::size_t rejected() const { return rejected_; }

    private:
        enum class ItemKind : std::uint8_t
        {
            Deliver,
            Timer,
            Crash,
            Reboot,
        };

        struct Item
        {
            Time t = 0;
            std::uint8_t tier = 1; // 0: rushed adversary traffic
            std::uint64_t seq = 0;
            ItemKind kind = ItemKind::Deliver;
            PartyId party = 0;
            std::size_t index = 0;
            View view = 0;
            std::uint64_t incarnation = 0;
        };

        struct Later
        {
            bool operator()(const Item &a, const Item &b) const
            {
                if (a.t != b.t)
                {
                    return a.t > b.t;
                }
                if (a.tier != b.tier)
                {
                    return a.tier > b.tier;
                }
                return a.seq > b.seq;
            }
        };

        struct InFlight
        {
            PartyId sender = 0;
            PartyId recipient = 0;
            std::vector<Word> words;
            Time send_time = 0;
            Time deadline = 0;
            Time scheduled = 0;
            bool delivered = false;
        };

        void push(Item it)
        {
            it.seq = seq_++;
            queue_.push(it);
        }

        void record(TraceEvent e) { events_.push_back(std::move(e)); }

        [[nodiscard]] bool corrupt(PartyId p) const { return adv_.is_corrupt(p); }

        [[nodiscard]] bool all_honest_decided() const
        {
            for (PartyId p = 1; p <= cfg_.n; ++p)
            {
                if (!corrupt(p) && !decided_[p - 1])
                {
                    return false;
                }
            }
            return true;
        }

        /// Picks the two values a corrupt party plays against each other.
        void seed_byzantine(ByzantineState &b) const
        {
            std::vector<Value> honest_inputs;
            for (PartyId p = 1; p <= cfg_.n; ++p)
            {
                if (!corrupt(p))
                {
                    honest_inputs.push_back(inputs_[p - 1]);
                }
            }
            b.left = honest_inputs.empty() ? fabricated_value(b.id) : honest_inputs.front();
            b.right = Value{fabricated_value(b.id).token + 0x100};
            for (Value v : honest_inputs)
            {
                if (v != b.left)
                {
                    b.right = v;
                    break;
                }
            }
        }

        void start()
        {
            for (const auto &c : adv_.crash_plan)
            {
                push(Item{.t = c.crash_at, .kind = ItemKind::Crash, .party = c.party});
                push(Item{.t = c.reboot_at, .kind = ItemKind::Reboot, .party = c.party});
            }
            now_ = 0;
            for (PartyId p = 1; p <= cfg_.n; ++p)
            {
                if (corrupt(p))
                {
                    auto &b = byz_[p - 1];
                    b.id = p;
                    b.strategy = adv_.corrupt.at(p);
                    b.n = cfg_.n;
                    b.f = cfg_.f;
                    seed_byzantine(b);
                    for (const auto &s : byzantine_step(b, ByzStart{cfg_.options.first_view}))
                    {
                        submit_corrupt(p, s);
                    }
                    continue;
                }
                auto step = init_party(p, cfg_.n, cfg_.f, inputs_[p - 1], cfg_.options);
                apply(p, cfg_.options.first_view - 1, std::move(step));
            }
        }

        void process(const Item &item)
        {
            switch (item.kind)
            {
            case ItemKind::Deliver:
                deliver(item.index);
                break;
            case ItemKind::Timer:
                fire_timer(item);
                break;
            case ItemKind::Crash:
                crash(item.party);
                break;
            case ItemKind::Reboot:
                restart(item.party);
                break;
            }
        }

        void deliver(std::size_t index)
        {
            auto &fl = inflight_[index];
            if (fl.delivered)
            {
                return;
            }
            fl.delivered = true;
            const PartyId r = fl.recipient;
            const auto msg = *decode(fl.words);
            if (down_[r - 1])
            {
                record(TraceEvent{.t = now_, .party = r, .dir = Dir::Drop, .msg = msg, .sender = fl.sender, .to = r});
                return;
            }
            record(TraceEvent{.t = now_, .party = r, .dir = Dir::Recv, .msg = msg, .sender = fl.sender, .to = r});
            if (corrupt(r))
            {
                for (const auto &s : byzantine_step(byz_[r - 1], ByzDelivered{fl.sender, msg}))
                {
                    submit_corrupt(r, s);
                }
                return;
            }
            const View before = states_[r - 1]->view;
            apply(r, before, handle_event(*states_[r - 1], Delivered{fl.sender, msg}));
        }

        void fire_timer(const Item &item)
        {
            const PartyId p = item.party;
            if (down_[p - 1] || incarnation_[p - 1] != item.incarnation)
            {
                return;
            }
            record(TraceEvent{.t = now_, .party = p, .dir = Dir::Timer, .view = item.view});
            const View before = states_[p - 1]->view;
            apply(p, before, handle_event(*states_[p - 1], ViewTimerFired{item.view}));
        }

        void crash(PartyId p)
        {
            if (down_[p - 1])
            {
                return;
            }
            down_[p - 1] = true;
            ++incarnation_[p - 1];
            record(TraceEvent{.t = now_, .party = p, .dir = Dir::Crash});
        }

        void restart(PartyId p)
        {
            if (!down_[p - 1])
            {
                return;
            }
            down_[p - 1] = false;
            record(TraceEvent{.t = now_, .party = p, .dir = Dir::Reboot});
            const View before = cfg_.options.first_view - 1;
            apply(p, before, reboot(*images_[p - 1], cfg_.n, cfg_.f, cfg_.options));
        }

        /// Carries out one batch of actions. Persistence happens first: the core
        /// puts every hint ahead of the sends it guards.
        void apply(PartyId p, View view_before, Step step)
        {
            states_[p - 1] = std::move(step.state);
            const PartyState &s = *states_[p - 1];
            if (s.view != view_before)
            {
                record(TraceEvent{.t = now_, .party = p, .dir = Dir::View, .view = s.view});
            }
            bool persisted = false;
            for (const auto &a : step.actions)
            {
                if (std::holds_alternative<PersistHint>(a))
                {
                    if (!persisted)
                    {
                        images_[p - 1] = snapshot(s);
                        persisted = true;
                    }
                }
                else if (const auto *snd = std::get_if<Send>(&a))
                {
                    submit(p, snd->to, encode(snd->msg), now_, false);
                }
                else if (const auto *d = std::get_if<Decide>(&a))
                {
                    decided_[p - 1] = true;
                    record(TraceEvent{.t = now_, .party = p, .dir = Dir::Decide, .view = s.view, .value = d->value});
                }
                else if (const auto *tm = std::get_if<SetViewTimer>(&a))
                {
                    push(Item{.t = timer_fire_time(p, now_, cfg_.timeout()),
                              .kind = ItemKind::Timer,
                              .party = p,
                              .view = tm->view,
                              .incarnation = incarnation_[p - 1]});
                }
            }
            if (!images_[p - 1])
            {
                images_[p - 1] = snapshot(s);
            }
        }

        void submit_corrupt(PartyId from, const Send &s)
        {
            std::vector<Word> words = encode(s.msg);
            if (s.to == 0 || s.to > cfg_.n)
            {
                ++rejected_;
                return;
            }
            submit(from, s.to, std::move(words), now_, true);
        }

        void submit(PartyId from, PartyId to, std::vector<Word> words, Time at, bool adversarial)
        {
            InFlight fl;
            fl.sender = from;
            fl.recipient = to;
            fl.send_time = at;
            fl.deadline = std::max(at, cfg_.gst) + cfg_.delta;
            if (from == to)
            {
                fl.scheduled = at;
            }
            else
            {
                const DeliveryWindow w{from, to, adversarial ? at : at + cfg_.small_delta, fl.deadline};
                fl.scheduled = choose_delivery(adv_.net, w, net_rng_);
            }
            record(TraceEvent{
                .t = at, .party = from, .dir = Dir::Send, .msg = *decode(words), .sender = from, .to = to});
            fl.words = std::move(words);
            inflight_.push_back(std::move(fl));
            push(Item{.t = inflight_.back().scheduled,
                      .tier = static_cast<std::uint8_t>(adversarial ? 0 : 1),
                      .kind = ItemKind::Deliver,
                      .index = inflight_.size() - 1});
        }

        SimConfig cfg_;
        AdversarySpec adv_;
        std::vector<Value> inputs_;
        std::vector<Time> offsets_;
        Rng net_rng_;

        std::vector<std::optional<PartyState>> states_;
        std::vector<std::optional<PersistentImage>> images_;
        std::vector<ByzantineState> byz_;
        std::vector<bool> down_;
        std::vector<std::uint64_t> incarnation_;
        std::vector<bool> decided_;

        std::priority_queue<Item, std::vector<Item>, Later> queue_;
        std::vector<InFlight> inflight_;
        std::vector<TraceEvent> events_;
        std::uint64_t seq_ = 0;
        Time now_ = 0;
        std::size_t rejected_ = 0;
    };

    /// Runs one simulation to quiescence, all-decided, or the horizon.
    inline Trace run(const SimConfig &cfg, const AdversarySpec &adv, const std::vector<Value> &inputs)
    {
        Simulator sim(cfg, adv, inputs);
        return sim.run();
    }
} // namespace iths
