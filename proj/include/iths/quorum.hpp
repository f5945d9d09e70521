#pragma once

#include "iths/message.hpp"
#include "iths/types.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <optional>
#include <utility>
#include <vector>

namespace iths
{
    enum class Level : std::uint8_t
    {
        Small, // f+1
        Large, // n-f
    };

    struct Fired
    {
        Kind kind;
        Value value;
        Level level;

        friend bool operator==(const Fired &, const Fired &) = default;
    };

    struct Thresholds
    {
        std::uint32_t small = 1;
        std::uint32_t large = 1;

        static Thresholds of(const Committee &c) { return {c.small_quorum(), c.large_quorum()}; }

        friend bool operator==(const Thresholds &, const Thresholds &) = default;
    };

    /// Distinct-sender, same-value counting for one message kind. Each sender's
    /// first vote is the only one that counts; each level fires at most once.
    class Tally
    {
    public:
        Tally() = default;
        explicit Tally(std::uint32_t n) : first_(n) {}

        /// Returns the levels crossed by this vote, in order small then large.
        std::vector<std::pair<Level, Value>> record(PartyId sender, Value v, Thresholds t, bool track_small)
        {
            std::vector<std::pair<Level, Value>> out;
            if (sender == 0 || sender > first_.size() || first_[sender - 1].has_value())
            {
                return out;
            }
            if (fired_large_)
            {
                // Nothing can fire any more; only remember the sender for dedup.
                first_[sender - 1] = v;
                return out;
            }
            first_[sender - 1] = v;
            auto it = std::find_if(counts_.begin(), counts_.end(), [&](const auto &c) { return c.first == v; });
            if (it == counts_.end())
            {
                counts_.emplace_back(v, 0);
                it = std::prev(counts_.end());
            }
            const std::uint32_t c = ++it->second;
            if (track_small && !fired_small_ && c >= t.small)
            {
                fired_small_ = v;
                out.emplace_back(Level::Small, v);
            }
            if (c >= t.large)
            {
                fired_large_ = v;
                out.emplace_back(Level::Large, v);
            }
            return out;
        }

        [[nodiscard]] std::optional<Value> fired(Level l) const { return l == Level::Small ? fired_small_ : fired_large_; }

        [[nodiscard]] bool has_voted(PartyId sender) const
        {
            return sender >= 1 && sender <= first_.size() && first_[sender - 1].has_value();
        }

        [[nodiscard]] std::optional<Value> vote_of(PartyId sender) const
        {
            if (sender == 0 || sender > first_.size())
            {
                return std::nullopt;
            }
            return first_[sender - 1];
        }

        [[nodiscard]] std::uint32_t count(Value v) const
        {
            for (const auto &[val, c] : counts_)
            {
                if (val == v)
                {
                    return c;
                }
            }
            return 0;
        }

        /// One flag+value per sender, one pair per distinct value, plus the fired slots.
        [[nodiscard]] std::size_t words() const { return 2 * first_.size() + 2 * counts_.size() + 4; }

        [[nodiscard]] const std::vector<std::optional<Value>> &senders() const { return first_; }
        [[nodiscard]] const std::vector<std::pair<Value, std::uint32_t>> &counts() const { return counts_; }

        friend bool operator==(const Tally &, const Tally &) = default;

    private:
        std::vector<std::optional<Value>> first_;
        std::vector<std::pair<Value, std::uint32_t>> counts_;
        std::optional<Value> fired_small_;
        std::optional<Value> fired_large_;
    };

    /// Per-party quorum bookkeeping: one tally per vote kind (reset every view)
    /// and a done tally that lives across views.
    class QuorumTracker
    {
    public:
        static constexpr std::size_t kVoteKinds = 5;

        QuorumTracker() = default;
        QuorumTracker(std::uint32_t n, Thresholds t) : n_(n), thresholds_(t), done_(n)
        {
            reset_for_view();
        }

        /// Records one delivery. Votes only fire at the large level; Done fires at both.
        std::vector<Fired> record_vote(Kind kind, PartyId sender, Value v)
        {
            std::vector<Fired> out;
            Tally *tally = nullptr;
            bool small = false;
            if (is_vote(kind))
            {
                tally = &votes_[index(kind)];
            }
            else if (kind == Kind::Done)
            {
                tally = &done_;
                small = true;
            }
            else
            {
                return out;
            }
            for (auto [level, value] : tally->record(sender, v, thresholds_, small))
            {
                out.push_back(Fired{kind, value, level});
            }
            return out;
        }

        /// Clears the per-view vote tallies. Done counts survive.
        void reset_for_view()
        {
            for (auto &t : votes_)
            {
                t = Tally(n_);
            }
        }

        /// Drops done counts too; used only when transient memory is lost on reboot.
        void reset_all()
        {
            reset_for_view();
            done_ = Tally(n_);
        }

        [[nodiscard]] const Tally &tally(Kind kind) const
        {
            assert(is_vote(kind) || kind == Kind::Done);
            return kind == Kind::Done ? done_ : votes_[index(kind)];
        }

        [[nodiscard]] std::optional<Value> fired(Kind kind, Level l = Level::Large) const { return tally(kind).fired(l); }

        [[nodiscard]] Thresholds thresholds() const { return thresholds_; }

        [[nodiscard]] std::size_t words() const
        {
            std::size_t w = done_.words();
            for (const auto &t : votes_)
            {
                w += t.words();
            }
            return w;
        }

        friend bool operator==(const QuorumTracker &, const QuorumTracker &) = default;

    private:
        static std::size_t index(Kind k) { return static_cast<std::size_t>(k) - static_cast<std::size_t>(Kind::Echo); }

        std::uint32_t n_ = 0;
        Thresholds thresholds_;
        std::array<Tally, kVoteKinds> votes_;
        Tally done_;
    };
} // namespace iths
