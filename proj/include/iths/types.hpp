#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace iths
{
    /// One transmission/storage unit. Views are signed because -1 is a sentinel.
    using Word = std::int64_t;

    /// View numbers. 0 means "no key/lock yet", -1 means "no previous key".
    using View = std::int64_t;

    inline constexpr View kNoKey = 0;
    inline constexpr View kNoPrev = -1;

    /// Parties are numbered 1..n.
    using PartyId = std::uint32_t;

    /// Opaque one-word token. Equality only; the ordering exists so values can
    /// live in sorted containers, the protocol never compares them by order.
    struct Value
    {
        std::uint64_t token = 0;

        friend constexpr bool operator==(Value, Value) = default;
        friend constexpr auto operator<=>(Value, Value) = default;
    };

    inline std::string to_string(Value v) { return std::to_string(v.token); }

    /// A (key, value) pair without history: used for lock and key3.
    struct KeySlot
    {
        View key = kNoKey;
        Value val;

        friend bool operator==(const KeySlot &, const KeySlot &) = default;
    };

    /// A (key, value, prev) triple: key1 and key2 carry the last view in which
    /// the key was set to a different value.
    struct KeyHistory
    {
        View key = kNoKey;
        Value val;
        View prev = kNoPrev;

        friend bool operator==(const KeyHistory &, const KeyHistory &) = default;
    };

    /// Element of the `proofs` / `key2_proofs` collections.
    struct KeyProof
    {
        View key = kNoKey;
        Value val;
        View prev = kNoPrev;

        friend bool operator==(const KeyProof &, const KeyProof &) = default;
    };

    class ConfigError : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    /// Validated (n, f) pair. Construction enforces n > 3f.
    class Committee
    {
    public:
        Committee(std::uint32_t n, std::uint32_t f) : n_(n), f_(f)
        {
            if (n == 0)
            {
                throw ConfigError("committee must have at least one party");
            }
            if (n <= 3 * f)
            {
                throw ConfigError("n=" + std::to_string(n) + " f=" + std::to_string(f) + " violates n > 3f");
            }
        }

        [[nodiscard]] std::uint32_t n() const noexcept { return n_; }
        [[nodiscard]] std::uint32_t f() const noexcept { return f_; }

        /// f+1: guarantees one nonfaulty member.
        [[nodiscard]] std::uint32_t small_quorum() const noexcept { return f_ + 1; }
        /// n-f: any two such sets share f+1 parties.
        [[nodiscard]] std::uint32_t large_quorum() const noexcept { return n_ - f_; }

        [[nodiscard]] PartyId primary_of(View v) const noexcept
        {
            return static_cast<PartyId>(static_cast<std::uint64_t>(v) % n_) + 1;
        }

        friend bool operator==(const Committee &, const Committee &) = default;

    private:
        std::uint32_t n_;
        std::uint32_t f_;
    };
} // namespace iths

template <>
struct std::hash<iths::Value>
{
    std::size_t operator()(iths::Value v) const noexcept { return std::hash<std::uint64_t>{}(v.token); }
};
