#pragma once

#include "iths/types.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iths
{
    enum class Kind : std::uint8_t
    {
        Request = 0,
        Suggest = 1,
        Proof = 2,
        Propose = 3,
        Echo = 4,
        Key1 = 5,
        Key2 = 6,
        Key3 = 7,
        Lock = 8,
        Done = 9,
        Abort = 10,
        RecoverQuery = 11,
        RecoverReply = 12,
    };

    inline constexpr std::size_t kKindCount = 13;
    inline constexpr std::size_t kMaxMessageWords = 7;

    inline constexpr std::array<std::string_view, kKindCount> kKindNames = {
        "request", "suggest", "proof", "propose", "echo",  "key1",          "key2",
        "key3",    "lock",    "done",  "abort",   "recover_query", "recover_reply",
    };

    constexpr std::string_view kind_name(Kind k) { return kKindNames[static_cast<std::size_t>(k)]; }

    inline std::optional<Kind> kind_from_name(std::string_view name)
    {
        for (std::size_t i = 0; i < kKindCount; ++i)
        {
            if (kKindNames[i] == name)
            {
                return static_cast<Kind>(i);
            }
        }
        return std::nullopt;
    }

    /// Echo, Key1, Key2, Key3, Lock: the per-view quorum cascade.
    constexpr bool is_vote(Kind k) { return k >= Kind::Echo && k <= Kind::Lock; }

    /// Kinds processed regardless of the receiver's current view.
    constexpr bool is_view_exempt(Kind k)
    {
        return k == Kind::Request || k == Kind::Done || k == Kind::Abort || k == Kind::RecoverQuery ||
               k == Kind::RecoverReply;
    }

    /// Encoded length, fixed per kind.
    constexpr std::size_t word_count(Kind k)
    {
        switch (k)
        {
        case Kind::Suggest:
            return 7;
        case Kind::Proof:
            return 5;
        case Kind::Propose:
            return 4;
        case Kind::Echo:
        case Kind::Key1:
        case Kind::Key2:
        case Kind::Key3:
        case Kind::Lock:
            return 3;
        case Kind::Request:
        case Kind::Done:
        case Kind::Abort:
        case Kind::RecoverQuery:
        case Kind::RecoverReply:
            return 2;
        }
        return 0;
    }

    /// A protocol message. Field use per kind:
    ///   Suggest  key=k3 val=v3 key2=k2 val2=v2 prev=pk2
    ///   Proof    key=k1 val=v1 prev=pk1
    ///   Propose  key val
    ///   votes    val
    ///   Done     val (no view)
    ///   Request, Abort, RecoverQuery, RecoverReply: view only
    struct Message
    {
        Kind kind = Kind::Request;
        View view = 0;
        View key = 0;
        Value val;
        View key2 = 0;
        Value val2;
        View prev = 0;

        friend bool operator==(const Message &, const Message &) = default;

        static Message request(View v) { return make(Kind::Request, v); }
        static Message abort(View v) { return make(Kind::Abort, v); }
        static Message done(Value x)
        {
            Message m = make(Kind::Done, 0);
            m.val = x;
            return m;
        }
        static Message recover_query(View v) { return make(Kind::RecoverQuery, v); }
        static Message recover_reply(View v) { return make(Kind::RecoverReply, v); }

        static Message suggest(View k3, Value v3, View k2, Value v2, View pk2, View v)
        {
            Message m = make(Kind::Suggest, v);
            m.key = k3;
            m.val = v3;
            m.key2 = k2;
            m.val2 = v2;
            m.prev = pk2;
            return m;
        }
        static Message proof(View k1, Value v1, View pk1, View v)
        {
            Message m = make(Kind::Proof, v);
            m.key = k1;
            m.val = v1;
            m.prev = pk1;
            return m;
        }
        static Message propose(View key, Value x, View v)
        {
            Message m = make(Kind::Propose, v);
            m.key = key;
            m.val = x;
            return m;
        }
        static Message vote(Kind k, Value x, View v)
        {
            Message m = make(k, v);
            m.val = x;
            return m;
        }

        [[nodiscard]] bool has_view() const { return kind != Kind::Done; }
        [[nodiscard]] bool has_value() const
        {
            return kind == Kind::Suggest || kind == Kind::Proof || kind == Kind::Propose || is_vote(kind) ||
                   kind == Kind::Done;
        }

    private:
        static Message make(Kind k, View v)
        {
            Message m;
            m.kind = k;
            m.view = v;
            return m;
        }
    };

    inline Word value_word(Value v) { return static_cast<Word>(v.token); }
    inline Value word_value(Word w) { return Value{static_cast<std::uint64_t>(w)}; }

    /// Canonical layout: word0 kind tag, word1 view (absent for Done), then payload.
    inline std::vector<Word> encode(const Message &m)
    {
        std::vector<Word> out;
        out.reserve(word_count(m.kind));
        out.push_back(static_cast<Word>(m.kind));
        if (m.has_view())
        {
            out.push_back(m.view);
        }
        switch (m.kind)
        {
        case Kind::Suggest:
            out.insert(out.end(), {m.key, value_word(m.val), m.key2, value_word(m.val2), m.prev});
            break;
        case Kind::Proof:
            out.insert(out.end(), {m.key, value_word(m.val), m.prev});
            break;
        case Kind::Propose:
            out.insert(out.end(), {m.key, value_word(m.val)});
            break;
        case Kind::Echo:
        case Kind::Key1:
        case Kind::Key2:
        case Kind::Key3:
        case Kind::Lock:
        case Kind::Done:
            out.push_back(value_word(m.val));
            break;
        default:
            break;
        }
        return out;
    }

    /// Inverse of encode. Rejects unknown tags and wrong lengths.
    inline std::optional<Message> decode(std::span<const Word> w)
    {
        if (w.empty() || w[0] < 0 || w[0] >= static_cast<Word>(kKindCount))
        {
            return std::nullopt;
        }
        const auto kind = static_cast<Kind>(w[0]);
        if (w.size() != word_count(kind))
        {
            return std::nullopt;
        }
        Message m;
        m.kind = kind;
        switch (kind)
        {
        case Kind::Done:
            m.val = word_value(w[1]);
            return m;
        case Kind::Suggest:
            m = Message::suggest(w[2], word_value(w[3]), w[4], word_value(w[5]), w[6], w[1]);
            return m;
        case Kind::Proof:
            m = Message::proof(w[2], word_value(w[3]), w[4], w[1]);
            return m;
        case Kind::Propose:
            m = Message::propose(w[2], word_value(w[3]), w[1]);
            return m;
        case Kind::Echo:
        case Kind::Key1:
        case Kind::Key2:
        case Kind::Key3:
        case Kind::Lock:
            m = Message::vote(kind, word_value(w[2]), w[1]);
            return m;
        default:
            m.view = w[1];
            return m;
        }
    }

    inline std::string to_string(const Message &m)
    {
        std::string s = "<";
        s += kind_name(m.kind);
        switch (m.kind)
        {
        case Kind::Suggest:
            s += "," + std::to_string(m.key) + "," + to_string(m.val) + "," + std::to_string(m.key2) + "," +
                 to_string(m.val2) + "," + std::to_string(m.prev);
            break;
        case Kind::Proof:
            s += "," + std::to_string(m.key) + "," + to_string(m.val) + "," + std::to_string(m.prev);
            break;
        case Kind::Propose:
            s += "," + std::to_string(m.key) + "," + to_string(m.val);
            break;
        case Kind::Done:
            return s + "," + to_string(m.val) + ">";
        default:
            if (is_vote(m.kind))
            {
                s += "," + to_string(m.val);
            }
            break;
        }
        return s + "," + std::to_string(m.view) + ">";
    }
} // namespace iths
