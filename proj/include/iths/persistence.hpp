#pragma once

#include "iths/message.hpp"
#include "iths/party.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace iths
{
    /// A message authored in the current view, as kept on stable storage.
    struct StoredMessage
    {
        Message msg;
        PartyId only_to = 0;
        friend bool operator==(const StoredMessage &, const StoredMessage &) = default;
    };

    /// The part of a party that survives a crash. Its encoded size does not
    /// depend on n or on how far the views have advanced.
    struct PersistentImage
    {
        PartyId id = 0;
        View view = 0;
        KeySlot lock;
        KeySlot key3;
        KeyHistory key2;
        KeyHistory key1;
        std::optional<Value> done_sent;
        View last_request = kNoPrev;
        View last_abort = kNoPrev;
        std::optional<Value> decided;
        std::vector<StoredMessage> authored; // at most one per kind

        friend bool operator==(const PersistentImage &, const PersistentImage &) = default;
    };

    /// Kinds a party can author inside a view, in slot order.
    inline constexpr std::array<Kind, 8> kAuthoredKinds = {Kind::Suggest, Kind::Proof, Kind::Propose, Kind::Echo,
                                                           Kind::Key1,    Kind::Key2,  Kind::Key3,    Kind::Lock};

    inline PersistentImage snapshot(const PartyState &s)
    {
        PersistentImage img;
        img.id = s.id;
        img.view = s.view;
        img.lock = s.lock;
        img.key3 = s.key3;
        img.key2 = s.key2;
        img.key1 = s.key1;
        img.done_sent = s.done_sent;
        img.last_request = s.last_request;
        img.last_abort = s.last_abort;
        img.decided = s.decided;
        for (const auto &a : s.round.authored)
        {
            img.authored.push_back(StoredMessage{a.msg, a.only_to});
        }
        return img;
    }

    namespace image_tag
    {
        inline constexpr Word kId = 1;
        inline constexpr Word kView = 2;
        inline constexpr Word kLock = 3;
        inline constexpr Word kKey3 = 4;
        inline constexpr Word kKey2 = 5;
        inline constexpr Word kKey1 = 6;
        inline constexpr Word kDone = 7;
        inline constexpr Word kRequest = 8;
        inline constexpr Word kAbort = 9;
        inline constexpr Word kDecided = 10;
        inline constexpr Word kSlotBase = 16; // + kind tag
    } // namespace image_tag

    inline constexpr std::size_t kSlotWords = 3 + kMaxMessageWords;

    /// Fixed layout of tagged fields followed by one padded slot per authorable
    /// kind, so every image has the same length.
    inline std::vector<Word> serialize(const PersistentImage &img)
    {
        using namespace image_tag;
        std::vector<Word> w;
        w.insert(w.end(), {kId, static_cast<Word>(img.id)});
        w.insert(w.end(), {kView, img.view});
        w.insert(w.end(), {kLock, img.lock.key, value_word(img.lock.val)});
        w.insert(w.end(), {kKey3, img.key3.key, value_word(img.key3.val)});
        w.insert(w.end(), {kKey2, img.key2.key, value_word(img.key2.val), img.key2.prev});
        w.insert(w.end(), {kKey1, img.key1.key, value_word(img.key1.val), img.key1.prev});
        w.insert(w.end(), {kDone, img.done_sent ? 1 : 0, img.done_sent ? value_word(*img.done_sent) : 0});
        w.insert(w.end(), {kRequest, img.last_request});
        w.insert(w.end(), {kAbort, img.last_abort});
        w.insert(w.end(), {kDecided, img.decided ? 1 : 0, img.decided ? value_word(*img.decided) : 0});
        for (Kind k : kAuthoredKinds)
        {
            const StoredMessage *found = nullptr;
            for (const auto &sm : img.authored)
            {
                if (sm.msg.kind == k)
                {
                    found = &sm;
                }
            }
            w.push_back(kSlotBase + static_cast<Word>(k));
            w.push_back(found ? 1 : 0);
            w.push_back(found ? static_cast<Word>(found->only_to) : 0);
            std::vector<Word> enc = found ? encode(found->msg) : std::vector<Word>{};
            enc.resize(kMaxMessageWords, 0);
            w.insert(w.end(), enc.begin(), enc.end());
        }
        return w;
    }

    inline std::size_t image_words(const PersistentImage &img) { return serialize(img).size(); }

    inline std::optional<PersistentImage> deserialize(std::span<const Word> w)
    {
        using namespace image_tag;
        PersistentImage img;
        std::size_t i = 0;
        auto take = [&](Word tag, std::size_t count) -> std::optional<std::span<const Word>> {
            if (i + 1 + count > w.size() || w[i] != tag)
            {
                return std::nullopt;
            }
            auto s = w.subspan(i + 1, count);
            i += 1 + count;
            return s;
        };
        auto id = take(kId, 1);
        auto view = take(kView, 1);
        auto lock = take(kLock, 2);
        auto key3 = take(kKey3, 2);
        auto key2 = take(kKey2, 3);
        auto key1 = take(kKey1, 3);
        auto done = take(kDone, 2);
        auto req = take(kRequest, 1);
        auto abt = take(kAbort, 1);
        auto dec = take(kDecided, 2);
        if (!id || !view || !lock || !key3 || !key2 || !key1 || !done || !req || !abt || !dec)
        {
            return std::nullopt;
        }
        img.id = static_cast<PartyId>((*id)[0]);
        img.view = (*view)[0];
        img.lock = KeySlot{(*lock)[0], word_value((*lock)[1])};
        img.key3 = KeySlot{(*key3)[0], word_value((*key3)[1])};
        img.key2 = KeyHistory{(*key2)[0], word_value((*key2)[1]), (*key2)[2]};
        img.key1 = KeyHistory{(*key1)[0], word_value((*key1)[1]), (*key1)[2]};
        if ((*done)[0] != 0)
        {
            img.done_sent = word_value((*done)[1]);
        }
        img.last_request = (*req)[0];
        img.last_abort = (*abt)[0];
        if ((*dec)[0] != 0)
        {
            img.decided = word_value((*dec)[1]);
        }
        for (Kind k : kAuthoredKinds)
        {
            auto slot = take(kSlotBase + static_cast<Word>(k), kSlotWords - 1);
            if (!slot)
            {
                return std::nullopt;
            }
            if ((*slot)[0] == 0)
            {
                continue;
            }
            auto msg = decode(slot->subspan(2, word_count(k)));
            if (!msg || msg->kind != k)
            {
                return std::nullopt;
            }
            img.authored.push_back(StoredMessage{*msg, static_cast<PartyId>((*slot)[1])});
        }
        if (i != w.size())
        {
            return std::nullopt;
        }
        return img;
    }

    /// Rebuilds a party from stable storage. Transient state starts empty; the
    /// party asks everyone to resend what it lost and re-announces its view.
    inline Step reboot(const PersistentImage &img, std::uint32_t n, std::uint32_t f, ProtocolOptions opts = {})
    {
        if (img.view < opts.first_view)
        {
            return init_party(img.id, n, f, img.lock.val, opts);
        }
        const Committee c(n, f);
        Step step{make_initial_state(img.id, c, img.lock.val, opts), {}};
        PartyState &s = step.state;
        s.view = img.view;
        s.lock = img.lock;
        s.key3 = img.key3;
        s.key2 = img.key2;
        s.key1 = img.key1;
        s.done_sent = img.done_sent;
        s.decided = img.decided;
        s.last_request = img.last_request;
        s.last_abort = img.last_abort;
        if (s.last_abort != kNoPrev)
        {
            s.highest_abort[s.id - 1] = std::max(s.highest_abort[s.id - 1], s.last_abort);
        }
        s.round = PerViewState::fresh(s.view, c.primary_of(s.view), n);
        for (const auto &sm : img.authored)
        {
            Authored a{.msg = sm.msg, .only_to = sm.only_to, .pending = std::vector<bool>(n, false)};
            for (PartyId j = 1; j <= n; ++j)
            {
                a.pending[j - 1] = a.addressed_to(j);
            }
            s.round.authored.push_back(std::move(a));
        }
        // Peers that were down when we last sent, or when their own recovery
        // query reached us, may have lost these; re-announce them once.
        if (s.done_sent)
        {
            for (PartyId j = 1; j <= n; ++j)
            {
                step.actions.emplace_back(Send{j, Message::done(*s.done_sent)});
            }
        }
        if (s.terminated())
        {
            return step;
        }
        if (s.last_abort >= opts.first_view)
        {
            for (PartyId j = 1; j <= n; ++j)
            {
                step.actions.emplace_back(Send{j, Message::abort(s.last_abort)});
            }
        }
        for (PartyId j = 1; j <= n; ++j)
        {
            step.actions.emplace_back(Send{j, Message::recover_query(s.view)});
        }
        for (PartyId j = 1; j <= n; ++j)
        {
            step.actions.emplace_back(Send{j, Message::request(s.view)});
        }
        step.actions.emplace_back(SetViewTimer{s.view});
        return step;
    }

    /// Reply to a recovery query: last done/request/abort, plus this view's
    /// messages when the requester asked about the view we are in.
    inline std::vector<Action> handle_recover_query(const PartyState &state, PartyId requester, View asked)
    {
        PartyState copy = state;
        detail::Machine m(copy);
        m.answer_recover_query(requester, asked);
        return m.finish();
    }
} // namespace iths
