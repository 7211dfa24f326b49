// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "moctk/action_codec.hpp"
#include "moctk/error.hpp"

namespace moctk {

inline constexpr std::string_view kImageToken = "<image>";
inline constexpr std::string_view kHistoryPrefix = "You have finished: ";
inline constexpr std::string_view kSystemPrompt =
    "You are a robot manipulation assistant. Observation and goal images show a tabletop from above. "
    "Answer with actions of the form: Move to (x, y) with rotation T degrees.";

struct DetectedObject {
    std::string name;
    double x = 0.0;
    double y = 0.0;

    bool operator==(const DetectedObject&) const = default;
};

/// "<name> at (x.xxx, y.yyy)." per object, space-separated, input order.
inline std::string describe_detections(const std::vector<DetectedObject>& objs) {
    std::string out;
    for (const auto& o : objs) {
        if (!out.empty()) out += ' ';
        out += o.name + " at (" + format_fixed3(o.x) + ", " + format_fixed3(o.y) + ").";
    }
    return out;
}

enum class Role { system, user, assistant };
enum class SlotKind { obs, goal };
enum class Placement { collection, interleaved };

inline std::string_view to_string(Role r) {
    switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
    }
    return "user";
}
inline std::string_view to_string(SlotKind k) { return k == SlotKind::obs ? "obs" : "goal"; }
inline std::string_view to_string(Placement m) { return m == Placement::collection ? "collection" : "interleaved"; }

inline Role parse_role(std::string_view s) {
    if (s == "system") return Role::system;
    if (s == "user") return Role::user;
    if (s == "assistant") return Role::assistant;
    throw Error(Errc::parse, "unknown role '" + std::string(s) + "'");
}
inline SlotKind parse_slot_kind(std::string_view s) {
    if (s == "obs") return SlotKind::obs;
    if (s == "goal") return SlotKind::goal;
    throw Error(Errc::parse, "unknown slot kind '" + std::string(s) + "'");
}
inline Placement parse_placement(std::string_view s) {
    if (s == "collection") return Placement::collection;
    if (s == "interleaved") return Placement::interleaved;
    throw Error(Errc::parse, "unknown placement mode '" + std::string(s) + "'");
}

struct Turn {
    Role role = Role::user;
    std::string content;
    bool operator==(const Turn&) const = default;
};

struct ImageSlot {
    SlotKind kind = SlotKind::obs;
    std::size_t frame = 0;
    bool operator==(const ImageSlot&) const = default;
};

struct ConversationRecord {
    std::string instruction;
    std::vector<Turn> turns;
    std::vector<ImageSlot> slots;
    Placement mode = Placement::collection;

    bool operator==(const ConversationRecord&) const = default;

    const Turn& user_turn() const {
        for (const auto& t : turns) {
            if (t.role == Role::user) return t;
        }
        throw Error(Errc::integrity, "record has no user turn");
    }
};

inline std::size_t count_placeholders(std::string_view s) {
    std::size_t n = 0;
    for (std::size_t pos = s.find(kImageToken); pos != std::string_view::npos;
         pos = s.find(kImageToken, pos + kImageToken.size())) {
        ++n;
    }
    return n;
}

/// True iff every placeholder in `content` precedes its first other character.
inline bool placeholders_lead(std::string_view content) {
    std::size_t pos = 0;
    while (content.substr(pos, kImageToken.size()) == kImageToken) pos += kImageToken.size();
    return content.find(kImageToken, pos) == std::string_view::npos;
}

/// Each placeholder must resolve to exactly one slot, and collection records
/// must lead with all of them.
inline void validate(const ConversationRecord& rec) {
    std::size_t total = 0;
    for (const auto& t : rec.turns) total += count_placeholders(t.content);
    if (total != rec.slots.size()) {
        throw Error(Errc::integrity, std::to_string(total) + " placeholders for " + std::to_string(rec.slots.size()) +
                                         " image slots");
    }
    if (rec.mode == Placement::collection && !placeholders_lead(rec.user_turn().content)) {
        throw Error(Errc::integrity, "collection record has a placeholder after text");
    }
}

struct PromptRequest {
    std::string instruction;
    std::vector<std::size_t> observations;  // frame indices, chronological
    std::vector<std::size_t> goals;         // goal frame indices
    std::vector<ActionAnswer> history;
    /// Per slot (observations first, then goals); may be shorter than the
    /// slot list, missing entries mean no detections.
    std::vector<std::vector<DetectedObject>> detections;
    Placement mode = Placement::collection;
};

inline std::string history_clause(const std::vector<ActionAnswer>& history) {
    if (history.empty()) return {};
    std::string out(kHistoryPrefix);
    bool first = true;
    for (const auto& answer : history) {
        for (const auto& a : answer.actions) {
            if (!first) out += "; ";
            out += serialize(a);
            first = false;
        }
    }
    return out;
}

inline ConversationRecord build_prompt(const PromptRequest& req) {
    if (req.observations.empty()) {
        throw Error(Errc::parameter, "prompt needs at least one observation image");
    }
    if (count_placeholders(req.instruction) != 0) {
        throw Error(Errc::integrity, "instruction contains an unresolved image placeholder");
    }
    ConversationRecord rec;
    rec.instruction = req.instruction;
    rec.mode = req.mode;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < req.observations.size(); ++i) {
        rec.slots.push_back({SlotKind::obs, req.observations[i]});
        labels.push_back("Observation " + std::to_string(i + 1));
    }
    for (std::size_t i = 0; i < req.goals.size(); ++i) {
        rec.slots.push_back({SlotKind::goal, req.goals[i]});
        labels.push_back("Goal " + std::to_string(i + 1));
    }
    auto description = [&](std::size_t slot) {
        return slot < req.detections.size() ? describe_detections(req.detections[slot]) : std::string();
    };

    std::string content;
    if (req.mode == Placement::collection) {
        for (std::size_t s = 0; s < rec.slots.size(); ++s) content += kImageToken;
        content += '\n';
        content += req.instruction;
        for (std::size_t s = 0; s < rec.slots.size(); ++s) {
            const std::string desc = description(s);
            if (!desc.empty()) content += ' ' + labels[s] + ": " + desc;
        }
    } else {
        content += req.instruction;
        for (std::size_t s = 0; s < rec.slots.size(); ++s) {
            content += ' ' + labels[s] + ": " + std::string(kImageToken);
            const std::string desc = description(s);
            if (!desc.empty()) content += ' ' + desc;
        }
    }
    if (!req.history.empty()) {
        content += ' ' + history_clause(req.history);
    }
    rec.turns.push_back({Role::system, std::string(kSystemPrompt)});
    rec.turns.push_back({Role::user, std::move(content)});
    validate(rec);
    return rec;
}

/// Appends the assistant turn carrying the answer text.
inline ConversationRecord with_answer(ConversationRecord rec, const ActionAnswer& answer) {
    rec.turns.push_back({Role::assistant, answer.surface_text});
    return rec;
}

struct LayoutRun {
    enum class Kind { text, image };
    Kind kind = Kind::text;
    std::string text;       // text runs
    std::size_t slot = 0;   // image runs
    std::size_t count = 0;  // image runs: token count

    bool operator==(const LayoutRun&) const = default;
};

using TokenLayout = std::vector<LayoutRun>;

/// Linearizes the user turn into text and image runs; the k-th placeholder
/// corresponds to slot k and expands to per_slot_token_counts[k] tokens.
inline TokenLayout token_layout(const ConversationRecord& rec, const std::vector<std::size_t>& per_slot_token_counts) {
    if (per_slot_token_counts.size() != rec.slots.size()) {
        throw Error(Errc::integrity, std::to_string(per_slot_token_counts.size()) + " token counts for " +
                                         std::to_string(rec.slots.size()) + " slots");
    }
    const std::string_view content = rec.user_turn().content;
    if (count_placeholders(content) != rec.slots.size()) {
        throw Error(Errc::integrity, "user turn placeholders do not match slots");
    }
    TokenLayout layout;
    std::size_t pos = 0;
    std::size_t slot = 0;
    while (pos < content.size()) {
        const std::size_t next = content.find(kImageToken, pos);
        const std::size_t stop = next == std::string_view::npos ? content.size() : next;
        if (stop > pos) {
            layout.push_back({LayoutRun::Kind::text, std::string(content.substr(pos, stop - pos)), 0, 0});
        }
        if (next == std::string_view::npos) break;
        layout.push_back({LayoutRun::Kind::image, {}, slot, per_slot_token_counts[slot]});
        ++slot;
        pos = next + kImageToken.size();
    }
    return layout;
}

inline std::size_t image_token_total(const TokenLayout& layout) {
    std::size_t n = 0;
    for (const auto& r : layout) {
        if (r.kind == LayoutRun::Kind::image) n += r.count;
    }
    return n;
}

/// Crude text token count: whitespace-separated pieces.
inline std::size_t text_token_estimate(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

inline std::size_t text_token_total(const TokenLayout& layout) {
    std::size_t n = 0;
    for (const auto& r : layout) {
        if (r.kind == LayoutRun::Kind::text) n += text_token_estimate(r.text);
    }
    return n;
}

inline nlohmann::json to_json(const ConversationRecord& rec) {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& t : rec.turns) turns.push_back({{"role", to_string(t.role)}, {"content", t.content}});
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& s : rec.slots) slots.push_back({{"kind", to_string(s.kind)}, {"frame", s.frame}});
    return {{"instruction", rec.instruction},
            {"turns", std::move(turns)},
            {"slots", std::move(slots)},
            {"mode", to_string(rec.mode)}};
}

inline ConversationRecord record_from_json(const nlohmann::json& j) {
    ConversationRecord rec;
    rec.instruction = j.at("instruction").get<std::string>();
    for (const auto& t : j.at("turns")) {
        rec.turns.push_back({parse_role(t.at("role").get<std::string>()), t.at("content").get<std::string>()});
    }
    for (const auto& s : j.at("slots")) {
        rec.slots.push_back({parse_slot_kind(s.at("kind").get<std::string>()), s.at("frame").get<std::size_t>()});
    }
    rec.mode = parse_placement(j.at("mode").get<std::string>());
    return rec;
}

/// JSON lines, one record per line.
inline void write_dataset(const std::vector<ConversationRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(Errc::io, "cannot open " + path.string() + " for writing");
    }
    for (const auto& r : records) out << to_json(r).dump() << '\n';
    if (!out) {
        throw Error(Errc::io, "write failed for " + path.string());
    }
}

inline std::vector<ConversationRecord> read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::io, "cannot open " + path.string());
    }
    std::vector<ConversationRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        try {
            records.push_back(record_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(Errc::parse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

}  // namespace moctk
