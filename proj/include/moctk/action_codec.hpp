// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moctk/error.hpp"

namespace moctk {

/// Planar end-effector command in normalized image coordinates.
struct Action {
    double x = 0.0;
    double y = 0.0;
    int theta = 0;  // degrees, [-180, 180)

    bool operator==(const Action&) const = default;
};

struct ActionAnswer {
    std::vector<Action> actions;
    std::string surface_text;

    bool operator==(const ActionAnswer&) const = default;
};

inline bool in_range(const Action& a) {
    return a.x >= 0.0 && a.x <= 1.0 && a.y >= 0.0 && a.y <= 1.0 && a.theta >= -180 && a.theta < 180;
}

/// Fixed-point decimal with three places, correctly rounded.
inline std::string format_fixed3(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 3);
    std::string s(buf, res.ptr);
    if (s == "-0.000") s = "0.000";
    return s;
}

/// Canonical form of one action:
///   Move to (0.500, 0.500) with rotation 0 degrees.
inline std::string serialize(const Action& a) {
    if (!in_range(a)) {
        throw Error(Errc::invariant, "action outside [0,1]^2 x [-180,180)");
    }
    return "Move to (" + format_fixed3(a.x) + ", " + format_fixed3(a.y) + ") with rotation " +
           std::to_string(a.theta) + " degrees.";
}

/// Space-joined canonical sentences, one per action.
inline std::string serialize(const std::vector<Action>& actions) {
    if (actions.empty()) {
        throw Error(Errc::parameter, "cannot serialize an empty action list");
    }
    std::string out;
    for (const Action& a : actions) {
        if (!out.empty()) out += ' ';
        out += serialize(a);
    }
    return out;
}

namespace detail {

// Cursor over the text for one grammar match attempt.
struct Scanner {
    std::string_view s;
    std::size_t i = 0;

    bool literal(std::string_view lit) {
        if (s.substr(i, lit.size()) != lit) return false;
        i += lit.size();
        return true;
    }

    static bool digit(char c) { return c >= '0' && c <= '9'; }

    // [-]d+.ddd
    std::optional<double> decimal3() {
        const std::size_t start = i;
        if (i < s.size() && s[i] == '-') ++i;
        const std::size_t int_start = i;
        while (i < s.size() && digit(s[i]) && i - int_start < 16) ++i;
        if (i == int_start || i >= s.size() || s[i] != '.') return std::nullopt;
        ++i;
        for (int k = 0; k < 3; ++k, ++i) {
            if (i >= s.size() || !digit(s[i])) return std::nullopt;
        }
        if (i < s.size() && digit(s[i])) return std::nullopt;
        double v = 0.0;
        auto res = std::from_chars(s.data() + start, s.data() + i, v);
        if (res.ec != std::errc()) return std::nullopt;
        return v;
    }

    // [+-]d+ ; out-of-int values come back as nullopt with `overflow` set.
    std::optional<long long> integer(bool& overflow) {
        const std::size_t start = i;
        if (i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
        const std::size_t digits = i;
        while (i < s.size() && digit(s[i])) ++i;
        if (i == digits) return std::nullopt;
        long long v = 0;
        const char* first = s.data() + start + (s[start] == '+' ? 1 : 0);
        auto res = std::from_chars(first, s.data() + i, v);
        if (res.ec == std::errc::result_out_of_range) {
            overflow = true;
            return std::nullopt;
        }
        if (res.ec != std::errc()) return std::nullopt;
        return v;
    }
};

struct RawMatch {
    double x, y;
    long long theta;
    bool theta_overflow;
};

// Tries the grammar at `pos`; on success returns the match and its end.
inline std::optional<std::pair<RawMatch, std::size_t>> match_at(std::string_view text, std::size_t pos) {
    Scanner sc{text, pos};
    if (!sc.literal("Move to (")) return std::nullopt;
    auto x = sc.decimal3();
    if (!x || !sc.literal(", ")) return std::nullopt;
    auto y = sc.decimal3();
    if (!y || !sc.literal(") with rotation ")) return std::nullopt;
    bool overflow = false;
    auto t = sc.integer(overflow);
    if (!t && !overflow) return std::nullopt;
    if (!sc.literal(" degrees.")) return std::nullopt;
    return std::pair{RawMatch{*x, *y, t.value_or(0), overflow}, sc.i};
}

}  // namespace detail

/// Scans text for every grammar match, in order. Surrounding prose is
/// ignored. Throws Errc::no_action when nothing matches and Errc::range when
/// a match carries out-of-range values.
inline std::vector<Action> extract(std::string_view text) {
    std::vector<Action> out;
    std::size_t pos = 0;
    while ((pos = text.find("Move to (", pos)) != std::string_view::npos) {
        auto m = detail::match_at(text, pos);
        if (!m) {
            ++pos;
            continue;
        }
        const auto& [raw, end] = *m;
        const std::size_t index = out.size();
        if (raw.theta_overflow || raw.theta < -180 || raw.theta >= 180 || raw.x < 0.0 || raw.x > 1.0 ||
            raw.y < 0.0 || raw.y > 1.0) {
            throw Error(Errc::range, "action match " + std::to_string(index) + " at offset " +
                                         std::to_string(pos) + " is out of range");
        }
        out.push_back({raw.x, raw.y, static_cast<int>(raw.theta)});
        pos = end;
    }
    if (out.empty()) {
        throw Error(Errc::no_action, "no action found in answer");
    }
    return out;
}

inline ActionAnswer make_answer(std::vector<Action> actions) {
    ActionAnswer a;
    a.surface_text = serialize(actions);
    a.actions = std::move(actions);
    return a;
}

}  // namespace moctk
