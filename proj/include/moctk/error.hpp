// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace moctk {

enum class Errc {
    parameter,
    io,
    bad_magic,
    truncated,
    value_range,
    dimension,
    corruption,
    capacity,
    numeric,
    no_action,
    range,
    integrity,
    parse,
    degeneracy,
    invariant,
};

inline std::string_view to_string(Errc code) {
    switch (code) {
    case Errc::parameter: return "parameter";
    case Errc::io: return "io";
    case Errc::bad_magic: return "bad_magic";
    case Errc::truncated: return "truncated";
    case Errc::value_range: return "value_range";
    case Errc::dimension: return "dimension";
    case Errc::corruption: return "corruption";
    case Errc::capacity: return "capacity";
    case Errc::numeric: return "numeric";
    case Errc::no_action: return "no_action";
    case Errc::range: return "range";
    case Errc::integrity: return "integrity";
    case Errc::parse: return "parse";
    case Errc::degeneracy: return "degeneracy";
    case Errc::invariant: return "invariant";
    }
    return "unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace moctk
