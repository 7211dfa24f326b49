// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "json.hpp"
#include "moctk/action_codec.hpp"
#include "moctk/error.hpp"

namespace moctk {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point2&) const = default;
};

struct Correspondence {
    Point2 image;
    Point2 workspace;
};

/// Affine image -> workspace map: q = A p + b.
struct CalibrationMap {
    std::array<std::array<double, 2>, 2> a{{{1.0, 0.0}, {0.0, 1.0}}};
    std::array<double, 2> b{0.0, 0.0};

    double det() const { return a[0][0] * a[1][1] - a[0][1] * a[1][0]; }
};

struct WorkspaceAction {
    double u = 0.0;
    double v = 0.0;
    int theta = 0;
};

inline Point2 apply(const CalibrationMap& m, Point2 p) {
    return {m.a[0][0] * p.x + m.a[0][1] * p.y + m.b[0], m.a[1][0] * p.x + m.a[1][1] * p.y + m.b[1]};
}

inline WorkspaceAction apply_action(const CalibrationMap& m, const Action& act) {
    const Point2 q = apply(m, {act.x, act.y});
    return {q.x, q.y, act.theta};
}

inline double residual(const CalibrationMap& m, const std::vector<Correspondence>& pairs) {
    double r = 0.0;
    for (const auto& c : pairs) {
        const Point2 q = apply(m, c.image);
        r += (q.x - c.workspace.x) * (q.x - c.workspace.x) + (q.y - c.workspace.y) * (q.y - c.workspace.y);
    }
    return r;
}

namespace detail {

using Mat3 = std::array<std::array<double, 3>, 3>;

// Inverse of a symmetric 3x3 matrix via its adjugate.
inline Mat3 inverse_sym3(const Mat3& m, double& det) {
    const double c00 = m[1][1] * m[2][2] - m[1][2] * m[1][2];
    const double c01 = m[0][2] * m[1][2] - m[0][1] * m[2][2];
    const double c02 = m[0][1] * m[1][2] - m[0][2] * m[1][1];
    const double c11 = m[0][0] * m[2][2] - m[0][2] * m[0][2];
    const double c12 = m[0][1] * m[0][2] - m[0][0] * m[1][2];
    const double c22 = m[0][0] * m[1][1] - m[0][1] * m[0][1];
    det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    const double inv = 1.0 / det;
    return {{{c00 * inv, c01 * inv, c02 * inv}, {c01 * inv, c11 * inv, c12 * inv}, {c02 * inv, c12 * inv, c22 * inv}}};
}

}  // namespace detail

/// Least-squares affine fit through the normal equations. Needs at least
/// three image points that are not collinear.
inline CalibrationMap fit(const std::vector<Correspondence>& pairs) {
    if (pairs.size() < 3) {
        throw Error(Errc::degeneracy, "calibration needs at least 3 correspondences");
    }
    // Collinearity test on the centered scatter of image points.
    double mx = 0.0, my = 0.0;
    for (const auto& c : pairs) {
        mx += c.image.x;
        my += c.image.y;
    }
    mx /= static_cast<double>(pairs.size());
    my /= static_cast<double>(pairs.size());
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& c : pairs) {
        const double dx = c.image.x - mx, dy = c.image.y - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    const double trace = sxx + syy;
    if (trace <= 0.0 || sxx * syy - sxy * sxy <= 1e-12 * trace * trace) {
        throw Error(Errc::degeneracy, "calibration image points are collinear");
    }

    detail::Mat3 normal{};
    std::array<double, 3> ru{}, rv{};
    for (const auto& c : pairs) {
        const std::array<double, 3> r{c.image.x, c.image.y, 1.0};
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) normal[i][j] += r[i] * r[j];
            ru[i] += r[i] * c.workspace.x;
            rv[i] += r[i] * c.workspace.y;
        }
    }
    double det = 0.0;
    const auto inv = detail::inverse_sym3(normal, det);
    if (!std::isfinite(det) || std::abs(det) <= 0.0) {
        throw Error(Errc::degeneracy, "singular normal equations");
    }
    std::array<double, 3> wu{}, wv{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            wu[i] += inv[i][j] * ru[j];
            wv[i] += inv[i][j] * rv[j];
        }
    }
    CalibrationMap m;
    m.a = {{{wu[0], wu[1]}, {wv[0], wv[1]}}};
    m.b = {wu[2], wv[2]};
    if (std::abs(m.det()) <= 1e-12) {
        throw Error(Errc::degeneracy, "fitted map is not invertible");
    }
    return m;
}

inline nlohmann::json to_json(const CalibrationMap& m) {
    return {{"a", {{m.a[0][0], m.a[0][1]}, {m.a[1][0], m.a[1][1]}}}, {"b", {m.b[0], m.b[1]}}};
}

inline CalibrationMap calibration_from_json(const nlohmann::json& j) {
    try {
        CalibrationMap m;
        const auto& a = j.at("a");
        m.a = {{{a.at(0).at(0).get<double>(), a.at(0).at(1).get<double>()},
                {a.at(1).at(0).get<double>(), a.at(1).at(1).get<double>()}}};
        m.b = {j.at("b").at(0).get<double>(), j.at("b").at(1).get<double>()};
        if (std::abs(m.det()) <= 1e-12) {
            throw Error(Errc::degeneracy, "calibration map is not invertible");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse, std::string("calibration map: ") + e.what());
    }
}

}  // namespace moctk
