// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "moctk/action_codec.hpp"
#include "moctk/calibration.hpp"
#include "moctk/error.hpp"
#include "moctk/frame_store.hpp"
#include "moctk/moc.hpp"
#include "moctk/prompt_engine.hpp"
#include "moctk/rng.hpp"

namespace moctk::sim {

/// Footprint radius shared by every object, in workspace units.
inline constexpr double kRadius = 0.0625;
inline constexpr double kOverlapTol = 1e-6;
inline constexpr double kPositionTol = 0.02;
inline constexpr double kAngleTol = 5.0;
/// Minimum center spacing between generated poses.
inline constexpr double kSpacing = 2.0 * kRadius + 0.02;
/// Clearance the oracle keeps from the forbidden zone and from neighbours.
inline constexpr double kRouteMargin = 0.01;

enum class TaskKind { rearrange, reasoning, constraint };
enum class Shape { block, disc, star };

inline constexpr std::array<TaskKind, 3> kAllTasks{TaskKind::rearrange, TaskKind::reasoning, TaskKind::constraint};

inline std::string_view to_string(TaskKind k) {
    switch (k) {
    case TaskKind::rearrange: return "rearrange";
    case TaskKind::reasoning: return "reasoning";
    case TaskKind::constraint: return "constraint";
    }
    return "rearrange";
}

inline TaskKind parse_task(std::string_view s) {
    for (TaskKind k : kAllTasks) {
        if (to_string(k) == s) return k;
    }
    throw Error(Errc::parameter, "unknown task kind '" + std::string(s) + "'");
}

inline std::string_view to_string(Shape s) {
    switch (s) {
    case Shape::block: return "block";
    case Shape::disc: return "disc";
    case Shape::star: return "star";
    }
    return "block";
}

struct Color {
    std::string_view name;
    std::array<float, 3> rgb;
};

inline constexpr std::array<Color, 6> kPalette{{
    {"red", {0.85f, 0.15f, 0.15f}},
    {"green", {0.15f, 0.65f, 0.25f}},
    {"blue", {0.15f, 0.30f, 0.85f}},
    {"yellow", {0.90f, 0.80f, 0.10f}},
    {"purple", {0.55f, 0.20f, 0.70f}},
    {"cyan", {0.10f, 0.75f, 0.80f}},
}};
inline constexpr std::array<float, 3> kBackground{0.80f, 0.75f, 0.65f};
inline constexpr std::array<float, 3> kZoneColor{0.95f, 0.60f, 0.55f};

struct Pose {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;  // degrees
    bool operator==(const Pose&) const = default;
};

struct SimObject {
    int id = 0;
    Shape shape = Shape::block;
    int color = 0;
    Pose pose;
    bool operator==(const SimObject&) const = default;

    std::string name() const { return std::string(kPalette[color].name) + " " + std::string(to_string(shape)); }
};

/// Axis-aligned box, closed.
struct Box {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    bool contains(Point2 p, double margin = 0.0) const {
        return p.x >= x0 - margin && p.x <= x1 + margin && p.y >= y0 - margin && p.y <= y1 + margin;
    }
    Box expanded(double m) const { return {x0 - m, y0 - m, x1 + m, y1 + m}; }
    bool operator==(const Box&) const = default;
};

/// One executed carry: the object's center followed the polyline `path`.
struct MoveEvent {
    std::size_t step = 0;
    int object = 0;
    std::vector<Point2> path;
    bool operator==(const MoveEvent&) const = default;
};

struct SimState {
    std::vector<SimObject> objects;  // objects[i].id == i
    std::size_t step = 0;
    std::vector<MoveEvent> log;
    bool operator==(const SimState&) const = default;
};

struct TargetPose {
    int object = 0;
    Pose pose;
    int phase = 0;  // reasoning tasks: 0 first, 1 second
    bool operator==(const TargetPose&) const = default;
};

struct Frame {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> rgb;  // H x W x 3
    bool operator==(const Frame&) const = default;
};

struct TaskGoal {
    TaskKind kind = TaskKind::rearrange;
    std::vector<TargetPose> targets;
    std::optional<Box> forbidden;
    std::string instruction;
    Frame goal_frame;
    bool operator==(const TaskGoal&) const = default;
};

struct RenderConfig {
    std::size_t height = 64;
    std::size_t width = 64;
};

// Top-down camera: workspace [0,1]^2 lands on image [0.05, 0.95]^2 with the
// image y axis pointing down.
struct Camera {
    double scale = 0.9;
    double offset = 0.05;

    Point2 to_image(Point2 w) const { return {offset + scale * w.x, (1.0 - offset) - scale * w.y}; }
    Point2 to_workspace(Point2 i) const { return {(i.x - offset) / scale, ((1.0 - offset) - i.y) / scale}; }
};

inline constexpr Camera kCamera{};

/// Marker correspondences a visual calibration would record.
inline std::vector<Correspondence> camera_correspondences(const Camera& cam = kCamera) {
    std::vector<Correspondence> out;
    for (Point2 w : {Point2{0.0, 0.0}, Point2{1.0, 0.0}, Point2{0.0, 1.0}, Point2{1.0, 1.0}, Point2{0.5, 0.5}}) {
        out.push_back({cam.to_image(w), w});
    }
    return out;
}

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }
inline Point2 center(const SimObject& o) { return {o.pose.x, o.pose.y}; }
inline Point2 center(const Pose& p) { return {p.x, p.y}; }

/// Wraps degrees into [-180, 180).
inline double wrap_degrees(double deg) {
    double r = std::fmod(deg + 180.0, 360.0);
    if (r < 0.0) r += 360.0;
    return r - 180.0;
}

inline double angle_gap(double a, double b) { return std::abs(wrap_degrees(a - b)); }

inline bool pose_matches(const Pose& have, const Pose& want) {
    return distance(center(have), center(want)) <= kPositionTol && angle_gap(have.theta, want.theta) <= kAngleTol;
}

/// True when any point of segment ab lies in the closed box.
inline bool segment_hits_box(Point2 a, Point2 b, const Box& box) {
    double t0 = 0.0, t1 = 1.0;
    const double dx = b.x - a.x, dy = b.y - a.y;
    const std::array<double, 4> p{-dx, dx, -dy, dy};
    const std::array<double, 4> q{a.x - box.x0, box.x1 - a.x, a.y - box.y0, box.y1 - a.y};
    for (int k = 0; k < 4; ++k) {
        if (p[k] == 0.0) {
            if (q[k] < 0.0) return false;
            continue;
        }
        const double t = q[k] / p[k];
        if (p[k] < 0.0) {
            t0 = std::max(t0, t);
        } else {
            t1 = std::min(t1, t);
        }
        if (t0 > t1) return false;
    }
    return true;
}

inline bool path_hits_box(const std::vector<Point2>& path, const Box& box) {
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
        if (segment_hits_box(path[k], path[k + 1], box)) return true;
    }
    return path.size() == 1 && box.contains(path.front());
}

// ---------------------------------------------------------------- rendering

namespace detail {

inline bool inside_shape(const SimObject& o, Point2 w) {
    const double dx = w.x - o.pose.x, dy = w.y - o.pose.y;
    const double rho = std::hypot(dx, dy);
    if (rho > kRadius) return false;
    const double rad = o.pose.theta * std::numbers::pi / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    switch (o.shape) {
    case Shape::disc: return true;
    case Shape::block: return std::abs(lx) <= 0.7 * kRadius && std::abs(ly) <= 0.7 * kRadius;
    case Shape::star: {
        constexpr double sector = 2.0 * std::numbers::pi / 5.0;
        double phi = std::atan2(ly, lx) - std::numbers::pi / 2.0;
        phi = std::fmod(phi, sector);
        if (phi < 0.0) phi += sector;
        const double t = std::abs(phi - sector / 2.0) / (sector / 2.0);  // 1 at tips
        const double inner = 0.45 * kRadius;
        return rho <= inner + (kRadius - inner) * t;
    }
    }
    return false;
}

inline Frame render(const std::vector<SimObject>& objects, const std::optional<Box>& zone,
                    const RenderConfig& cfg) {
    Frame f{cfg.height, cfg.width, std::vector<float>(cfg.height * cfg.width * 3)};
    for (std::size_t row = 0; row < cfg.height; ++row) {
        for (std::size_t col = 0; col < cfg.width; ++col) {
            const Point2 img{(static_cast<double>(col) + 0.5) / static_cast<double>(cfg.width),
                             (static_cast<double>(row) + 0.5) / static_cast<double>(cfg.height)};
            const Point2 w = kCamera.to_workspace(img);
            std::array<float, 3> px = kBackground;
            if (zone && zone->contains(w)) px = kZoneColor;
            for (const auto& o : objects) {
                if (inside_shape(o, w)) px = kPalette[o.color].rgb;
            }
            std::copy(px.begin(), px.end(), f.rgb.begin() + static_cast<std::ptrdiff_t>((row * cfg.width + col) * 3));
        }
    }
    return f;
}

}  // namespace detail

/// Top-down render of the current scene. The forbidden zone of `goal`, when
/// given, is painted under the objects.
inline Frame observe(const SimState& state, const std::optional<Box>& zone = std::nullopt,
                     const RenderConfig& cfg = {}) {
    return detail::render(state.objects, zone, cfg);
}

// ------------------------------------------------------------- generation

namespace detail {

inline bool clear_of(Point2 p, const std::vector<Point2>& others, double spacing) {
    for (const auto& o : others) {
        if (distance(p, o) < spacing) return false;
    }
    return true;
}

inline bool fits_zone(Point2 p, const std::optional<Box>& zone) {
    return !zone || !zone->contains(p, kRadius + kRouteMargin);
}

inline std::optional<Point2> sample_free(Rng& rng, const std::vector<Point2>& taken, const std::optional<Box>& zone,
                                         Box region = {0.1, 0.1, 0.9, 0.9}) {
    for (int attempt = 0; attempt < 400; ++attempt) {
        const Point2 p{uniform(rng, region.x0, region.x1), uniform(rng, region.y0, region.y1)};
        if (clear_of(p, taken, kSpacing) && fits_zone(p, zone)) return p;
    }
    return std::nullopt;
}

inline double random_theta(Rng& rng) { return static_cast<double>(15 * uniform_int(rng, -12, 11)); }

}  // namespace detail

/// Single-waypoint detour keeping both legs outside the zone grown by
/// kRouteMargin. Returns an empty vector when the direct segment is clear and
/// nullopt when no detour on the 0.02 grid exists.
inline std::optional<std::vector<Point2>> route_around(Point2 from, Point2 to, const Box& zone) {
    const Box guard = zone.expanded(kRouteMargin);
    if (!segment_hits_box(from, to, guard)) return std::vector<Point2>{};
    std::optional<Point2> best;
    double best_len = std::numeric_limits<double>::infinity();
    for (int iy = 1; iy <= 49; ++iy) {
        for (int ix = 1; ix <= 49; ++ix) {
            const Point2 w{0.02 * ix, 0.02 * iy};
            if (guard.contains(w)) continue;
            const double len = distance(from, w) + distance(w, to);
            if (len >= best_len) continue;
            if (segment_hits_box(from, w, guard) || segment_hits_box(w, to, guard)) continue;
            best = w;
            best_len = len;
        }
    }
    if (!best) return std::nullopt;
    return std::vector<Point2>{*best};
}

namespace detail {

inline std::optional<std::pair<SimState, TaskGoal>> try_generate(TaskKind kind, Rng& rng) {
    SimState state;
    TaskGoal goal;
    goal.kind = kind;
    const int n = static_cast<int>(uniform_int(rng, 3, 6));
    std::vector<int> colors(n);
    std::vector<Point2> starts;

    if (kind == TaskKind::constraint) {
        const double w = uniform(rng, 0.18, 0.28), h = uniform(rng, 0.18, 0.28);
        const double cx = uniform(rng, 0.4, 0.6), cy = uniform(rng, 0.4, 0.6);
        goal.forbidden = Box{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
    }

    if (kind == TaskKind::reasoning) {
        const int c1 = static_cast<int>(uniform_int(rng, 0, 5));
        int c2 = static_cast<int>(uniform_int(rng, 0, 4));
        if (c2 >= c1) ++c2;
        const int k1 = static_cast<int>(uniform_int(rng, 1, 2));
        const int k2 = static_cast<int>(uniform_int(rng, 1, 2));
        std::vector<int> pool;
        for (int c = 0; c < 6; ++c) {
            if (c != c1 && c != c2) pool.push_back(c);
        }
        for (int i = 0; i < n; ++i) {
            colors[i] = i < k1 ? c1 : i < k1 + k2 ? c2 : pool[static_cast<std::size_t>(uniform_int(rng, 0, 3))];
        }
        for (int i = n - 1; i > 0; --i) std::swap(colors[i], colors[uniform_int(rng, 0, i)]);
        goal.instruction = "Move all " + std::string(kPalette[c1].name) +
                           " objects to their goal positions, then move all " + std::string(kPalette[c2].name) +
                           " objects to their goal positions.";
        for (int i = 0; i < n; ++i) {
            if (colors[i] == c1) goal.targets.push_back({i, {}, 0});
            if (colors[i] == c2) goal.targets.push_back({i, {}, 1});
        }
    } else {
        for (int& c : colors) c = static_cast<int>(uniform_int(rng, 0, 5));
        for (int i = 0; i < n; ++i) goal.targets.push_back({i, {}, 0});
        goal.instruction = kind == TaskKind::rearrange
                               ? "Rearrange the objects to match the goal image."
                               : "Place the objects at their goal positions without entering the forbidden zone.";
    }

    // Object 0 of a constraint task starts on one side of the zone with its
    // target on the opposite side, so its straight carry must detour.
    std::optional<std::pair<Point2, Point2>> crossing;
    if (kind == TaskKind::constraint) {
        const Box& z = *goal.forbidden;
        const double gap = kRadius + kRouteMargin + 1e-3;
        const bool horizontal = uniform01(rng) < 0.5;
        const bool flip = uniform01(rng) < 0.5;
        Point2 a, b;
        if (horizontal) {
            a = {uniform(rng, 0.1, z.x0 - gap), uniform(rng, z.y0, z.y1)};
            b = {uniform(rng, z.x1 + gap, 0.9), uniform(rng, z.y0, z.y1)};
        } else {
            a = {uniform(rng, z.x0, z.x1), uniform(rng, 0.1, z.y0 - gap)};
            b = {uniform(rng, z.x0, z.x1), uniform(rng, z.y1 + gap, 0.9)};
        }
        if (flip) std::swap(a, b);
        if (!fits_zone(a, goal.forbidden) || !fits_zone(b, goal.forbidden) || distance(a, b) < kSpacing) {
            return std::nullopt;
        }
        crossing = std::pair{a, b};
        starts.push_back(a);
    }

    std::vector<Point2> taken = starts;
    if (crossing) taken.push_back(crossing->second);
    for (int i = static_cast<int>(starts.size()); i < n; ++i) {
        auto p = sample_free(rng, taken, goal.forbidden);
        if (!p) return std::nullopt;
        starts.push_back(*p);
        taken.push_back(*p);
    }
    for (int i = 0; i < n; ++i) {
        const auto shape = static_cast<Shape>(uniform_int(rng, 0, 2));
        state.objects.push_back({i, shape, colors[i], {starts[i].x, starts[i].y, random_theta(rng)}});
    }

    if (kind == TaskKind::rearrange) {
        std::vector<int> perm(n);
        for (int i = 0; i < n; ++i) perm[i] = i;
        bool deranged = false;
        while (!deranged) {
            for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_int(rng, 0, i)]);
            deranged = true;
            for (int i = 0; i < n; ++i) deranged = deranged && perm[i] != i;
        }
        for (auto& t : goal.targets) {
            t.pose = {starts[perm[t.object]].x, starts[perm[t.object]].y, random_theta(rng)};
        }
    } else {
        for (auto& t : goal.targets) {
            Point2 p;
            if (crossing && t.object == 0) {
                p = crossing->second;
            } else {
                auto q = sample_free(rng, taken, goal.forbidden);
                if (!q) return std::nullopt;
                p = *q;
                taken.push_back(p);
            }
            t.pose = {p.x, p.y, random_theta(rng)};
        }
    }

    if (goal.forbidden) {
        for (const auto& t : goal.targets) {
            if (!route_around(center(state.objects[t.object]), center(t.pose), *goal.forbidden)) return std::nullopt;
        }
    }
    return std::pair{std::move(state), std::move(goal)};
}

}  // namespace detail

inline std::vector<SimObject> goal_scene(const SimState& state, const TaskGoal& goal) {
    std::vector<SimObject> objs = state.objects;
    for (const auto& t : goal.targets) objs[t.object].pose = t.pose;
    return objs;
}

/// Deterministic task instance for (kind, seed).
inline std::pair<SimState, TaskGoal> reset(TaskKind kind, std::uint64_t seed, const RenderConfig& cfg = {}) {
    Rng rng = make_rng(seed, 0x7265736574ull + static_cast<std::uint64_t>(kind));
    for (;;) {
        if (auto inst = detail::try_generate(kind, rng)) {
            auto& [state, goal] = *inst;
            goal.goal_frame = detail::render(goal_scene(state, goal), goal.forbidden, cfg);
            return std::move(*inst);
        }
    }
}

// ------------------------------------------------------------- perception

/// Detections in image coordinates, in object id order. Each axis of the
/// workspace center is perturbed by U(-noise/2, noise/2) and clamped to the
/// workspace before projection.
inline std::vector<DetectedObject> detect(const SimState& state, double noise_level, Rng& rng) {
    if (!(noise_level >= 0.0)) {
        throw Error(Errc::parameter, "noise level must be >= 0");
    }
    std::vector<DetectedObject> out;
    for (const auto& o : state.objects) {
        Point2 w = center(o);
        if (noise_level > 0.0) {
            w.x = std::clamp(w.x + uniform(rng, -noise_level / 2, noise_level / 2), 0.0, 1.0);
            w.y = std::clamp(w.y + uniform(rng, -noise_level / 2, noise_level / 2), 0.0, 1.0);
        }
        const Point2 img = kCamera.to_image(w);
        out.push_back({o.name(), img.x, img.y});
    }
    return out;
}

// -------------------------------------------------------------- dynamics

inline bool overlaps_any(const SimState& state, Point2 p, int ignore, double spacing) {
    for (const auto& o : state.objects) {
        if (o.id != ignore && distance(center(o), p) < spacing) return true;
    }
    return false;
}

/// Carries the object under `pick` (nearest center, lower id on ties) to
/// `place` along pick -> via... -> place. Missed grasps and blocked or
/// out-of-bounds placements only advance the step counter.
inline SimState step(const SimState& state, const WorkspaceAction& pick, const WorkspaceAction& place,
                     const std::vector<Point2>& via = {}) {
    SimState next = state;
    ++next.step;
    const Point2 p{pick.u, pick.v};
    int chosen = -1;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : next.objects) {
        const double d = distance(center(o), p);
        if (d <= kRadius && d < best) {
            best = d;
            chosen = o.id;
        }
    }
    if (chosen < 0) return next;
    const Point2 dest{place.u, place.v};
    if (dest.x < 0.0 || dest.x > 1.0 || dest.y < 0.0 || dest.y > 1.0) return next;
    if (overlaps_any(next, dest, chosen, 2.0 * kRadius - kOverlapTol)) return next;

    SimObject& obj = next.objects[chosen];
    MoveEvent ev{next.step, chosen, {center(obj)}};
    ev.path.insert(ev.path.end(), via.begin(), via.end());
    ev.path.push_back(dest);
    next.log.push_back(std::move(ev));
    obj.pose = {dest.x, dest.y, wrap_degrees(static_cast<double>(place.theta))};
    return next;
}

inline bool is_success(const SimState& state, const TaskGoal& goal) {
    for (const auto& t : goal.targets) {
        if (!pose_matches(state.objects[t.object].pose, t.pose)) return false;
    }
    if (goal.kind == TaskKind::reasoning) {
        auto completed_at = [&](int id) {
            std::size_t s = 0;
            for (const auto& ev : state.log) {
                if (ev.object == id) s = ev.step;
            }
            return s;
        };
        std::size_t last_first = 0;
        std::size_t first_second = std::numeric_limits<std::size_t>::max();
        for (const auto& t : goal.targets) {
            const std::size_t s = completed_at(t.object);
            if (t.phase == 0) last_first = std::max(last_first, s);
            if (t.phase == 1) first_second = std::min(first_second, s);
        }
        if (last_first >= first_second) return false;
    }
    if (goal.forbidden) {
        for (const auto& ev : state.log) {
            if (path_hits_box(ev.path, *goal.forbidden)) return false;
        }
    }
    return true;
}

// ----------------------------------------------------------------- oracle

namespace detail {

inline int to_int_degrees(double theta) {
    auto v = static_cast<int>(std::lround(wrap_degrees(theta)));
    return v >= 180 ? v - 360 : v;
}

inline Action image_action(Point2 workspace, int theta) {
    const Point2 img = kCamera.to_image(workspace);
    return {std::clamp(img.x, 0.0, 1.0), std::clamp(img.y, 0.0, 1.0), theta};
}

inline std::optional<Point2> buffer_spot(const SimState& state, const TaskGoal& goal, int mover, Point2 from,
                                         bool avoid_targets) {
    std::optional<Point2> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (int iy = 0; iy <= 40; ++iy) {
        for (int ix = 0; ix <= 40; ++ix) {
            const Point2 c{0.1 + 0.02 * ix, 0.1 + 0.02 * iy};
            const double d = distance(c, from);
            if (d >= best_d) continue;
            if (overlaps_any(state, c, mover, 2.0 * kRadius + kRouteMargin)) continue;
            if (!fits_zone(c, goal.forbidden)) continue;
            if (avoid_targets) {
                bool near_target = false;
                for (const auto& t : goal.targets) {
                    if (t.object != mover && distance(center(t.pose), c) < 2.0 * kRadius + kRouteMargin) {
                        near_target = true;
                    }
                }
                if (near_target) continue;
            }
            if (goal.forbidden && !route_around(from, c, *goal.forbidden)) continue;
            best = c;
            best_d = d;
        }
    }
    return best;
}

}  // namespace detail

/// Scripted expert standing in for a trained policy. Returns one
/// pick(/waypoint)/place answer toward the next unmet sub-goal, or nullopt
/// once no sub-goal is unmet. Knows which target is unmet from the true
/// state, but aims picks at the (possibly noisy) detections.
inline std::optional<ActionAnswer> oracle_policy(const SimState& state, const TaskGoal& goal,
                                                 const std::vector<DetectedObject>& detections) {
    if (detections.size() != state.objects.size()) {
        throw Error(Errc::parameter, "one detection per object expected");
    }
    std::vector<const TargetPose*> pending;
    for (const auto& t : goal.targets) {
        if (!pose_matches(state.objects[t.object].pose, t.pose)) pending.push_back(&t);
    }
    if (pending.empty()) return std::nullopt;
    std::stable_sort(pending.begin(), pending.end(), [](const TargetPose* a, const TargetPose* b) {
        return a->phase != b->phase ? a->phase < b->phase : a->object < b->object;
    });
    const TargetPose* t = pending.front();
    auto target_of = [&](int id) -> const TargetPose* {
        for (const auto* p : pending) {
            if (p->object == id) return p;
        }
        return nullptr;
    };
    auto blocker_at = [&](Point2 p, int mover) {
        for (const auto& o : state.objects) {
            if (o.id != mover && distance(center(o), p) < 2.0 * kRadius + 0.002) return o.id;
        }
        return -1;
    };

    int mover = t->object;
    Point2 dest = center(t->pose);
    int theta = detail::to_int_degrees(t->pose.theta);
    if (const int b = blocker_at(dest, mover); b >= 0) {
        const TargetPose* bt = target_of(b);
        if (bt && blocker_at(center(bt->pose), b) < 0 && (goal.kind != TaskKind::reasoning || bt->phase == t->phase)) {
            mover = b;
            dest = center(bt->pose);
            theta = detail::to_int_degrees(bt->pose.theta);
        } else {
            const DetectedObject& bd = detections[b];
            const Point2 from = kCamera.to_workspace({bd.x, bd.y});
            auto spot = detail::buffer_spot(state, goal, b, from, true);
            if (!spot) spot = detail::buffer_spot(state, goal, b, from, false);
            if (spot) {
                mover = b;
                dest = *spot;
                theta = detail::to_int_degrees(state.objects[b].pose.theta);
            }
        }
    }

    const DetectedObject& det = detections[mover];
    const Point2 from = kCamera.to_workspace({det.x, det.y});
    std::vector<Action> actions{{std::clamp(det.x, 0.0, 1.0), std::clamp(det.y, 0.0, 1.0), theta}};
    if (goal.forbidden) {
        if (auto via = route_around(from, dest, *goal.forbidden)) {
            for (Point2 w : *via) actions.push_back(detail::image_action(w, theta));
        }
    }
    actions.push_back(detail::image_action(dest, theta));
    return make_answer(std::move(actions));
}

// ---------------------------------------------------------------- episodes

struct EpisodeOptions {
    RenderConfig render;
    Placement mode = Placement::collection;
    std::optional<CalibrationMap> calibration;
    /// Keep the per-step conversation records.
    bool keep_records = true;
};

struct EpisodeResult {
    TaskKind kind = TaskKind::rearrange;
    std::uint64_t seed = 0;
    double noise = 0.0;
    bool success = false;
    std::size_t steps = 0;
    std::size_t objects = 0;
    FrameSequence frames;      // steps + 1 observations
    FrameSequence goal_frames;  // one goal image
    std::vector<ActionAnswer> answers;
    std::vector<ConversationRecord> records;
};

inline FrameSequence single_frame(const Frame& f) { return FrameSequence(1, f.height, f.width, 3, f.rgb); }

/// Observe -> detect -> prompt -> policy -> serialize -> extract ->
/// calibrate -> step, until success, oracle completion or max_steps.
inline EpisodeResult run_episode(TaskKind kind, std::uint64_t seed, double noise_level, std::size_t max_steps,
                                 const EpisodeOptions& opts = {}) {
    if (max_steps < 1) {
        throw Error(Errc::parameter, "max_steps must be >= 1");
    }
    auto [state, goal] = reset(kind, seed, opts.render);
    const CalibrationMap calib = opts.calibration.value_or(fit(camera_correspondences()));
    Rng noise_rng = make_rng(seed, 0x6e6f697365ull);

    EpisodeResult res;
    res.kind = kind;
    res.seed = seed;
    res.noise = noise_level;
    res.objects = state.objects.size();
    res.goal_frames = single_frame(goal.goal_frame);

    std::vector<DetectedObject> goal_desc;
    for (const auto& t : goal.targets) {
        const Point2 img = kCamera.to_image(center(t.pose));
        goal_desc.push_back({state.objects[t.object].name(), img.x, img.y});
    }

    auto push_frame = [&](const Frame& f) { res.frames.append_frame(f.height, f.width, 3, f.rgb); };
    push_frame(observe(state, goal.forbidden, opts.render));

    while (res.steps < max_steps && !is_success(state, goal)) {
        const auto detections = detect(state, noise_level, noise_rng);

        PromptRequest req;
        req.instruction = goal.instruction;
        for (std::size_t i = 0; i <= res.steps; ++i) req.observations.push_back(i);
        req.goals = {0};
        req.history = res.answers;
        req.detections.assign(res.steps + 2, {});
        req.detections[res.steps] = detections;
        req.detections[res.steps + 1] = goal_desc;
        req.mode = opts.mode;
        ConversationRecord rec = build_prompt(req);

        auto answer = oracle_policy(state, goal, detections);
        if (!answer) break;

        const std::vector<Action> parsed = extract(answer->surface_text);
        if (serialize(parsed) != answer->surface_text || parsed.size() < 2) {
            throw Error(Errc::integrity, "action text did not survive extraction");
        }
        std::vector<WorkspaceAction> ws;
        for (const auto& a : parsed) ws.push_back(apply_action(calib, a));
        std::vector<Point2> via;
        for (std::size_t k = 1; k + 1 < ws.size(); ++k) via.push_back({ws[k].u, ws[k].v});
        state = step(state, ws.front(), ws.back(), via);

        ActionAnswer executed{parsed, answer->surface_text};
        if (opts.keep_records) res.records.push_back(with_answer(std::move(rec), executed));
        res.answers.push_back(std::move(executed));
        ++res.steps;
        push_frame(observe(state, goal.forbidden, opts.render));
    }
    res.success = is_success(state, goal);
    return res;
}

inline nlohmann::json to_json(const EpisodeResult& r, const std::string& frames_file, const std::string& goal_file) {
    nlohmann::json answers = nlohmann::json::array();
    for (const auto& a : r.answers) {
        nlohmann::json acts = nlohmann::json::array();
        for (const auto& act : a.actions) acts.push_back({{"x", act.x}, {"y", act.y}, {"theta", act.theta}});
        answers.push_back({{"text", a.surface_text}, {"actions", std::move(acts)}});
    }
    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : r.records) records.push_back(to_json(rec));
    return {{"task", to_string(r.kind)},
            {"seed", r.seed},
            {"noise", r.noise},
            {"success", r.success},
            {"steps", r.steps},
            {"objects", r.objects},
            {"frames", frames_file},
            {"goal_frames", goal_file},
            {"answers", std::move(answers)},
            {"records", std::move(records)}};
}

/// Writes `<stem>.json` next to the `<stem>.fsq` and `<stem>.goal.fsq` sidecars.
inline void write_episode(const EpisodeResult& r, const std::filesystem::path& json_path) {
    auto frames_path = json_path;
    frames_path.replace_extension(".fsq");
    auto goal_path = json_path;
    goal_path.replace_extension(".goal.fsq");
    save_fsq(r.frames, frames_path);
    save_fsq(r.goal_frames, goal_path);
    std::ofstream out(json_path, std::ios::trunc);
    if (!out) {
        throw Error(Errc::io, "cannot open " + json_path.string() + " for writing");
    }
    out << to_json(r, frames_path.filename().string(), goal_path.filename().string()).dump(2) << '\n';
    if (!out) {
        throw Error(Errc::io, "write failed for " + json_path.string());
    }
}

inline EpisodeResult read_episode(const std::filesystem::path& json_path) {
    std::ifstream in(json_path);
    if (!in) {
        throw Error(Errc::io, "cannot open " + json_path.string());
    }
    try {
        const auto j = nlohmann::json::parse(in);
        EpisodeResult r;
        r.kind = parse_task(j.at("task").get<std::string>());
        r.seed = j.at("seed").get<std::uint64_t>();
        r.noise = j.at("noise").get<double>();
        r.success = j.at("success").get<bool>();
        r.steps = j.at("steps").get<std::size_t>();
        r.objects = j.at("objects").get<std::size_t>();
        for (const auto& a : j.at("answers")) {
            ActionAnswer ans;
            ans.surface_text = a.at("text").get<std::string>();
            for (const auto& act : a.at("actions")) {
                ans.actions.push_back({act.at("x").get<double>(), act.at("y").get<double>(), act.at("theta").get<int>()});
            }
            r.answers.push_back(std::move(ans));
        }
        for (const auto& rec : j.at("records")) r.records.push_back(record_from_json(rec));
        const auto dir = json_path.parent_path();
        r.frames = load_fsq(dir / j.at("frames").get<std::string>());
        r.goal_frames = load_fsq(dir / j.at("goal_frames").get<std::string>());
        if (r.frames.frames() != r.steps + 1) {
            throw Error(Errc::integrity, "episode frame count does not match steps + 1");
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse, json_path.string() + ": " + e.what());
    }
}

// ----------------------------------------------------------------- batches

struct EpisodeSummary {
    std::uint64_t seed = 0;
    bool success = false;
    std::size_t steps = 0;
    std::size_t objects = 0;
    double token_reduction = 0.0;
};

struct BatchConfig {
    TaskKind kind = TaskKind::rearrange;
    std::uint64_t first_seed = 0;
    std::size_t episodes = 0;
    double noise = 0.0;
    std::size_t max_steps = 20;
    double epsilon = kDefaultEpsilon;
    Norm norm = Norm::linf;
    std::size_t patch = 16;
    std::size_t workers = 0;  // 0: hardware concurrency
};

inline EpisodeSummary summarize(const EpisodeResult& r, double epsilon, Norm norm, std::size_t patch) {
    const auto ct = compress(to_patches(r.frames, patch), epsilon, norm);
    return {r.seed, r.success, r.steps, r.objects, stats(ct).reduction_fraction};
}

/// Episodes seeded first_seed + i, fanned out over worker threads; the
/// returned vector is in seed order regardless of scheduling.
inline std::vector<EpisodeSummary> run_batch(const BatchConfig& cfg, const EpisodeOptions& opts = {}) {
    std::vector<EpisodeSummary> out(cfg.episodes);
    EpisodeOptions local = opts;
    local.keep_records = false;
    std::size_t workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(cfg.episodes, 1));
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](std::size_t w) {
        try {
            for (std::size_t i = w; i < cfg.episodes; i += workers) {
                const auto r = run_episode(cfg.kind, cfg.first_seed + i, cfg.noise, cfg.max_steps, local);
                out[i] = summarize(r, cfg.epsilon, cfg.norm, cfg.patch);
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    if (workers <= 1) {
        work(0);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

}  // namespace moctk::sim
