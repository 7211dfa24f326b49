// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "moctk/calibration.hpp"
#include "moctk/rng.hpp"
#include "test_util.hpp"

namespace moctk {
namespace {

using testing::error_code_of;

std::vector<Correspondence> synthesize(const CalibrationMap& m, const std::vector<Point2>& pts) {
    std::vector<Correspondence> out;
    for (const auto& p : pts) out.push_back({p, apply(m, p)});
    return out;
}

void expect_map_near(const CalibrationMap& got, const CalibrationMap& want, double tol) {
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(got.a[i][j], want.a[i][j], tol) << i << "," << j;
        EXPECT_NEAR(got.b[i], want.b[i], tol) << i;
    }
}

const std::vector<Point2> kSquare{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}, {0.3, 0.7}};

TEST(Fit, RecoversIdentity) {
    const CalibrationMap id;
    expect_map_near(fit(synthesize(id, kSquare)), id, 1e-9);
}

TEST(Fit, RecoversScaledShift) {
    CalibrationMap m;
    m.a = {{{2.0, 0.0}, {0.0, 3.0}}};
    m.b = {1.0, -1.0};
    expect_map_near(fit(synthesize(m, kSquare)), m, 1e-9);
}

TEST(Fit, ExactOnThreePointsAndRandomMaps) {
    Rng rng = make_rng(30);
    for (int t = 0; t < 500; ++t) {
        CalibrationMap m;
        m.a = {{{uniform(rng, -3, 3), uniform(rng, -3, 3)}, {uniform(rng, -3, 3), uniform(rng, -3, 3)}}};
        m.b = {uniform(rng, -2, 2), uniform(rng, -2, 2)};
        if (std::abs(m.det()) < 0.05) continue;
        std::vector<Point2> pts;
        const std::size_t n = uniform_int(rng, 3, 10);
        for (std::size_t i = 0; i < n; ++i) pts.push_back({uniform01(rng), uniform01(rng)});
        const auto pairs = synthesize(m, pts);
        CalibrationMap got;
        try {
            got = fit(pairs);
        } catch (const Error& e) {
            // Three random points may land nearly collinear; that must be the only failure.
            ASSERT_EQ(e.code(), Errc::degeneracy);
            continue;
        }
        // Recovery of parameters is as precise as the conditioning allows;
        // reproduction of the given points must be tight.
        for (const auto& c : pairs) {
            const Point2 q = apply(got, c.image);
            ASSERT_NEAR(q.x, c.workspace.x, 1e-9);
            ASSERT_NEAR(q.y, c.workspace.y, 1e-9);
        }
    }
}

TEST(Fit, DegenerateInputs) {
    EXPECT_EQ(error_code_of([] { fit({}); }), Errc::degeneracy);
    EXPECT_EQ(error_code_of([] {
                  fit({{{0, 0}, {0, 0}}, {{1, 1}, {1, 1}}});
              }),
              Errc::degeneracy);
    EXPECT_EQ(error_code_of([] {
                  fit({{{0, 0}, {0, 0}}, {{0.5, 0.5}, {1, 0}}, {{1, 1}, {1, 1}}});
              }),
              Errc::degeneracy);
    EXPECT_EQ(error_code_of([] {
                  fit({{{0.2, 0.2}, {0, 0}}, {{0.2, 0.2}, {1, 0}}, {{0.2, 0.2}, {1, 1}}, {{0.2, 0.2}, {0, 1}}});
              }),
              Errc::degeneracy);
}

TEST(Apply, IdentityMidpointAndAction) {
    const CalibrationMap id;
    EXPECT_EQ(apply(id, {0.3, 0.6}), (Point2{0.3, 0.6}));
    CalibrationMap m;
    m.a = {{{1.5, -0.2}, {0.4, 0.9}}};
    m.b = {0.1, -0.3};
    const Point2 p{0.2, 0.8}, q{0.6, 0.1};
    const Point2 mid = apply(m, {0.4, 0.45});
    const Point2 ap = apply(m, p), aq = apply(m, q);
    EXPECT_NEAR(mid.x, 0.5 * (ap.x + aq.x), 1e-15);
    EXPECT_NEAR(mid.y, 0.5 * (ap.y + aq.y), 1e-15);
    const WorkspaceAction w = apply_action(m, Action{0.2, 0.8, -37});
    EXPECT_EQ(w.theta, -37);
    EXPECT_DOUBLE_EQ(w.u, ap.x);
    EXPECT_DOUBLE_EQ(w.v, ap.y);
}

TEST(Fit, NoPerturbedCandidateBeatsIt) {
    Rng rng = make_rng(31);
    for (int t = 0; t < 20; ++t) {
        std::vector<Correspondence> pairs;
        for (int i = 0; i < 12; ++i) {
            const Point2 p{uniform01(rng), uniform01(rng)};
            pairs.push_back({p, {0.8 * p.x + 0.1 * p.y + 0.05 + uniform(rng, -0.02, 0.02),
                                 -0.2 * p.x + 1.1 * p.y - 0.1 + uniform(rng, -0.02, 0.02)}});
        }
        const CalibrationMap best = fit(pairs);
        const double r0 = residual(best, pairs);
        for (int k = 0; k < 6; ++k) {
            for (double delta : {-1e-3, -1e-5, 1e-5, 1e-3}) {
                CalibrationMap c = best;
                double* field = k < 4 ? &c.a[k / 2][k % 2] : &c.b[k - 4];
                *field += delta;
                ASSERT_GE(residual(c, pairs), r0 - 1e-15) << "param " << k << " delta " << delta;
            }
        }
        for (int k = 0; k < 50; ++k) {
            CalibrationMap c = best;
            for (auto& row : c.a)
                for (double& v : row) v += uniform(rng, -1e-3, 1e-3);
            for (double& v : c.b) v += uniform(rng, -1e-3, 1e-3);
            ASSERT_GE(residual(c, pairs), r0 - 1e-15);
        }
    }
}

TEST(Json, RoundTripAndErrors) {
    CalibrationMap m;
    m.a = {{{0.9, 0.1}, {-0.05, 1.2}}};
    m.b = {0.25, -0.5};
    const auto back = calibration_from_json(to_json(m));
    expect_map_near(back, m, 0.0);
    EXPECT_EQ(error_code_of([] { calibration_from_json(nlohmann::json{{"a", 1}}); }), Errc::parse);
    EXPECT_EQ(error_code_of([] {
                  calibration_from_json(nlohmann::json::parse(R"({"a":[[1,2],[2,4]],"b":[0,0]})"));
              }),
              Errc::degeneracy);
}

}  // namespace
}  // namespace moctk
