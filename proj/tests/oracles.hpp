// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

// Random inputs and a brute-force run-length encoder shared by the unit tests
// and the acceptance binary.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <tuple>
#include <vector>

#include "moctk/frame_store.hpp"
#include "moctk/moc.hpp"
#include "moctk/rng.hpp"

namespace moctk::testing {

inline FrameSequence random_sequence(Rng& rng, std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
    std::vector<float> v(n * h * w * c);
    for (float& x : v) x = static_cast<float>(uniform01(rng));
    return FrameSequence(n, h, w, c, std::move(v));
}

/// Random patch sequence where each step either copies a patch, nudges it by
/// less than `jitter` per element, or redraws it.
inline PatchSequence random_patch_sequence(Rng& rng, std::size_t n, std::size_t gh, std::size_t gw, std::size_t p,
                                           std::size_t c, double jitter = 0.0) {
    const std::size_t dim = p * p * c;
    std::vector<float> data(n * gh * gw * dim);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t cell = 0; cell < gh * gw; ++cell) {
            float* dst = &data[(i * gh * gw + cell) * dim];
            const double r = uniform01(rng);
            if (i == 0 || r < 0.3) {
                for (std::size_t k = 0; k < dim; ++k) dst[k] = static_cast<float>(uniform01(rng));
            } else {
                const float* prev = &data[((i - 1) * gh * gw + cell) * dim];
                for (std::size_t k = 0; k < dim; ++k) {
                    float v = prev[k];
                    if (r < 0.65 && jitter > 0.0) {
                        v = std::clamp(static_cast<float>(v + uniform(rng, -jitter, jitter)), 0.0f, 1.0f);
                    }
                    dst[k] = v;
                }
            }
        }
    }
    return PatchSequence(n, gh, gw, p, c, std::move(data));
}

/// Independent reference encoder: scans each grid cell through time,
/// comparing consecutive patches directly, then sorts the runs.
inline CompressedTokens naive_run_length(const PatchSequence& ps, double eps, Norm norm) {
    struct Run {
        std::uint32_t f, x, y, len;
    };
    std::vector<Run> runs;
    for (std::size_t y = 0; y < ps.grid_h(); ++y) {
        for (std::size_t x = 0; x < ps.grid_w(); ++x) {
            std::size_t start = 0;
            for (std::size_t i = 1; i <= ps.frames(); ++i) {
                bool breaks = i == ps.frames();
                if (!breaks) {
                    auto a = ps.patch(i, y, x);
                    auto b = ps.patch(i - 1, y, x);
                    double d = 0.0;
                    if (norm == Norm::linf) {
                        for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(double(a[k]) - double(b[k])));
                    } else {
                        for (std::size_t k = 0; k < a.size(); ++k) d += (double(a[k]) - double(b[k])) * (double(a[k]) - double(b[k]));
                        d = std::sqrt(d / double(a.size()));
                    }
                    breaks = !(d < eps);
                }
                if (breaks) {
                    runs.push_back({std::uint32_t(start), std::uint32_t(x), std::uint32_t(y), std::uint32_t(i - start)});
                    start = i;
                }
            }
        }
    }
    std::sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) {
        return std::tie(a.f, a.y, a.x) < std::tie(b.f, b.y, b.x);
    });
    CompressedTokens ct;
    ct.dims = {ps.frames(), ps.grid_h(), ps.grid_w(), ps.patch_size(), ps.channels()};
    ct.epsilon = eps;
    ct.norm = norm;
    for (const auto& r : runs) {
        ct.meta.push_back({r.f, r.x, r.y, r.len});
        auto p = ps.patch(r.f, r.y, r.x);
        ct.payloads.insert(ct.payloads.end(), p.begin(), p.end());
    }
    return ct;
}

}  // namespace moctk::testing
