// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "moctk/error.hpp"
#include "moctk/frame_store.hpp"

namespace moctk {

/// Default static-patch threshold.
inline constexpr double kDefaultEpsilon = 1e-5;

enum class Norm {
    linf,    ///< max |a - b| over patch elements
    l2mean,  ///< sqrt(mean((a - b)^2)), i.e. RMS difference
};

inline std::string_view to_string(Norm norm) { return norm == Norm::linf ? "linf" : "l2mean"; }

inline Norm parse_norm(std::string_view s) {
    if (s == "linf") return Norm::linf;
    if (s == "l2mean") return Norm::l2mean;
    throw Error(Errc::parameter, "unknown norm '" + std::string(s) + "'");
}

inline double patch_distance(std::span<const float> a, std::span<const float> b, Norm norm) {
    double acc = 0.0;
    if (norm == Norm::linf) {
        for (std::size_t k = 0; k < a.size(); ++k) {
            acc = std::max(acc, std::abs(static_cast<double>(a[k]) - static_cast<double>(b[k])));
        }
        return acc;
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = static_cast<double>(a[k]) - static_cast<double>(b[k]);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.size()));
}

/// mask(i, y, x) is true when patch (i, y, x) is within epsilon of patch
/// (i - 1, y, x). Frame 0 is never static.
class StaticMask {
public:
    StaticMask(std::size_t n, std::size_t gh, std::size_t gw)
        : n_(n), gh_(gh), gw_(gw), bits_(n * gh * gw, 0) {}

    std::size_t frames() const noexcept { return n_; }
    std::size_t grid_h() const noexcept { return gh_; }
    std::size_t grid_w() const noexcept { return gw_; }

    bool operator()(std::size_t i, std::size_t y, std::size_t x) const { return bits_[index(i, y, x)] != 0; }
    void set(std::size_t i, std::size_t y, std::size_t x, bool v) { bits_[index(i, y, x)] = v ? 1 : 0; }

    std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

private:
    std::size_t index(std::size_t i, std::size_t y, std::size_t x) const { return (i * gh_ + y) * gw_ + x; }

    std::size_t n_, gh_, gw_;
    std::vector<std::uint8_t> bits_;
};

inline StaticMask detect_static(const PatchSequence& ps, double epsilon, Norm norm = Norm::linf) {
    if (!(epsilon >= 0.0)) {
        throw Error(Errc::parameter, "epsilon must be >= 0");
    }
    StaticMask mask(ps.frames(), ps.grid_h(), ps.grid_w());
    for (std::size_t i = 1; i < ps.frames(); ++i) {
        for (std::size_t y = 0; y < ps.grid_h(); ++y) {
            for (std::size_t x = 0; x < ps.grid_w(); ++x) {
                // Strict: epsilon == 0 keeps every patch.
                mask.set(i, y, x, patch_distance(ps.patch(i, y, x), ps.patch(i - 1, y, x), norm) < epsilon);
            }
        }
    }
    return mask;
}

struct TokenMeta {
    std::uint32_t first_frame = 0;
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    std::uint32_t run = 1;

    bool operator==(const TokenMeta&) const = default;
};

struct GridDims {
    std::size_t n = 0;
    std::size_t gh = 0;
    std::size_t gw = 0;
    std::size_t p = 0;
    std::size_t c = 0;

    std::size_t patch_dim() const noexcept { return p * p * c; }
    std::size_t cells() const noexcept { return gh * gw; }
    bool operator==(const GridDims&) const = default;
};

/// Output of compression: one token per maximal run of static patches at a
/// grid cell, ordered by (first_frame, y, x).
struct CompressedTokens {
    GridDims dims;
    double epsilon = kDefaultEpsilon;
    Norm norm = Norm::linf;
    std::vector<TokenMeta> meta;
    std::vector<float> payloads;  // size() * patch_dim floats

    std::size_t size() const noexcept { return meta.size(); }

    std::span<const float> payload(std::size_t k) const {
        return std::span<const float>(payloads).subspan(k * dims.patch_dim(), dims.patch_dim());
    }

    bool operator==(const CompressedTokens&) const = default;
};

inline CompressedTokens compress(const PatchSequence& ps, double epsilon = kDefaultEpsilon, Norm norm = Norm::linf) {
    const StaticMask mask = detect_static(ps, epsilon, norm);
    CompressedTokens ct;
    ct.dims = {ps.frames(), ps.grid_h(), ps.grid_w(), ps.patch_size(), ps.channels()};
    ct.epsilon = epsilon;
    ct.norm = norm;
    const std::size_t n = ps.frames();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t y = 0; y < ps.grid_h(); ++y) {
            for (std::size_t x = 0; x < ps.grid_w(); ++x) {
                if (mask(i, y, x)) continue;
                std::size_t end = i + 1;
                while (end < n && mask(end, y, x)) ++end;
                ct.meta.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(x),
                                   static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(end - i)});
                auto src = ps.patch(i, y, x);
                ct.payloads.insert(ct.payloads.end(), src.begin(), src.end());
            }
        }
    }
    return ct;
}

/// Inverse of compress: every frame covered by a run receives the run's
/// payload. Throws Errc::corruption when runs leave gaps or overlap.
inline PatchSequence expand(const CompressedTokens& ct) {
    const GridDims& d = ct.dims;
    if (d.n == 0 || d.cells() == 0 || d.patch_dim() == 0) {
        throw Error(Errc::corruption, "empty token grid");
    }
    if (ct.payloads.size() != ct.meta.size() * d.patch_dim()) {
        throw Error(Errc::corruption, "payload buffer does not match token count");
    }
    std::vector<float> out(d.n * d.cells() * d.patch_dim());
    std::vector<std::uint8_t> covered(d.n * d.cells(), 0);
    for (std::size_t k = 0; k < ct.size(); ++k) {
        const TokenMeta& m = ct.meta[k];
        if (m.x >= d.gw || m.y >= d.gh || m.run < 1 || m.first_frame + std::size_t{m.run} > d.n) {
            throw Error(Errc::corruption, "token " + std::to_string(k) + " lies outside the grid");
        }
        auto src = ct.payload(k);
        for (std::size_t i = m.first_frame; i < m.first_frame + std::size_t{m.run}; ++i) {
            const std::size_t cell = (i * d.gh + m.y) * d.gw + m.x;
            if (covered[cell]) {
                throw Error(Errc::corruption, "overlapping runs at frame " + std::to_string(i) + " (" +
                                                  std::to_string(m.x) + ", " + std::to_string(m.y) + ")");
            }
            covered[cell] = 1;
            std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(cell * d.patch_dim()));
        }
    }
    if (auto gap = std::find(covered.begin(), covered.end(), 0); gap != covered.end()) {
        const auto cell = static_cast<std::size_t>(gap - covered.begin());
        throw Error(Errc::corruption, "run coverage gap at frame " + std::to_string(cell / d.cells()));
    }
    return PatchSequence(d.n, d.gh, d.gw, d.p, d.c, std::move(out));
}

struct CompressionStats {
    std::size_t original_tokens = 0;
    std::size_t kept_tokens = 0;
    double reduction_fraction = 0.0;
};

inline CompressionStats stats(const CompressedTokens& ct) {
    CompressionStats s;
    s.original_tokens = ct.dims.n * ct.dims.cells();
    s.kept_tokens = ct.size();
    s.reduction_fraction =
        s.original_tokens == 0
            ? 0.0
            : 1.0 - static_cast<double>(s.kept_tokens) / static_cast<double>(s.original_tokens);
    return s;
}

/// Number of kept tokens whose run starts at each frame.
inline std::vector<std::size_t> tokens_per_frame(const CompressedTokens& ct) {
    std::vector<std::size_t> counts(ct.dims.n, 0);
    for (const auto& m : ct.meta) ++counts[m.first_frame];
    return counts;
}

inline nlohmann::json to_json(const CompressedTokens& ct) {
    nlohmann::json tokens = nlohmann::json::array();
    for (std::size_t k = 0; k < ct.size(); ++k) {
        auto p = ct.payload(k);
        tokens.push_back({{"f", ct.meta[k].first_frame},
                          {"x", ct.meta[k].x},
                          {"y", ct.meta[k].y},
                          {"run", ct.meta[k].run},
                          {"payload", std::vector<float>(p.begin(), p.end())}});
    }
    return {{"dims", {{"n", ct.dims.n}, {"gh", ct.dims.gh}, {"gw", ct.dims.gw}, {"p", ct.dims.p}, {"c", ct.dims.c}}},
            {"epsilon", ct.epsilon},
            {"norm", std::string(to_string(ct.norm))},
            {"tokens", std::move(tokens)}};
}

inline CompressedTokens compressed_tokens_from_json(const nlohmann::json& j) {
    try {
        CompressedTokens ct;
        const auto& d = j.at("dims");
        ct.dims = {d.at("n").get<std::size_t>(), d.at("gh").get<std::size_t>(), d.at("gw").get<std::size_t>(),
                   d.at("p").get<std::size_t>(), d.at("c").get<std::size_t>()};
        ct.epsilon = j.at("epsilon").get<double>();
        ct.norm = parse_norm(j.at("norm").get<std::string>());
        for (const auto& t : j.at("tokens")) {
            ct.meta.push_back({t.at("f").get<std::uint32_t>(), t.at("x").get<std::uint32_t>(),
                               t.at("y").get<std::uint32_t>(), t.at("run").get<std::uint32_t>()});
            const auto payload = t.at("payload").get<std::vector<float>>();
            if (payload.size() != ct.dims.patch_dim()) {
                throw Error(Errc::parse, "token payload length does not match p*p*c");
            }
            ct.payloads.insert(ct.payloads.end(), payload.begin(), payload.end());
        }
        return ct;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::parse, std::string("compressed tokens: ") + e.what());
    }
}

}  // namespace moctk
