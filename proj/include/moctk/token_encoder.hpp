// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "moctk/error.hpp"
#include "moctk/frame_store.hpp"
#include "moctk/matrix.hpp"
#include "moctk/moc.hpp"
#include "moctk/rng.hpp"

namespace moctk {

/// One pre-residual attention block followed by a two-layer GELU
/// feed-forward of width 4d. Single head, no normalization, no mask.
struct EncoderBlock {
    Matrix wq, wk, wv, wo;  // d x d
    Matrix w1;              // d x 4d
    std::vector<double> b1; // 4d
    Matrix w2;              // 4d x d
    std::vector<double> b2; // d
};

struct EncoderParams {
    std::size_t d = 0;
    std::size_t n_max = 0;
    std::size_t grid_size = 0;
    std::size_t patch_dim = 0;

    Matrix proj;       // patch_dim x d
    Matrix pos_table;  // grid_size x d, indexed by y * gw + x
    Matrix len_table;  // n_max x d, row r - 1 for run length r
    std::vector<EncoderBlock> blocks;
};

inline EncoderParams init_params(std::size_t d, std::size_t n_max, std::size_t grid_size, std::size_t patch_dim,
                                 std::size_t num_blocks, std::uint64_t seed) {
    if (d == 0 || n_max == 0 || grid_size == 0 || patch_dim == 0 || num_blocks == 0) {
        throw Error(Errc::parameter, "encoder dimensions must all be >= 1");
    }
    Rng rng = make_rng(seed, 0x656e63);
    auto fill = [&](std::size_t r, std::size_t c) {
        Matrix m(r, c);
        for (double& v : m.values) v = uniform(rng, -0.02, 0.02);
        return m;
    };
    auto fill_vec = [&](std::size_t n) {
        std::vector<double> v(n);
        for (double& x : v) x = uniform(rng, -0.02, 0.02);
        return v;
    };
    EncoderParams p;
    p.d = d;
    p.n_max = n_max;
    p.grid_size = grid_size;
    p.patch_dim = patch_dim;
    p.proj = fill(patch_dim, d);
    p.pos_table = fill(grid_size, d);
    p.len_table = fill(n_max, d);
    for (std::size_t b = 0; b < num_blocks; ++b) {
        EncoderBlock blk;
        blk.wq = fill(d, d);
        blk.wk = fill(d, d);
        blk.wv = fill(d, d);
        blk.wo = fill(d, d);
        blk.w1 = fill(d, 4 * d);
        blk.b1 = fill_vec(4 * d);
        blk.w2 = fill(4 * d, d);
        blk.b2 = fill_vec(d);
        p.blocks.push_back(std::move(blk));
    }
    return p;
}

/// K x patch_dim matrix of token payloads.
inline Matrix payload_matrix(const CompressedTokens& ct) {
    Matrix m(ct.size(), ct.dims.patch_dim());
    for (std::size_t k = 0; k < ct.size(); ++k) {
        auto src = ct.payload(k);
        std::copy(src.begin(), src.end(), m.row(k).begin());
    }
    return m;
}

/// row_k = payload_k * proj + pos_table[cell_k] + len_table[run_k - 1].
inline Matrix embed(const CompressedTokens& ct, const EncoderParams& params) {
    if (ct.dims.patch_dim() != params.patch_dim) {
        throw Error(Errc::dimension, "payload length " + std::to_string(ct.dims.patch_dim()) +
                                         " does not match projection rows " + std::to_string(params.patch_dim));
    }
    Matrix out = matmul(payload_matrix(ct), params.proj);
    for (std::size_t k = 0; k < ct.size(); ++k) {
        const TokenMeta& m = ct.meta[k];
        if (m.run < 1 || m.run > params.n_max) {
            throw Error(Errc::capacity, "run length " + std::to_string(m.run) + " exceeds length table of " +
                                            std::to_string(params.n_max));
        }
        if (m.x >= ct.dims.gw || m.y >= ct.dims.gh) {
            throw Error(Errc::dimension, "token position outside grid");
        }
        const std::size_t cell = m.y * ct.dims.gw + m.x;
        if (cell >= params.grid_size) {
            throw Error(Errc::capacity, "grid cell " + std::to_string(cell) + " exceeds position table");
        }
        auto row = out.row(k);
        auto pos = params.pos_table.row(cell);
        auto len = params.len_table.row(m.run - 1);
        for (std::size_t j = 0; j < params.d; ++j) row[j] += pos[j] + len[j];
    }
    return out;
}

namespace detail {

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

inline double gelu(double u) { return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + 0.044715 * u * u * u))); }

inline double gelu_grad(double u) {
    const double t = std::tanh(kGeluC * (u + 0.044715 * u * u * u));
    return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * u * u);
}

struct BlockCache {
    Matrix x, q, k, v, p, h, u;
};

inline void softmax_rows(Matrix& s) {
    for (std::size_t i = 0; i < s.rows; ++i) {
        auto r = s.row(i);
        const double mx = *std::max_element(r.begin(), r.end());
        double sum = 0.0;
        for (double& v : r) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : r) v /= sum;
    }
}

inline void require_finite(const Matrix& m, std::size_t block) {
    for (double v : m.values) {
        if (!std::isfinite(v)) {
            throw Error(Errc::numeric, "non-finite activation in block " + std::to_string(block));
        }
    }
}

inline Matrix block_forward(const Matrix& x, const EncoderBlock& blk, BlockCache* cache) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(x.cols));
    Matrix q = matmul(x, blk.wq);
    Matrix k = matmul(x, blk.wk);
    Matrix v = matmul(x, blk.wv);
    Matrix p = matmul_bt(q, k);
    for (double& s : p.values) s *= scale;
    softmax_rows(p);
    Matrix h = matmul(matmul(p, v), blk.wo);
    add_inplace(h, x);
    Matrix u = matmul(h, blk.w1);
    add_row_inplace(u, blk.b1);
    Matrix g = u;
    for (double& e : g.values) e = gelu(e);
    Matrix y = matmul(g, blk.w2);
    add_row_inplace(y, blk.b2);
    add_inplace(y, h);
    if (cache) {
        *cache = {x, std::move(q), std::move(k), std::move(v), std::move(p), std::move(h), std::move(u)};
    }
    return y;
}

// Propagates dL/dy back to dL/dx through one block.
inline Matrix block_backward(const Matrix& dy, const EncoderBlock& blk, const BlockCache& c) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(dy.cols));
    Matrix dg = matmul_bt(dy, blk.w2);
    for (std::size_t e = 0; e < dg.values.size(); ++e) dg.values[e] *= gelu_grad(c.u.values[e]);
    Matrix dh = matmul_bt(dg, blk.w1);
    add_inplace(dh, dy);

    Matrix da = matmul_bt(dh, blk.wo);
    Matrix dp = matmul_bt(da, c.v);
    Matrix dv = matmul_at(c.p, da);
    Matrix ds(dp.rows, dp.cols);
    for (std::size_t i = 0; i < dp.rows; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < dp.cols; ++j) dot += c.p(i, j) * dp(i, j);
        for (std::size_t j = 0; j < dp.cols; ++j) ds(i, j) = c.p(i, j) * (dp(i, j) - dot) * scale;
    }
    Matrix dq = matmul(ds, c.k);
    Matrix dk = matmul_at(ds, c.q);

    Matrix dx = std::move(dh);
    add_inplace(dx, matmul_bt(dq, blk.wq));
    add_inplace(dx, matmul_bt(dk, blk.wk));
    add_inplace(dx, matmul_bt(dv, blk.wv));
    return dx;
}

}  // namespace detail

/// Runs all blocks over the token rows. Throws Errc::numeric on overflow.
inline Matrix encode(const Matrix& emb, const EncoderParams& params) {
    if (emb.cols != params.d) {
        throw Error(Errc::dimension, "embedding width does not match model width");
    }
    Matrix x = emb;
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        x = detail::block_forward(x, params.blocks[b], nullptr);
        detail::require_finite(x, b);
    }
    return x;
}

inline double sum_of_squares(const Matrix& m) {
    double acc = 0.0;
    for (double v : m.values) acc += v * v;
    return acc;
}

struct EncoderGradients {
    double loss = 0.0;
    Matrix proj;       // dL/dproj
    Matrix len_table;  // dL/dlen_table
};

/// Analytic gradient of sum(encode(embed(ct))^2) with respect to the
/// projection and the length table.
inline EncoderGradients loss_gradients(const CompressedTokens& ct, const EncoderParams& params) {
    std::vector<detail::BlockCache> caches(params.blocks.size());
    Matrix x = embed(ct, params);
    for (std::size_t b = 0; b < params.blocks.size(); ++b) {
        x = detail::block_forward(x, params.blocks[b], &caches[b]);
        detail::require_finite(x, b);
    }
    EncoderGradients g;
    g.loss = sum_of_squares(x);
    Matrix dx = x;
    for (double& v : dx.values) v *= 2.0;
    for (std::size_t b = params.blocks.size(); b-- > 0;) {
        dx = detail::block_backward(dx, params.blocks[b], caches[b]);
    }
    g.proj = matmul_at(payload_matrix(ct), dx);
    g.len_table = Matrix(params.n_max, params.d);
    for (std::size_t k = 0; k < ct.size(); ++k) {
        auto dst = g.len_table.row(ct.meta[k].run - 1);
        auto src = dx.row(k);
        for (std::size_t j = 0; j < params.d; ++j) dst[j] += src[j];
    }
    return g;
}

struct GradCoordinate {
    std::string tensor;  // "proj" or "len_table"
    std::size_t row = 0;
    std::size_t col = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_error = 0.0;
};

struct GradReport {
    bool passed = false;
    double tol = 0.0;
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
    GradCoordinate worst;
};

struct GradCheckOptions {
    double step = 1e-4;
    /// Test hook: perturbs the analytic gradient at one len_table entry.
    bool corrupt = false;
};

/// Denominator floor for the relative error, so coordinates whose true
/// gradient is zero compare on absolute error instead.
inline constexpr double kGradFloor = 1e-8;

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kGradFloor});
}

/// Compares analytic gradients with central finite differences on every
/// coordinate of proj and len_table. Passes iff the worst relative error is
/// strictly below tol.
inline GradReport grad_check(const EncoderParams& params, const CompressedTokens& ct, double tol,
                             const GradCheckOptions& opts = {}) {
    if (ct.size() == 0 || ct.size() > 32 || params.d > 16) {
        throw Error(Errc::parameter, "gradient check expects 1 <= K <= 32 and d <= 16");
    }
    if (!(opts.step > 0.0)) {
        throw Error(Errc::parameter, "finite-difference step must be > 0");
    }
    EncoderGradients analytic = loss_gradients(ct, params);
    if (opts.corrupt) {
        double& g = analytic.len_table(ct.meta.front().run - 1, 0);
        g = g * 1.5 + 1e-3;
    }

    GradReport report;
    report.tol = tol;
    EncoderParams work = params;
    auto loss_at = [&]() { return sum_of_squares(encode(embed(ct, work), work)); };
    auto scan = [&](const char* name, Matrix& target, const Matrix& grad) {
        for (std::size_t i = 0; i < target.rows; ++i) {
            for (std::size_t j = 0; j < target.cols; ++j) {
                const double saved = target(i, j);
                target(i, j) = saved + opts.step;
                const double up = loss_at();
                target(i, j) = saved - opts.step;
                const double down = loss_at();
                target(i, j) = saved;
                const double numeric = (up - down) / (2.0 * opts.step);
                const double err = relative_error(grad(i, j), numeric);
                ++report.coordinates;
                if (report.coordinates == 1 || err > report.max_rel_error) {
                    report.max_rel_error = err;
                    report.worst = {name, i, j, grad(i, j), numeric, err};
                }
            }
        }
    };
    scan("len_table", work.len_table, analytic.len_table);
    scan("proj", work.proj, analytic.proj);
    report.passed = report.max_rel_error < tol;
    return report;
}

inline nlohmann::json to_json(const GradReport& r) {
    return {{"passed", r.passed},
            {"tol", r.tol},
            {"max_rel_error", r.max_rel_error},
            {"coordinates", r.coordinates},
            {"worst",
             {{"tensor", r.worst.tensor},
              {"row", r.worst.row},
              {"col", r.worst.col},
              {"analytic", r.worst.analytic},
              {"numeric", r.worst.numeric},
              {"rel_error", r.worst.rel_error}}}};
}

struct GradCheckInstance {
    EncoderParams params;
    CompressedTokens tokens;
};

/// Small random instance: 4 frames of 4x4x3 at patch size 2, where each
/// step redraws a random subset of patches. Block weights are scaled up from
/// the init range so attention and GELU are far from linear.
inline GradCheckInstance make_gradcheck_instance(std::uint64_t seed, double weight_scale = 25.0) {
    Rng rng = make_rng(seed, 0x6763);
    constexpr std::size_t n = 4, side = 4, p = 2, c = 3;
    std::vector<float> data;
    std::vector<float> frame(side * side * c);
    for (float& v : frame) v = static_cast<float>(uniform01(rng));
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) {
            for (std::size_t gy = 0; gy < side / p; ++gy) {
                for (std::size_t gx = 0; gx < side / p; ++gx) {
                    if (uniform01(rng) < 0.5) continue;
                    for (std::size_t py = 0; py < p; ++py) {
                        for (std::size_t px = 0; px < p; ++px) {
                            for (std::size_t ch = 0; ch < c; ++ch) {
                                frame[((gy * p + py) * side + gx * p + px) * c + ch] =
                                    static_cast<float>(uniform01(rng));
                            }
                        }
                    }
                }
            }
        }
        data.insert(data.end(), frame.begin(), frame.end());
    }
    GradCheckInstance inst;
    inst.tokens = compress(to_patches(FrameSequence(n, side, side, c, std::move(data)), p), kDefaultEpsilon);
    inst.params = init_params(8, n, (side / p) * (side / p), p * p * c, 2, seed);
    for (auto& blk : inst.params.blocks) {
        for (Matrix* m : {&blk.wq, &blk.wk, &blk.wv, &blk.wo, &blk.w1, &blk.w2}) {
            for (double& v : m->values) v *= weight_scale;
        }
    }
    return inst;
}

struct TimingPair {
    std::size_t k_full = 0;
    std::size_t k_compressed = 0;
    std::size_t repeats = 0;
    double mean_full_ms = 0.0;
    double mean_compressed_ms = 0.0;
    double median_full_ms = 0.0;
    double median_compressed_ms = 0.0;
    /// median_full / median_compressed
    double speedup = 0.0;
};

namespace detail {

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace detail

/// Times encode() on random K_full and K_compressed token streams, one
/// warm-up each, then `repeats` alternating measurements.
inline TimingPair bench_forward(const EncoderParams& params, std::size_t k_full, std::size_t k_compressed,
                                std::size_t repeats, std::uint64_t seed = 0) {
    if (repeats == 0) {
        throw Error(Errc::parameter, "repeats must be >= 1");
    }
    if (k_compressed > k_full || k_compressed == 0) {
        throw Error(Errc::parameter, "need 1 <= K_compressed <= K_full");
    }
    Rng rng = make_rng(seed, 0x62656e);
    auto random_rows = [&](std::size_t k) {
        Matrix m(k, params.d);
        for (double& v : m.values) v = uniform(rng, -1.0, 1.0);
        return m;
    };
    const Matrix full = random_rows(k_full);
    const Matrix comp = random_rows(k_compressed);
    auto time_once = [&](const Matrix& x) {
        const auto t0 = std::chrono::steady_clock::now();
        Matrix y = encode(x, params);
        const auto t1 = std::chrono::steady_clock::now();
        volatile double sink = y.values.empty() ? 0.0 : y.values.front();
        (void)sink;
        return std::chrono::duration<double, std::milli>(t1 - t0).count();
    };
    time_once(full);
    time_once(comp);
    std::vector<double> tf, tc;
    for (std::size_t r = 0; r < repeats; ++r) {
        tf.push_back(time_once(full));
        tc.push_back(time_once(comp));
    }
    TimingPair t;
    t.k_full = k_full;
    t.k_compressed = k_compressed;
    t.repeats = repeats;
    t.mean_full_ms = detail::mean(tf);
    t.mean_compressed_ms = detail::mean(tc);
    t.median_full_ms = detail::median(tf);
    t.median_compressed_ms = detail::median(tc);
    t.speedup = t.median_compressed_ms > 0.0 ? t.median_full_ms / t.median_compressed_ms : 0.0;
    return t;
}

inline nlohmann::json to_json(const TimingPair& t) {
    return {{"k_full", t.k_full},
            {"k_compressed", t.k_compressed},
            {"repeats", t.repeats},
            {"mean_full_ms", t.mean_full_ms},
            {"mean_compressed_ms", t.mean_compressed_ms},
            {"median_full_ms", t.median_full_ms},
            {"median_compressed_ms", t.median_compressed_ms},
            {"speedup", t.speedup}};
}

}  // namespace moctk
