// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "moctk/error.hpp"

namespace moctk {

/// N frames of H x W x C float intensities in [0, 1], stored frame-major,
/// row-major, channel-interleaved. All frames share one shape.
class FrameSequence {
public:
    FrameSequence() = default;

    FrameSequence(std::size_t n, std::size_t h, std::size_t w, std::size_t c, std::vector<float> data)
        : n_(n), h_(h), w_(w), c_(c), data_(std::move(data)) {
        validate();
    }

    /// Zero-filled sequence.
    static FrameSequence zeros(std::size_t n, std::size_t h, std::size_t w, std::size_t c) {
        return FrameSequence(n, h, w, c, std::vector<float>(n * h * w * c, 0.0f));
    }

    std::size_t frames() const noexcept { return n_; }
    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }
    std::size_t channels() const noexcept { return c_; }
    std::size_t frame_size() const noexcept { return h_ * w_ * c_; }

    std::span<const float> data() const noexcept { return data_; }

    std::span<const float> frame(std::size_t i) const {
        return std::span<const float>(data_).subspan(i * frame_size(), frame_size());
    }

    float at(std::size_t i, std::size_t y, std::size_t x, std::size_t ch) const {
        return data_[((i * h_ + y) * w_ + x) * c_ + ch];
    }

    /// Appends one frame of the same shape. An empty sequence adopts the shape.
    void append_frame(std::size_t h, std::size_t w, std::size_t c, std::span<const float> pixels) {
        if (n_ == 0) {
            h_ = h;
            w_ = w;
            c_ = c;
        } else if (h != h_ || w != w_ || c != c_) {
            throw Error(Errc::dimension, "frame shape differs from sequence shape");
        }
        if (pixels.size() != h * w * c) {
            throw Error(Errc::dimension, "frame pixel count does not match its shape");
        }
        data_.insert(data_.end(), pixels.begin(), pixels.end());
        ++n_;
        validate();
    }

    bool operator==(const FrameSequence& other) const = default;

private:
    void validate() const {
        if (n_ < 1 || h_ < 1 || w_ < 1) {
            throw Error(Errc::dimension, "frame sequence needs N, H, W >= 1");
        }
        if (c_ != 1 && c_ != 3) {
            throw Error(Errc::dimension, "channel count must be 1 or 3");
        }
        if (data_.size() != n_ * h_ * w_ * c_) {
            throw Error(Errc::dimension, "buffer size does not match N*H*W*C");
        }
        for (float v : data_) {
            if (!(v >= 0.0f && v <= 1.0f)) {
                throw Error(Errc::value_range, "intensity outside [0, 1]");
            }
        }
    }

    std::size_t n_ = 0;
    std::size_t h_ = 0;
    std::size_t w_ = 0;
    std::size_t c_ = 0;
    std::vector<float> data_;
};

/// Frames cut into p x p patches. Each patch vector is p*p*C floats,
/// row-major inside the patch with channels interleaved. Patches are stored
/// in raster order within a frame, frames in time order.
class PatchSequence {
public:
    PatchSequence() = default;

    PatchSequence(std::size_t n, std::size_t gh, std::size_t gw, std::size_t p, std::size_t c,
                  std::vector<float> data)
        : n_(n), gh_(gh), gw_(gw), p_(p), c_(c), data_(std::move(data)) {
        if (n_ < 1 || gh_ < 1 || gw_ < 1 || p_ < 1 || (c_ != 1 && c_ != 3)) {
            throw Error(Errc::dimension, "invalid patch grid dimensions");
        }
        if (data_.size() != n_ * gh_ * gw_ * patch_dim()) {
            throw Error(Errc::dimension, "patch buffer size does not match grid");
        }
    }

    std::size_t frames() const noexcept { return n_; }
    std::size_t grid_h() const noexcept { return gh_; }
    std::size_t grid_w() const noexcept { return gw_; }
    std::size_t patch_size() const noexcept { return p_; }
    std::size_t channels() const noexcept { return c_; }
    std::size_t patch_dim() const noexcept { return p_ * p_ * c_; }
    std::size_t grid_cells() const noexcept { return gh_ * gw_; }
    std::size_t patch_count() const noexcept { return n_ * gh_ * gw_; }

    std::span<const float> data() const noexcept { return data_; }

    std::span<const float> patch(std::size_t i, std::size_t y, std::size_t x) const {
        return std::span<const float>(data_).subspan(((i * gh_ + y) * gw_ + x) * patch_dim(), patch_dim());
    }

    bool operator==(const PatchSequence& other) const = default;

private:
    std::size_t n_ = 0;
    std::size_t gh_ = 0;
    std::size_t gw_ = 0;
    std::size_t p_ = 0;
    std::size_t c_ = 0;
    std::vector<float> data_;
};

inline PatchSequence to_patches(const FrameSequence& seq, std::size_t p) {
    if (p == 0 || seq.height() % p != 0 || seq.width() % p != 0) {
        throw Error(Errc::dimension, "patch size " + std::to_string(p) + " does not divide " +
                                         std::to_string(seq.height()) + "x" + std::to_string(seq.width()));
    }
    const std::size_t n = seq.frames();
    const std::size_t c = seq.channels();
    const std::size_t gh = seq.height() / p;
    const std::size_t gw = seq.width() / p;
    std::vector<float> out;
    out.reserve(seq.data().size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t gy = 0; gy < gh; ++gy) {
            for (std::size_t gx = 0; gx < gw; ++gx) {
                for (std::size_t py = 0; py < p; ++py) {
                    for (std::size_t px = 0; px < p; ++px) {
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            out.push_back(seq.at(i, gy * p + py, gx * p + px, ch));
                        }
                    }
                }
            }
        }
    }
    return PatchSequence(n, gh, gw, p, c, std::move(out));
}

inline FrameSequence from_patches(const PatchSequence& ps) {
    const std::size_t p = ps.patch_size();
    const std::size_t c = ps.channels();
    const std::size_t h = ps.grid_h() * p;
    const std::size_t w = ps.grid_w() * p;
    std::vector<float> out(ps.frames() * h * w * c);
    for (std::size_t i = 0; i < ps.frames(); ++i) {
        for (std::size_t gy = 0; gy < ps.grid_h(); ++gy) {
            for (std::size_t gx = 0; gx < ps.grid_w(); ++gx) {
                auto patch = ps.patch(i, gy, gx);
                std::size_t k = 0;
                for (std::size_t py = 0; py < p; ++py) {
                    for (std::size_t px = 0; px < p; ++px) {
                        for (std::size_t ch = 0; ch < c; ++ch) {
                            out[((i * h + gy * p + py) * w + gx * p + px) * c + ch] = patch[k++];
                        }
                    }
                }
            }
        }
    }
    return FrameSequence(ps.frames(), h, w, c, std::move(out));
}

// FSQ container, little-endian:
//   "FSQ1" | u32 N | u32 H | u32 W | u32 C | N*H*W*C float32
namespace fsq {

inline constexpr std::array<char, 4> kMagic{'F', 'S', 'Q', '1'};
inline constexpr std::size_t kHeaderBytes = 4 + 4 * 4;

namespace detail {

inline void put_u32(char* p, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) {
        p[b] = static_cast<char>((v >> (8 * b)) & 0xffu);
    }
}

inline std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[b])) << (8 * b);
    }
    return v;
}

}  // namespace detail

inline std::vector<char> encode(const FrameSequence& seq) {
    std::vector<char> buf(kHeaderBytes + seq.data().size() * 4);
    std::copy(kMagic.begin(), kMagic.end(), buf.begin());
    char* p = buf.data() + kMagic.size();
    for (std::size_t dim : {seq.frames(), seq.height(), seq.width(), seq.channels()}) {
        detail::put_u32(p, static_cast<std::uint32_t>(dim));
        p += 4;
    }
    for (float v : seq.data()) {
        detail::put_u32(p, std::bit_cast<std::uint32_t>(v));
        p += 4;
    }
    return buf;
}

inline FrameSequence decode(std::span<const char> buf) {
    if (buf.size() < kMagic.size() || std::memcmp(buf.data(), kMagic.data(), kMagic.size()) != 0) {
        throw Error(Errc::bad_magic, "missing FSQ1 magic");
    }
    if (buf.size() < kHeaderBytes) {
        throw Error(Errc::truncated, "header shorter than 20 bytes");
    }
    const std::uint64_t n = detail::get_u32(buf.data() + 4);
    const std::uint64_t h = detail::get_u32(buf.data() + 8);
    const std::uint64_t w = detail::get_u32(buf.data() + 12);
    const std::uint64_t c = detail::get_u32(buf.data() + 16);
    const std::uint64_t count = n * h * w * c;
    if (buf.size() - kHeaderBytes < count * 4) {
        throw Error(Errc::truncated, "payload has " + std::to_string((buf.size() - kHeaderBytes) / 4) +
                                         " values, header declares " + std::to_string(count));
    }
    std::vector<float> values(count);
    for (std::uint64_t k = 0; k < count; ++k) {
        values[k] = std::bit_cast<float>(detail::get_u32(buf.data() + kHeaderBytes + 4 * k));
    }
    return FrameSequence(n, h, w, c, std::move(values));
}

}  // namespace fsq

inline void save_fsq(const FrameSequence& seq, const std::filesystem::path& path) {
    const auto buf = fsq::encode(seq);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(Errc::io, "cannot open " + path.string() + " for writing");
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) {
        throw Error(Errc::io, "write failed for " + path.string());
    }
}

inline FrameSequence load_fsq(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::io, "cannot open " + path.string());
    }
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return fsq::decode(buf);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

}  // namespace moctk
