// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "moctk/frame_store.hpp"
#include "test_util.hpp"

namespace moctk {
namespace {

Errc error_code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return Errc::invariant;
}

TEST(FrameStore, ZeroSequenceFileLayout) {
    const auto dir = testing::scratch_dir("fsq_zero");
    const auto path = dir / "zero.fsq";
    save_fsq(FrameSequence::zeros(1, 2, 2, 1), path);
    std::ifstream in(path, std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    ASSERT_EQ(bytes.size(), 20u + 4u * 4u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FSQ1");
    const std::vector<unsigned char> header{1, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0};
    EXPECT_TRUE(std::equal(header.begin(), header.end(), bytes.begin() + 4));
    EXPECT_TRUE(std::all_of(bytes.begin() + 20, bytes.end(), [](unsigned char b) { return b == 0; }));
}

TEST(FrameStore, LittleEndianFloatPayload) {
    const auto buf = fsq::encode(FrameSequence(1, 1, 1, 1, {1.0f}));
    // 1.0f == 0x3f800000
    EXPECT_EQ(static_cast<unsigned char>(buf[20]), 0x00);
    EXPECT_EQ(static_cast<unsigned char>(buf[22]), 0x80);
    EXPECT_EQ(static_cast<unsigned char>(buf[23]), 0x3f);
}

TEST(FrameStore, RoundTripRandomSequences) {
    const auto dir = testing::scratch_dir("fsq_roundtrip");
    Rng rng = make_rng(11);
    for (int t = 0; t < 100; ++t) {
        const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 4));
        const auto h = static_cast<std::size_t>(uniform_int(rng, 1, 9));
        const auto w = static_cast<std::size_t>(uniform_int(rng, 1, 9));
        const std::size_t c = uniform01(rng) < 0.5 ? 1 : 3;
        const auto seq = testing::random_sequence(rng, n, h, w, c);
        const auto path = dir / "seq.fsq";
        save_fsq(seq, path);
        const auto back = load_fsq(path);
        ASSERT_EQ(back, seq) << "case " << t;
    }
}

TEST(FrameStore, UnwritablePathIsIoError) {
    EXPECT_EQ(error_code_of([] { save_fsq(FrameSequence::zeros(1, 1, 1, 1), "/nonexistent_dir/x/y.fsq"); }),
              Errc::io);
    EXPECT_EQ(error_code_of([] { load_fsq("/nonexistent_dir/missing.fsq"); }), Errc::io);
}

TEST(FrameStore, DistinctLoadErrors) {
    const auto dir = testing::scratch_dir("fsq_errors");
    auto write = [&](const std::string& name, const std::vector<char>& bytes) {
        std::ofstream(dir / name, std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        return dir / name;
    };
    auto good = fsq::encode(FrameSequence::zeros(2, 2, 2, 1));

    auto bad_magic = good;
    bad_magic[3] = '2';
    EXPECT_EQ(error_code_of([&] { load_fsq(write("magic.fsq", bad_magic)); }), Errc::bad_magic);

    auto truncated = good;
    truncated.resize(truncated.size() - 4);
    EXPECT_EQ(error_code_of([&] { load_fsq(write("short.fsq", truncated)); }), Errc::truncated);

    auto header_only = std::vector<char>(good.begin(), good.begin() + 10);
    EXPECT_EQ(error_code_of([&] { load_fsq(write("header.fsq", header_only)); }), Errc::truncated);

    auto out_of_range = fsq::encode(FrameSequence::zeros(1, 1, 1, 1));
    const auto bits = std::bit_cast<std::uint32_t>(1.5f);
    for (int b = 0; b < 4; ++b) out_of_range[20 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    EXPECT_EQ(error_code_of([&] { load_fsq(write("range.fsq", out_of_range)); }), Errc::value_range);
}

TEST(FrameStore, RejectsInvalidShapesAndValues) {
    EXPECT_EQ(error_code_of([] { FrameSequence(1, 1, 1, 2, {0, 0}); }), Errc::dimension);
    EXPECT_EQ(error_code_of([] { FrameSequence(0, 1, 1, 1, {}); }), Errc::dimension);
    EXPECT_EQ(error_code_of([] { FrameSequence(1, 1, 1, 1, {-0.1f}); }), Errc::value_range);
    EXPECT_EQ(error_code_of([] { FrameSequence(1, 1, 1, 1, {std::nanf("")}); }), Errc::value_range);

    auto seq = FrameSequence::zeros(1, 2, 2, 1);
    std::vector<float> other(3 * 2 * 3, 0.0f);
    EXPECT_EQ(error_code_of([&] { seq.append_frame(3, 2, 3, other); }), Errc::dimension);
}

TEST(Patches, SinglePatch) {
    const auto ps = to_patches(FrameSequence::zeros(1, 16, 16, 1), 16);
    EXPECT_EQ(ps.frames(), 1u);
    EXPECT_EQ(ps.grid_h(), 1u);
    EXPECT_EQ(ps.grid_w(), 1u);
    EXPECT_EQ(ps.patch_dim(), 256u);
}

TEST(Patches, GridArithmetic) {
    const auto ps = to_patches(FrameSequence::zeros(2, 32, 32, 3), 16);
    EXPECT_EQ(ps.grid_h(), 2u);
    EXPECT_EQ(ps.grid_w(), 2u);
    EXPECT_EQ(ps.patch_dim(), 768u);
    EXPECT_EQ(ps.patch_count(), 8u);
}

TEST(Patches, NonDivisibleSizeIsDimensionError) {
    EXPECT_EQ(error_code_of([] { to_patches(FrameSequence::zeros(1, 16, 12, 1), 8); }), Errc::dimension);
    EXPECT_EQ(error_code_of([] { to_patches(FrameSequence::zeros(1, 16, 16, 1), 0); }), Errc::dimension);
}

TEST(Patches, ChannelInterleavedRowMajorLayout) {
    // 1 frame, 4x4, 3 channels; value encodes (y, x, ch).
    std::vector<float> v;
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x)
            for (int ch = 0; ch < 3; ++ch) v.push_back(static_cast<float>(y * 12 + x * 3 + ch) / 64.0f);
    const auto ps = to_patches(FrameSequence(1, 4, 4, 3, v), 2);
    // Patch (gy=1, gx=0) starts at pixel (2, 0).
    auto patch = ps.patch(0, 1, 0);
    ASSERT_EQ(patch.size(), 12u);
    EXPECT_EQ(patch[0], (2 * 12 + 0 * 3 + 0) / 64.0f);
    EXPECT_EQ(patch[1], (2 * 12 + 0 * 3 + 1) / 64.0f);
    EXPECT_EQ(patch[3], (2 * 12 + 1 * 3 + 0) / 64.0f);
    EXPECT_EQ(patch[6], (3 * 12 + 0 * 3 + 0) / 64.0f);
}

TEST(Patches, RoundTripRandomSequences) {
    Rng rng = make_rng(5);
    for (int t = 0; t < 100; ++t) {
        const auto p = static_cast<std::size_t>(uniform_int(rng, 1, 4));
        const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 3));
        const auto gh = static_cast<std::size_t>(uniform_int(rng, 1, 4));
        const auto gw = static_cast<std::size_t>(uniform_int(rng, 1, 4));
        const std::size_t c = uniform01(rng) < 0.5 ? 1 : 3;
        const auto seq = testing::random_sequence(rng, n, gh * p, gw * p, c);
        const auto ps = to_patches(seq, p);
        ASSERT_EQ(ps.patch_count(), n * gh * gw);
        ASSERT_EQ(from_patches(ps), seq) << "case " << t;
    }
}

}  // namespace
}  // namespace moctk
