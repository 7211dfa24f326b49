// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>

#include "moctk/prompt_engine.hpp"
#include "moctk/rng.hpp"
#include "test_util.hpp"

namespace moctk {
namespace {

using testing::error_code_of;

TEST(DescribeDetections, Template) {
    EXPECT_EQ(describe_detections({}), "");
    EXPECT_EQ(describe_detections({{"red block", 0.25, 0.75}}), "red block at (0.250, 0.750).");
}

TEST(DescribeDetections, PreservesOrder) {
    const std::vector<DetectedObject> objs{{"red block", 0.1, 0.2}, {"blue disc", 0.3, 0.4}, {"green star", 0.5, 0.6}};
    std::vector<DetectedObject> rev(objs.rbegin(), objs.rend());
    const std::string a = describe_detections(objs);
    const std::string b = describe_detections(rev);
    EXPECT_EQ(a, "red block at (0.100, 0.200). blue disc at (0.300, 0.400). green star at (0.500, 0.600).");
    EXPECT_EQ(b, "green star at (0.500, 0.600). blue disc at (0.300, 0.400). red block at (0.100, 0.200).");
}

PromptRequest basic_request(Placement mode) {
    PromptRequest req;
    req.instruction = "Put every block on its goal.";
    req.observations = {0, 1};
    req.goals = {0};
    req.detections = {{{"red block", 0.2, 0.3}}, {{"red block", 0.25, 0.3}}, {{"red block", 0.8, 0.7}}};
    req.mode = mode;
    return req;
}

TEST(BuildPrompt, SingleObservationNoHistory) {
    PromptRequest req;
    req.instruction = "Stack it.";
    req.observations = {0};
    const auto rec = build_prompt(req);
    const auto& user = rec.user_turn().content;
    EXPECT_EQ(count_placeholders(user), 1u);
    EXPECT_EQ(user.rfind(kImageToken, 0), 0u);
    EXPECT_TRUE(placeholders_lead(user));
    EXPECT_EQ(user.find("You have finished"), std::string::npos);
    ASSERT_EQ(rec.slots.size(), 1u);
    EXPECT_EQ(rec.slots[0], (ImageSlot{SlotKind::obs, 0}));
    EXPECT_EQ(rec.turns.front().role, Role::system);
}

TEST(BuildPrompt, HistoryListsEveryActionInOrder) {
    auto req = basic_request(Placement::collection);
    const ActionAnswer a1 = make_answer({{0.1, 0.1, 0}, {0.2, 0.2, 10}});
    const ActionAnswer a2 = make_answer({{0.3, 0.3, 20}, {0.4, 0.4, 30}});
    req.history = {a1, a2};
    const auto& user = build_prompt(req).user_turn().content;
    const auto at = user.find(kHistoryPrefix);
    ASSERT_NE(at, std::string::npos);
    const std::string clause = user.substr(at);
    EXPECT_EQ(clause, history_clause(req.history));
    // Two answers of two actions: four sentences, in execution order.
    const auto acts = extract(clause);
    ASSERT_EQ(acts.size(), 4u);
    EXPECT_EQ(acts[0], a1.actions[0]);
    EXPECT_EQ(acts[1], a1.actions[1]);
    EXPECT_EQ(acts[2], a2.actions[0]);
    EXPECT_EQ(acts[3], a2.actions[1]);
    EXPECT_EQ(std::count(clause.begin(), clause.end(), ';'), 3);
}

std::vector<std::size_t> placeholder_positions(const std::string& s) {
    std::vector<std::size_t> out;
    for (auto p = s.find(kImageToken); p != std::string::npos; p = s.find(kImageToken, p + 1)) out.push_back(p);
    return out;
}

TEST(BuildPrompt, ModesShareSlotsButPlaceThemDifferently) {
    const auto c = build_prompt(basic_request(Placement::collection));
    const auto i = build_prompt(basic_request(Placement::interleaved));
    EXPECT_EQ(c.slots, i.slots);
    EXPECT_EQ(count_placeholders(c.user_turn().content), count_placeholders(i.user_turn().content));
    EXPECT_TRUE(placeholders_lead(c.user_turn().content));
    EXPECT_FALSE(placeholders_lead(i.user_turn().content));
    EXPECT_NE(placeholder_positions(c.user_turn().content), placeholder_positions(i.user_turn().content));
    // Interleaved: each placeholder sits right before its description.
    const auto& s = i.user_turn().content;
    EXPECT_NE(s.find("Observation 1: <image> red block at (0.200, 0.300)."), std::string::npos);
    EXPECT_NE(s.find("Goal 1: <image> red block at (0.800, 0.700)."), std::string::npos);
    validate(c);
    validate(i);
}

TEST(BuildPrompt, Errors) {
    PromptRequest none;
    none.instruction = "x";
    EXPECT_EQ(error_code_of([&] { build_prompt(none); }), Errc::parameter);
    auto bad = basic_request(Placement::collection);
    bad.instruction = "look at <image> here";
    EXPECT_EQ(error_code_of([&] { build_prompt(bad); }), Errc::integrity);
}

TEST(Validate, CatchesBrokenRecords) {
    auto rec = build_prompt(basic_request(Placement::collection));
    auto extra = rec;
    extra.slots.pop_back();
    EXPECT_EQ(error_code_of([&] { validate(extra); }), Errc::integrity);
    auto late = rec;
    late.turns[1].content = "text first " + late.turns[1].content;
    EXPECT_EQ(error_code_of([&] { validate(late); }), Errc::integrity);
}

TEST(BuildPrompt, HistoryIsNestedAcrossSteps) {
    Rng rng = make_rng(20);
    auto req = basic_request(Placement::interleaved);
    std::string prev;
    for (int t = 0; t < 8; ++t) {
        const std::string clause = history_clause(req.history);
        const std::string user = build_prompt(req).user_turn().content;
        if (t == 0) {
            EXPECT_EQ(user.find(kHistoryPrefix), std::string::npos);
        } else {
            EXPECT_EQ(clause.rfind(prev, 0), 0u) << "step " << t;
            EXPECT_NE(user.find(clause), std::string::npos);
        }
        prev = clause;
        std::vector<Action> acts;
        for (std::size_t k = 0, n = uniform_int(rng, 1, 3); k < n; ++k) {
            acts.push_back({uniform01(rng), uniform01(rng), static_cast<int>(uniform_int(rng, 0, 359)) - 180});
        }
        req.history.push_back(make_answer(acts));
    }
}

TEST(TokenLayout, CollectionStartsWithImages) {
    const auto rec = build_prompt(basic_request(Placement::collection));
    auto two = rec;
    two.slots.pop_back();
    two.turns[1].content = "<image><image>\nDo it.";
    const auto layout = token_layout(two, {100, 60});
    ASSERT_GE(layout.size(), 3u);
    EXPECT_EQ(layout[0], (LayoutRun{LayoutRun::Kind::image, {}, 0, 100}));
    EXPECT_EQ(layout[1], (LayoutRun{LayoutRun::Kind::image, {}, 1, 60}));
    EXPECT_EQ(layout[2].kind, LayoutRun::Kind::text);
    EXPECT_EQ(image_token_total(layout), 160u);
}

TEST(TokenLayout, InterleavedImagesAtPlaceholderPositions) {
    const auto rec = build_prompt(basic_request(Placement::interleaved));
    const auto layout = token_layout(rec, {3, 4, 5});
    // Rebuilding the text with placeholders at the image runs gives back the turn.
    std::string rebuilt;
    std::size_t next_slot = 0;
    for (const auto& r : layout) {
        if (r.kind == LayoutRun::Kind::text) {
            rebuilt += r.text;
        } else {
            EXPECT_EQ(r.slot, next_slot++);
            rebuilt += kImageToken;
        }
    }
    EXPECT_EQ(rebuilt, rec.user_turn().content);
    EXPECT_EQ(layout.front().kind, LayoutRun::Kind::text);
}

TEST(TokenLayout, ImageTotalIsSumOfCounts) {
    Rng rng = make_rng(21);
    for (int t = 0; t < 200; ++t) {
        PromptRequest req;
        req.instruction = "Move the objects.";
        for (std::size_t i = 0, n = uniform_int(rng, 1, 5); i < n; ++i) req.observations.push_back(i);
        for (std::size_t i = 0, n = uniform_int(rng, 0, 2); i < n; ++i) req.goals.push_back(i);
        req.mode = uniform01(rng) < 0.5 ? Placement::collection : Placement::interleaved;
        const auto rec = build_prompt(req);
        std::vector<std::size_t> counts;
        std::size_t sum = 0;
        for (std::size_t s = 0; s < rec.slots.size(); ++s) {
            counts.push_back(uniform_int(rng, 0, 300));
            sum += counts.back();
        }
        const auto layout = token_layout(rec, counts);
        ASSERT_EQ(image_token_total(layout), sum);
        if (req.mode == Placement::collection) {
            for (std::size_t s = 0; s < counts.size(); ++s) ASSERT_EQ(layout[s].kind, LayoutRun::Kind::image);
        }
    }
}

TEST(TokenLayout, CountMismatchIsIntegrityError) {
    const auto rec = build_prompt(basic_request(Placement::collection));
    EXPECT_EQ(error_code_of([&] { token_layout(rec, {1, 2}); }), Errc::integrity);
}

TEST(TextTokens, WhitespaceSplit) {
    EXPECT_EQ(text_token_estimate(""), 0u);
    EXPECT_EQ(text_token_estimate("  a  bb\n c "), 3u);
}

TEST(Dataset, RoundTrip) {
    const auto dir = testing::scratch_dir("dataset");
    std::vector<ConversationRecord> recs;
    auto req = basic_request(Placement::collection);
    recs.push_back(with_answer(build_prompt(req), make_answer({{0.5, 0.5, 0}})));
    req.mode = Placement::interleaved;
    req.history.push_back(make_answer({{0.1, 0.9, -45}}));
    req.instruction = "Quote \"this\" and a tab\t.";
    recs.push_back(build_prompt(req));
    write_dataset(recs, dir / "d.jsonl");
    EXPECT_EQ(read_dataset(dir / "d.jsonl"), recs);
}

TEST(Dataset, EmptyListGivesEmptyFile) {
    const auto dir = testing::scratch_dir("dataset_empty");
    write_dataset({}, dir / "e.jsonl");
    EXPECT_EQ(std::filesystem::file_size(dir / "e.jsonl"), 0u);
    EXPECT_TRUE(read_dataset(dir / "e.jsonl").empty());
}

TEST(Dataset, TruncatedLineReportsLineNumber) {
    const auto dir = testing::scratch_dir("dataset_trunc");
    const auto rec = build_prompt(basic_request(Placement::collection));
    write_dataset({rec, rec, rec}, dir / "t.jsonl");
    std::ifstream in(dir / "t.jsonl");
    std::string l1, l2;
    std::getline(in, l1);
    std::getline(in, l2);
    in.close();
    std::ofstream out(dir / "t.jsonl", std::ios::trunc);
    out << l1 << '\n' << l2 << '\n' << l2.substr(0, l2.size() / 2) << '\n';
    out.close();
    try {
        read_dataset(dir / "t.jsonl");
        FAIL() << "expected a parse error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::parse);
        EXPECT_NE(std::string(e.what()).find("t.jsonl:3:"), std::string::npos) << e.what();
    }
    EXPECT_EQ(error_code_of([&] { read_dataset(dir / "missing.jsonl"); }), Errc::io);
}

}  // namespace
}  // namespace moctk
