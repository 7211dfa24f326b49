// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "moctk/error.hpp"
#include "moctk/frame_store.hpp"
#include "moctk/moc.hpp"
#include "moctk/prompt_engine.hpp"
#include "moctk/tabletop_sim.hpp"
#include "moctk/token_encoder.hpp"

namespace moctk::bench {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitIo = 2,
    kExitVerification = 3,
};

inline int exit_code_for(Errc code) {
    switch (code) {
    case Errc::parameter: return kExitUsage;
    case Errc::io:
    case Errc::bad_magic:
    case Errc::truncated:
    case Errc::value_range:
    case Errc::dimension:
    case Errc::parse: return kExitIo;
    default: return kExitVerification;
    }
}

struct RunConfig {
    std::string input;
    std::string out;
    std::string task = "all";
    double epsilon = kDefaultEpsilon;
    Norm norm = Norm::linf;
    std::size_t patch = 16;
    std::uint64_t seed = 0;
    std::size_t episodes = 10;
    double noise = 0.0;
    std::size_t max_steps = 20;
    std::size_t repeats = 11;
    std::size_t model_width = 64;
    std::size_t blocks = 2;
    double tol = 1e-4;
    std::size_t seeds = 20;
    bool corrupt = false;
    std::size_t workers = 0;
};

struct ReportRow {
    std::string task;
    std::size_t episodes = 0;
    std::optional<double> success_rate;
    std::optional<double> mean_steps;
    std::optional<double> token_reduction;
    std::optional<double> t_full_ms;
    std::optional<double> t_comp_ms;
    std::optional<double> speedup;
};

struct Report {
    std::vector<ReportRow> rows;
};

inline constexpr std::string_view kCsvHeader =
    "task,episodes,success_rate,mean_steps,token_reduction,t_full_ms,t_comp_ms,speedup";

namespace detail {

inline std::string fixed(std::optional<double> v, int digits) {
    if (!v) return {};
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), *v, std::chars_format::fixed, digits);
    return std::string(buf, res.ptr);
}

}  // namespace detail

/// Empty cells mark columns a subcommand does not measure.
inline void write_csv(const Report& report, std::ostream& os) {
    os << kCsvHeader << '\n';
    for (const auto& r : report.rows) {
        os << r.task << ',' << r.episodes << ',' << detail::fixed(r.success_rate, 4) << ','
           << detail::fixed(r.mean_steps, 3) << ',' << detail::fixed(r.token_reduction, 4) << ','
           << detail::fixed(r.t_full_ms, 4) << ',' << detail::fixed(r.t_comp_ms, 4) << ','
           << detail::fixed(r.speedup, 3) << '\n';
    }
}

inline void emit_csv(const Report& report, const std::string& path, std::ostream& fallback) {
    if (path.empty()) {
        write_csv(report, fallback);
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw Error(Errc::io, "cannot open " + path + " for writing");
    }
    write_csv(report, out);
}

inline std::vector<sim::TaskKind> tasks_for(const std::string& task) {
    if (task == "all") return {sim::kAllTasks.begin(), sim::kAllTasks.end()};
    return {sim::parse_task(task)};
}

/// FSQ -> patches -> compress -> stats; writes the token JSON to cfg.out.
inline ReportRow cmd_compress(const RunConfig& cfg, std::ostream& log) {
    const FrameSequence seq = load_fsq(cfg.input);
    const CompressedTokens ct = compress(to_patches(seq, cfg.patch), cfg.epsilon, cfg.norm);
    const CompressionStats st = stats(ct);
    if (!cfg.out.empty()) {
        std::ofstream out(cfg.out, std::ios::trunc);
        if (!out) {
            throw Error(Errc::io, "cannot open " + cfg.out + " for writing");
        }
        out << to_json(ct).dump() << '\n';
    }
    log << "original_tokens=" << st.original_tokens << " kept_tokens=" << st.kept_tokens
        << " reduction=" << detail::fixed(st.reduction_fraction, 3) << '\n';
    ReportRow row;
    row.task = "compress";
    row.episodes = 1;
    row.token_reduction = st.reduction_fraction;
    return row;
}

/// Success-rate table per task kind at one noise level.
inline Report cmd_sim(const RunConfig& cfg) {
    Report report;
    for (sim::TaskKind kind : tasks_for(cfg.task)) {
        sim::BatchConfig bc;
        bc.kind = kind;
        bc.first_seed = cfg.seed;
        bc.episodes = cfg.episodes;
        bc.noise = cfg.noise;
        bc.max_steps = cfg.max_steps;
        bc.epsilon = cfg.epsilon;
        bc.norm = cfg.norm;
        bc.patch = cfg.patch;
        bc.workers = cfg.workers;
        const auto rows = sim::run_batch(bc);
        if (rows.empty()) continue;
        double ok = 0, steps = 0, red = 0;
        for (const auto& s : rows) {
            ok += s.success ? 1.0 : 0.0;
            steps += static_cast<double>(s.steps);
            red += s.token_reduction;
        }
        const double n = static_cast<double>(rows.size());
        report.rows.push_back({std::string(sim::to_string(kind)), rows.size(), ok / n, steps / n, red / n, {}, {}, {}});
    }
    return report;
}

/// Image-token counts of one episode prompt, uncompressed and compressed.
/// The compressed stream runs MOC over observations followed by the goal
/// image, so each slot keeps the tokens whose run starts in its frame.
struct PromptTokenCounts {
    TokenLayout full;
    TokenLayout compressed;
    std::size_t max_run = 1;
};

inline PromptTokenCounts prompt_token_counts(const sim::EpisodeResult& ep, const ConversationRecord& rec,
                                             const RunConfig& cfg) {
    FrameSequence seq = ep.frames;
    const std::size_t obs = seq.frames();
    seq.append_frame(ep.goal_frames.height(), ep.goal_frames.width(), ep.goal_frames.channels(),
                     ep.goal_frames.frame(0));
    const auto ct = compress(to_patches(seq, cfg.patch), cfg.epsilon, cfg.norm);
    const auto per_frame = tokens_per_frame(ct);
    const std::size_t cells = ct.dims.cells();
    std::vector<std::size_t> full_counts, comp_counts;
    for (const auto& slot : rec.slots) {
        const std::size_t frame = slot.kind == SlotKind::obs ? slot.frame : obs + slot.frame;
        full_counts.push_back(cells);
        comp_counts.push_back(per_frame.at(frame));
    }
    PromptTokenCounts out{token_layout(rec, full_counts), token_layout(rec, comp_counts), 1};
    for (const auto& m : ct.meta) out.max_run = std::max<std::size_t>(out.max_run, m.run);
    return out;
}

/// Encoder forward time on full vs compressed prompt streams, per task kind
/// and placement mode.
inline Report cmd_bench(const RunConfig& cfg) {
    Report report;
    if (cfg.episodes == 0) return report;
    const std::size_t cells = (64 / cfg.patch) * (64 / cfg.patch);
    const EncoderParams params =
        init_params(cfg.model_width, cfg.max_steps + 2, cells, cfg.patch * cfg.patch * 3, cfg.blocks, cfg.seed);
    for (sim::TaskKind kind : tasks_for(cfg.task)) {
        for (Placement mode : {Placement::collection, Placement::interleaved}) {
            sim::EpisodeOptions opts;
            opts.mode = mode;
            double ok = 0, steps = 0, red = 0, tf = 0, tc = 0;
            for (std::size_t i = 0; i < cfg.episodes; ++i) {
                const auto ep = sim::run_episode(kind, cfg.seed + i, cfg.noise, cfg.max_steps, opts);
                ok += ep.success ? 1.0 : 0.0;
                steps += static_cast<double>(ep.steps);
                red += sim::summarize(ep, cfg.epsilon, cfg.norm, cfg.patch).token_reduction;
                if (ep.records.empty()) continue;
                const auto counts = prompt_token_counts(ep, ep.records.back(), cfg);
                const std::size_t text = text_token_total(counts.full);
                const std::size_t k_full = text + image_token_total(counts.full);
                const std::size_t k_comp = text + image_token_total(counts.compressed);
                const auto t = bench_forward(params, k_full, k_comp, cfg.repeats, cfg.seed + i);
                tf += t.median_full_ms;
                tc += t.median_compressed_ms;
            }
            const double n = static_cast<double>(cfg.episodes);
            ReportRow row{std::string(sim::to_string(kind)) + "/" + std::string(to_string(mode)),
                          cfg.episodes, ok / n, steps / n, red / n, tf / n, tc / n, {}};
            row.speedup = tc > 0.0 ? tf / tc : 0.0;
            report.rows.push_back(row);
        }
    }
    return report;
}

struct GradcheckOutcome {
    bool passed = true;
    nlohmann::json report;
};

/// Finite-difference gradient check over `cfg.seeds` random instances.
/// cfg.corrupt perturbs the analytic gradient of the first instance.
inline GradcheckOutcome cmd_gradcheck(const RunConfig& cfg) {
    GradcheckOutcome out;
    nlohmann::json seeds = nlohmann::json::array();
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
        const auto inst = make_gradcheck_instance(cfg.seed + s);
        GradCheckOptions opts;
        opts.corrupt = cfg.corrupt && s == 0;
        const GradReport r = grad_check(inst.params, inst.tokens, cfg.tol, opts);
        out.passed = out.passed && r.passed;
        nlohmann::json j = to_json(r);
        j["seed"] = cfg.seed + s;
        seeds.push_back(std::move(j));
    }
    out.report = {{"passed", out.passed}, {"tol", cfg.tol}, {"seeds", std::move(seeds)}};
    return out;
}

/// Token reduction of a stored episode (JSON + FSQ sidecar).
inline Report cmd_eval(const RunConfig& cfg) {
    const auto ep = sim::read_episode(cfg.input);
    Report report;
    report.rows.push_back({std::string(sim::to_string(ep.kind)), 1, ep.success ? 1.0 : 0.0,
                           static_cast<double>(ep.steps),
                           sim::summarize(ep, cfg.epsilon, cfg.norm, cfg.patch).token_reduction, {}, {}, {}});
    return report;
}

}  // namespace moctk::bench
