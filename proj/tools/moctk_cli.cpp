// Copyright (C) 2026 The moctk Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "moctk/moctk.hpp"

namespace {

using moctk::bench::RunConfig;

int run(CLI::App& app, RunConfig& cfg, std::string& norm, std::string& calibration_out) {
    using namespace moctk;
    cfg.norm = parse_norm(norm);
    if (app.got_subcommand("compress")) {
        bench::cmd_compress(cfg, std::cout);
        return bench::kExitOk;
    }
    if (app.got_subcommand("sim")) {
        bench::emit_csv(bench::cmd_sim(cfg), cfg.out, std::cout);
        return bench::kExitOk;
    }
    if (app.got_subcommand("bench")) {
        bench::emit_csv(bench::cmd_bench(cfg), cfg.out, std::cout);
        return bench::kExitOk;
    }
    if (app.got_subcommand("eval")) {
        bench::emit_csv(bench::cmd_eval(cfg), cfg.out, std::cout);
        return bench::kExitOk;
    }
    if (app.got_subcommand("gradcheck")) {
        const auto outcome = bench::cmd_gradcheck(cfg);
        if (cfg.out.empty()) {
            std::cout << outcome.report.dump(2) << '\n';
        } else {
            std::ofstream(cfg.out) << outcome.report.dump(2) << '\n';
        }
        if (!outcome.passed) {
            for (const auto& s : outcome.report["seeds"]) {
                if (!s["passed"].get<bool>()) {
                    std::cerr << "seed " << s["seed"] << " failed: worst " << s["worst"]["tensor"].get<std::string>()
                              << "[" << s["worst"]["row"] << "][" << s["worst"]["col"]
                              << "] rel_error=" << s["worst"]["rel_error"] << '\n';
                }
            }
            return bench::kExitVerification;
        }
        return bench::kExitOk;
    }
    if (app.got_subcommand("calibrate")) {
        const auto map = fit(sim::camera_correspondences());
        if (calibration_out.empty()) {
            std::cout << to_json(map).dump(2) << '\n';
        } else {
            std::ofstream out(calibration_out);
            if (!out) throw Error(Errc::io, "cannot open " + calibration_out + " for writing");
            out << to_json(map).dump(2) << '\n';
        }
        return bench::kExitOk;
    }
    std::cerr << app.help();
    return bench::kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-observation token compression toolkit"};
    app.require_subcommand(1);
    RunConfig cfg;
    std::string norm = "linf";
    std::string calibration_out;

    auto* compress = app.add_subcommand("compress", "Compress an FSQ frame sequence into run-length tokens");
    compress->add_option("--input", cfg.input, "FSQ file")->required();
    compress->add_option("--epsilon", cfg.epsilon, "Static-patch threshold")->check(CLI::NonNegativeNumber);
    compress->add_option("--patch", cfg.patch, "Patch size in pixels")->check(CLI::PositiveNumber);
    compress->add_option("--norm", norm, "Patch difference norm")->check(CLI::IsMember({"linf", "l2mean"}));
    compress->add_option("--out", cfg.out, "Token JSON output");

    const std::vector<std::string> tasks{"all", "rearrange", "reasoning", "constraint"};

    auto* bench = app.add_subcommand("bench", "Encoder forward time on full vs compressed prompts");
    bench->add_option("--episodes", cfg.episodes, "Episodes per task kind");
    bench->add_option("--seed", cfg.seed, "First episode seed");
    bench->add_option("--repeats", cfg.repeats, "Timed forwards per stream")->check(CLI::PositiveNumber);
    bench->add_option("--task", cfg.task, "Task kind or all")->check(CLI::IsMember(tasks));
    bench->add_option("--noise", cfg.noise, "Detection noise level")->check(CLI::NonNegativeNumber);
    bench->add_option("--width", cfg.model_width, "Encoder width")->check(CLI::PositiveNumber);
    bench->add_option("--blocks", cfg.blocks, "Encoder blocks")->check(CLI::PositiveNumber);
    bench->add_option("--out", cfg.out, "CSV output (stdout if omitted)");

    auto* simc = app.add_subcommand("sim", "Success rates of oracle episodes per task kind");
    simc->add_option("--task", cfg.task, "Task kind or all")->check(CLI::IsMember(tasks));
    simc->add_option("--episodes", cfg.episodes, "Episodes per task kind");
    simc->add_option("--noise", cfg.noise, "Detection noise level")->check(CLI::NonNegativeNumber);
    simc->add_option("--seed", cfg.seed, "First episode seed");
    simc->add_option("--max-steps", cfg.max_steps, "Step budget per episode")->check(CLI::PositiveNumber);
    simc->add_option("--epsilon", cfg.epsilon, "Static-patch threshold")->check(CLI::NonNegativeNumber);
    simc->add_option("--workers", cfg.workers, "Worker threads (0: all cores)");
    simc->add_option("--out", cfg.out, "CSV output (stdout if omitted)");

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of encoder gradients");
    grad->add_option("--tol", cfg.tol, "Maximum relative error")->check(CLI::NonNegativeNumber);
    grad->add_option("--seeds", cfg.seeds, "Random instances")->check(CLI::PositiveNumber);
    grad->add_option("--seed", cfg.seed, "First instance seed");
    grad->add_flag("--corrupt", cfg.corrupt, "Perturb one analytic gradient (self-test)");
    grad->add_option("--out", cfg.out, "JSON report (stdout if omitted)");

    auto* eval = app.add_subcommand("eval", "Token reduction of a stored episode");
    eval->add_option("--episode", cfg.input, "Episode JSON written by the library")->required();
    eval->add_option("--epsilon", cfg.epsilon, "Static-patch threshold")->check(CLI::NonNegativeNumber);
    eval->add_option("--patch", cfg.patch, "Patch size in pixels")->check(CLI::PositiveNumber);
    eval->add_option("--out", cfg.out, "CSV output (stdout if omitted)");

    auto* calib = app.add_subcommand("calibrate", "Fit the camera-to-workspace map and write it as JSON");
    calib->add_option("--out", calibration_out, "JSON output (stdout if omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return moctk::bench::kExitUsage;
    }

    try {
        return run(app, cfg, norm, calibration_out);
    } catch (const moctk::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return moctk::bench::exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return moctk::bench::kExitIo;
    }
}
