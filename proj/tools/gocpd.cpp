// gocpd: generate synthetic series, run the detector over CSV streams, score
// detections and benchmark the synthetic suite.

#include "gocpd/commands.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

namespace {

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("gocpd");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char *env = std::getenv("GOCPD_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off
        if (level == spdlog::level::off && std::string(env) != "off") {
            spdlog::warn("GOCPD_LOG='{}' is not a log level; using info", env);
        } else {
            spdlog::set_level(level);
        }
    }
}

} // namespace

int main(int argc, char **argv) {
    setup_logging();

    CLI::App app{"Greedy online change point detection"};
    app.require_subcommand(1);

    gocpd::GenerateOptions gen;
    std::uint64_t gen_seed = 0;
    auto *generate = app.add_subcommand("generate", "Write a synthetic series CSV and its truth JSON");
    generate->add_option("script", gen.script, "Generation script (JSON)")->required()->check(CLI::ExistingFile);
    generate->add_option("--out", gen.out, "Output directory")->required();
    auto *gen_seed_opt = generate->add_option("--seed", gen_seed, "Override the script seed");
    generate->add_option("--reps", gen.reps, "Repetitions with consecutive seeds (rep_N subdirectories)");

    gocpd::DetectOptions det;
    std::size_t det_batch = 1;
    auto *detect = app.add_subcommand("detect", "Replay a CSV stream through the detector");
    detect->add_option("data", det.data, "Series CSV")->required()->check(CLI::ExistingFile);
    detect->add_option("--config", det.config, "Detector config (JSON)")->required()->check(CLI::ExistingFile);
    detect->add_option("--out", det.out, "Output directory")->required();
    detect->add_option("--seed", det.seed, "Seed recorded in the artifacts");
    auto *det_batch_opt = detect->add_option("--batch", det_batch, "Override the configured batch size");
    detect->add_flag("--tune", det.tune, "Grid-search nu1, nu2, k_max on the train split first");
    detect->add_option("--truth", det.truth, "Truth JSON used by --tune")->check(CLI::ExistingFile);

    gocpd::ScoreOptions sc;
    auto *score = app.add_subcommand("score", "Score detections against ground truth");
    score->add_option("events", sc.events, "events.jsonl, or a directory of runs")->required()->check(CLI::ExistingPath);
    score->add_option("--truth", sc.truth, "Truth JSON (default: truth.json next to each run)")
        ->check(CLI::ExistingFile);
    score->add_option("--tolerance", sc.tolerance, "Matching tolerance in samples")->capture_default_str();
    score->add_option("--out", sc.out, "Directory for summary.json and summary.md");

    gocpd::BenchOptions bn;
    std::size_t bench_batch = 1;
    auto *bench = app.add_subcommand("bench", "Run the synthetic benchmark over several seeds");
    bench->add_option("--config", bn.config, "Detector config (JSON)")->required()->check(CLI::ExistingFile);
    bench->add_option("--target", bn.targets, "Series: lengthscale, output_scale, mean, noise_std")
        ->capture_default_str();
    bench->add_option("--reps", bn.reps, "Seeds per series")->capture_default_str();
    bench->add_option("--seed", bn.seed, "First seed")->capture_default_str();
    bench->add_option("--out", bn.out, "Output directory");
    bench->add_option("--tolerance", bn.tolerance, "Matching tolerance in samples")->capture_default_str();
    auto *bench_batch_opt = bench->add_option("--batch", bench_batch, "Override the configured batch size");

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) {
            if (*gen_seed_opt) {
                gen.seed = gen_seed;
            }
            gocpd::cmd_generate(gen);
        } else if (detect->parsed()) {
            if (*det_batch_opt) {
                det.batch = det_batch;
            }
            const auto r = gocpd::cmd_detect(det);
            for (const auto &e : r.events) {
                std::cout << "change at " << e.change_point << " (timestamp " << e.change_timestamp
                          << "), declared at " << e.declared_at << '\n';
            }
        } else if (score->parsed()) {
            gocpd::cmd_score(sc);
        } else if (bench->parsed()) {
            if (*bench_batch_opt) {
                bn.batch = bench_batch;
            }
            gocpd::cmd_bench(bn);
        }
    } catch (const std::exception &e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
