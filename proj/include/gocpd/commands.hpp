#pragma once

#include "gocpd/datagen.hpp"
#include "gocpd/detector.hpp"
#include "gocpd/errors.hpp"
#include "gocpd/eval.hpp"
#include "gocpd/factory.hpp"
#include "gocpd/io.hpp"
#include "gocpd/tuning.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace gocpd {

namespace fs = std::filesystem;

/// Contents of a detector config file: the detector itself plus the
/// preprocessing and tuning settings used by detect and bench.
struct RunSettings {
    DetectorConfig detector;
    bool standardize = false;
    TuningGrid grid;
};

inline TuningGrid tuning_grid_from_json(const Json &obj) {
    TuningGrid g;
    detail::get_optional(obj, "nu1", "tuning", g.nu1);
    detail::get_optional(obj, "nu2", "tuning", g.nu2);
    detail::get_optional(obj, "k_max", "tuning", g.k_max);
    detail::get_optional(obj, "train_fraction", "tuning", g.train_fraction);
    detail::get_optional(obj, "tolerance", "tuning", g.tolerance);
    detail::checked("tuning", [&] {
        g.validate();
        return 0;
    });
    return g;
}

inline Json to_json(const TuningGrid &g) {
    return Json{{"nu1", g.nu1},
                {"nu2", g.nu2},
                {"k_max", g.k_max},
                {"train_fraction", g.train_fraction},
                {"tolerance", g.tolerance}};
}

inline RunSettings run_settings_from_json(const Json &obj) {
    RunSettings s;
    s.detector = detector_config_from_json(obj);
    detail::get_optional(obj, "standardize", "", s.standardize);
    if (obj.contains("tuning")) {
        s.grid = tuning_grid_from_json(obj["tuning"]);
    }
    return s;
}

inline Json to_json(const RunSettings &s) {
    Json out = to_json(s.detector);
    out["standardize"] = s.standardize;
    out["tuning"] = to_json(s.grid);
    return out;
}

inline RunSettings load_run_settings(const std::string &path) {
    return run_settings_from_json(read_json_file(path));
}

inline Json to_json(const MatchReport &r) {
    Json pairs = Json::array();
    for (const auto &p : r.pairs) {
        pairs.push_back(Json{{"truth", p.truth}, {"detected", p.detected}, {"delay", p.delay}});
    }
    return Json{{"true_positives", r.true_positives},
                {"false_positives", r.false_positives},
                {"false_negatives", r.false_negatives},
                {"tolerance", r.tolerance},
                {"pairs", pairs}};
}

inline Json to_json(const Rates &r) {
    return Json{{"tpr", r.tpr}, {"ppv", r.ppv}, {"fdr", r.fdr}, {"tpr_vacuous", r.tpr_vacuous},
                {"ppv_vacuous", r.ppv_vacuous}};
}

// ---------------------------------------------------------------------------
// Output helpers

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
inline void write_file_atomic(const fs::path &path, const std::function<void(std::ostream &)> &fill) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write '" + tmp.string() + "'");
        }
        fill(out);
        out.flush();
        if (!out) {
            throw Error("write to '" + tmp.string() + "' failed");
        }
    }
    fs::rename(tmp, path);
}

inline void write_json_file(const fs::path &path, const Json &value) {
    write_file_atomic(path, [&](std::ostream &out) { out << value.dump(2) << '\n'; });
}

inline std::string fixed(double v, int digits = 2) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

inline std::vector<std::int64_t> change_points_of(const std::vector<DetectionEvent> &events) {
    std::vector<std::int64_t> out;
    out.reserve(events.size());
    for (const auto &e : events) {
        out.push_back(e.change_point);
    }
    return out;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
    std::string script;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t reps = 1;
};

struct GeneratedRun {
    fs::path directory;
    std::uint64_t seed = 0;
    Truth truth;
};

inline std::vector<GeneratedRun> cmd_generate(const GenerateOptions &opt) {
    if (opt.reps == 0) {
        throw InvalidArgument("--reps must be positive");
    }
    GenerationRequest req = generation_request_from_json(read_json_file(opt.script));
    if (opt.seed) {
        req.seed = *opt.seed;
    }
    std::vector<GeneratedRun> runs;
    for (std::size_t r = 0; r < opt.reps; ++r) {
        GenerationRequest rep = req;
        rep.seed = req.seed + r;
        rep.script.seed = rep.seed;
        const GeneratedSeries g = generate(rep);
        GeneratedRun run;
        run.directory = opt.reps == 1 ? fs::path(opt.out) : fs::path(opt.out) / ("rep_" + std::to_string(r + 1));
        run.seed = rep.seed;
        run.truth = Truth{rep.script.name, rep.seed, static_cast<std::int64_t>(g.series.size()), g.change_points};
        write_file_atomic(run.directory / "series.csv", [&](std::ostream &out) { write_csv(out, g.series); });
        write_json_file(run.directory / "truth.json", to_json(run.truth));
        spdlog::info("generated '{}' seed {}: {} points, {} changes -> {}", run.truth.name, run.seed,
                     run.truth.length, run.truth.change_points.size(), run.directory.string());
        runs.push_back(std::move(run));
    }
    return runs;
}

// ---------------------------------------------------------------------------
// detect

struct DetectOptions {
    std::string data;
    std::string config;
    std::string out;
    std::uint64_t seed = 0;
    std::optional<std::size_t> batch;
    bool tune = false;
    std::string truth;
};

struct DetectOutcome {
    DetectorConfig config;
    std::vector<DetectionEvent> events;
    std::vector<IterationRecord> log;
    std::optional<TuningResult> tuning;
    std::size_t warnings = 0;
};

inline void check_channels(const DetectorConfig &config, const TimeSeriesWindow &data) {
    const auto prior_channels = static_cast<std::size_t>(config.model.prior.mean.size());
    if (prior_channels != 1 && prior_channels != data.channel_count()) {
        throw SchemaError("model.prior.mean", "has " + std::to_string(prior_channels) +
                                                  " entries but the data has " +
                                                  std::to_string(data.channel_count()) + " output channels");
    }
}

inline Json to_json(const TuningResult &r) {
    Json trials = Json::array();
    for (const auto &t : r.trials) {
        trials.push_back(Json{{"nu1", t.nu1},
                              {"nu2", t.nu2},
                              {"k_max", t.k_max},
                              {"f1", t.objective},
                              {"rates", to_json(t.rates)},
                              {"detected", t.report.true_positives + t.report.false_positives}});
    }
    return Json{{"train_size", r.train_size},
                {"train_truth", r.train_truth},
                {"best", Json{{"nu1", r.best.nu1}, {"nu2", r.best.nu2}, {"k_max", r.best.k_max}}},
                {"trials", trials}};
}

/// Replays `data` through the detector, optionally tuning the thresholds
/// first on the train split against `truth`.
inline DetectOutcome detect_stream(const TimeSeriesWindow &data, const RunSettings &settings,
                                   std::span<const std::int64_t> truth, bool tune) {
    check_channels(settings.detector, data);
    const TimeSeriesWindow stream = settings.standardize ? standardize(data).window : data;
    DetectOutcome out;
    out.config = settings.detector;
    with_model(settings.detector.model, stream.channel_count(), [&](auto prototype) {
        if (tune) {
            out.tuning = tune_thresholds(stream, truth, settings.detector, prototype, settings.grid);
            out.config = out.tuning->best;
            spdlog::info("tuned on {} points: nu1={} nu2={} k_max={}", out.tuning->train_size, out.config.nu1,
                         out.config.nu2, out.config.k_max);
        }
        StreamResult run = run_stream(stream, out.config, prototype, [&](std::string_view msg) {
            ++out.warnings;
            spdlog::warn("{}", msg);
        });
        out.events = std::move(run.events);
        out.log = std::move(run.log);
    });
    return out;
}

inline void write_detection(const fs::path &dir, std::uint64_t seed, const std::string &data_label,
                            const DetectOutcome &r) {
    write_file_atomic(dir / "events.jsonl",
                      [&](std::ostream &out) { write_events(out, RunInfo{seed, data_label, r.config}, r.events); });
    write_file_atomic(dir / "instrumentation.jsonl",
                      [&](std::ostream &out) { write_instrumentation(out, seed, r.log); });
    write_file_atomic(dir / "plot.csv", [&](std::ostream &out) { write_plot_data(out, r.log); });
    if (r.tuning) {
        Json tuning = to_json(*r.tuning);
        tuning["seed"] = seed;
        write_json_file(dir / "tuning.json", tuning);
    }
}

inline DetectOutcome cmd_detect(const DetectOptions &opt) {
    RunSettings settings = load_run_settings(opt.config);
    if (opt.batch) {
        if (*opt.batch == 0) {
            throw InvalidArgument("--batch must be positive");
        }
        settings.detector.batch_size = *opt.batch;
    }
    const TimeSeriesWindow data = read_csv_file(opt.data);
    std::vector<std::int64_t> truth;
    if (opt.tune) {
        if (opt.truth.empty()) {
            throw InvalidArgument("--tune needs --truth");
        }
        const Truth t = truth_from_json(read_json_file(opt.truth));
        truth = scorable_truth(t.change_points);
    }
    check_channels(settings.detector, data);

    DetectOutcome r = detect_stream(data, settings, truth, opt.tune);
    write_detection(opt.out, opt.seed, opt.data, r);
    spdlog::info("{} points, {} changes, {} warnings -> {}", data.size(), r.events.size(), r.warnings, opt.out);
    return r;
}

// ---------------------------------------------------------------------------
// score

struct ScoreOptions {
    std::string events;
    std::string truth;
    std::int64_t tolerance = 25;
    std::string out;
};

struct ScoredRun {
    std::string name;
    std::uint64_t seed = 0;
    MatchReport report;
    Rates rates;
};

struct ScoreSummary {
    std::vector<ScoredRun> runs;
    MeanStd tpr;
    MeanStd ppv;
    MeanStd fdr;
    std::int64_t tolerance = 0;
};

inline ScoreSummary summarize(std::vector<ScoredRun> runs, std::int64_t tolerance) {
    ScoreSummary s;
    s.tolerance = tolerance;
    std::vector<double> tpr;
    std::vector<double> ppv;
    std::vector<double> fdr;
    for (const auto &r : runs) {
        tpr.push_back(r.rates.tpr);
        ppv.push_back(r.rates.ppv);
        fdr.push_back(r.rates.fdr);
    }
    s.tpr = mean_std(tpr);
    s.ppv = mean_std(ppv);
    s.fdr = mean_std(fdr);
    s.runs = std::move(runs);
    return s;
}

inline Json to_json(const ScoreSummary &s) {
    Json runs = Json::array();
    for (const auto &r : s.runs) {
        runs.push_back(Json{{"name", r.name}, {"seed", r.seed}, {"rates", to_json(r.rates)}, {"match", to_json(r.report)}});
    }
    auto ms = [](const MeanStd &m) { return Json{{"mean", m.mean}, {"std", m.std}}; };
    return Json{{"tolerance", s.tolerance}, {"runs", s.runs.size()}, {"tpr", ms(s.tpr)},
                {"ppv", ms(s.ppv)},         {"fdr", ms(s.fdr)},        {"per_run", runs}};
}

inline std::string score_table(const ScoreSummary &s) {
    std::ostringstream md;
    md << "| run | seed | TP | FP | FN | TPR | PPV | FDR |\n|---|---|---|---|---|---|---|---|\n";
    for (const auto &r : s.runs) {
        md << "| " << r.name << " | " << r.seed << " | " << r.report.true_positives << " | "
           << r.report.false_positives << " | " << r.report.false_negatives << " | " << fixed(r.rates.tpr)
           << (r.rates.tpr_vacuous ? "*" : "") << " | " << fixed(r.rates.ppv) << (r.rates.ppv_vacuous ? "*" : "")
           << " | " << fixed(r.rates.fdr) << " |\n";
    }
    md << "| mean | | | | | " << fixed(s.tpr.mean) << " | " << fixed(s.ppv.mean) << " | " << fixed(s.fdr.mean)
       << " |\n";
    bool vacuous = false;
    for (const auto &r : s.runs) {
        vacuous = vacuous || r.rates.tpr_vacuous || r.rates.ppv_vacuous;
    }
    if (vacuous) {
        md << "\n\\* vacuous: no true changes (TPR) or no detections (PPV); reported as 1.00.\n";
    }
    md << "\nTolerance: +-" << s.tolerance << " samples.\n";
    return md.str();
}

inline ScoredRun score_run(const fs::path &events_file, const fs::path &truth_file, std::int64_t tolerance,
                           std::string name) {
    std::ifstream in(events_file);
    if (!in) {
        throw ParseError("cannot open '" + events_file.string() + "'");
    }
    const EventLog log = read_events(in);
    const Truth truth = truth_from_json(read_json_file(truth_file.string()));
    ScoredRun run;
    run.name = std::move(name);
    run.seed = log.seed;
    run.report = match_detections(scorable_truth(truth.change_points), log.change_points, tolerance);
    run.rates = rates(run.report);
    return run;
}

/// `events` is an events file, or a directory whose run subdirectories each
/// hold events.jsonl (and optionally their own truth.json).
inline ScoreSummary cmd_score(const ScoreOptions &opt) {
    if (opt.tolerance < 0) {
        throw InvalidArgument("--tolerance must be non-negative");
    }
    std::vector<std::pair<fs::path, std::string>> files;
    const fs::path events(opt.events);
    if (fs::is_directory(events)) {
        if (fs::exists(events / "events.jsonl")) {
            files.emplace_back(events, events.filename().string());
        }
        std::vector<fs::path> subdirs;
        for (const auto &entry : fs::directory_iterator(events)) {
            if (entry.is_directory() && fs::exists(entry.path() / "events.jsonl")) {
                subdirs.push_back(entry.path());
            }
        }
        std::sort(subdirs.begin(), subdirs.end());
        for (const auto &d : subdirs) {
            files.emplace_back(d, d.filename().string());
        }
        if (files.empty()) {
            throw ParseError("no events.jsonl under '" + opt.events + "'");
        }
    } else {
        files.emplace_back(events, events.stem().string());
    }

    std::vector<ScoredRun> runs;
    for (const auto &[path, name] : files) {
        const bool dir = fs::is_directory(path);
        const fs::path events_file = dir ? path / "events.jsonl" : path;
        fs::path truth_file = opt.truth;
        if (dir && fs::exists(path / "truth.json")) {
            truth_file = path / "truth.json";
        }
        if (truth_file.empty()) {
            throw InvalidArgument("no truth for '" + events_file.string() + "': pass --truth");
        }
        runs.push_back(score_run(events_file, truth_file, opt.tolerance, name));
    }
    ScoreSummary summary = summarize(std::move(runs), opt.tolerance);
    const std::string table = score_table(summary);
    if (!opt.out.empty()) {
        write_json_file(fs::path(opt.out) / "summary.json", to_json(summary));
        write_file_atomic(fs::path(opt.out) / "summary.md", [&](std::ostream &out) { out << table; });
    }
    std::cout << table;
    return summary;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOptions {
    std::string config;
    std::vector<std::string> targets{"lengthscale", "mean", "noise_std"};
    std::size_t reps = 5;
    std::uint64_t seed = 1;
    std::string out;
    std::int64_t tolerance = 25;
    std::optional<std::size_t> batch;
};

struct BenchRun {
    std::uint64_t seed = 0;
    std::vector<std::int64_t> truth;
    std::vector<DetectionEvent> events;
    MatchReport report;
    Rates rates;
    InstrumentationSummary instrumentation;
    double seconds = 0.0;
};

struct BenchSeries {
    RegimeTarget target = RegimeTarget::Mean;
    std::string name;
    std::vector<BenchRun> runs;
    MeanStd tpr;
    MeanStd ppv;
    MeanStd interval;
    MeanStd effective;
    MeanStd evaluations;
    double seconds = 0.0;
};

/// Regenerates one benchmark script for seeds seed, seed+1, ... and runs the
/// detector on each. Artifacts go to out/<series>/seed_<s>/ when out is set.
inline BenchSeries bench_series(RegimeTarget target, const RunSettings &settings, std::size_t reps,
                                std::uint64_t seed, std::int64_t tolerance, const std::string &out = {}) {
    BenchSeries s;
    s.target = target;
    s.name = benchmark_script(target, seed).name;
    std::vector<double> tpr;
    std::vector<double> ppv;
    std::vector<double> interval;
    std::vector<double> effective;
    std::vector<double> evals;
    for (std::size_t r = 0; r < reps; ++r) {
        BenchRun run;
        run.seed = seed + r;
        const GeneratedSeries g = sample_piecewise_gp(benchmark_script(target, run.seed));
        run.truth = scorable_truth(g.change_points);
        const auto start = std::chrono::steady_clock::now();
        DetectOutcome d = detect_stream(g.series, settings, {}, false);
        run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        run.events = d.events;
        run.report = match_detections(run.truth, change_points_of(d.events), tolerance);
        run.rates = rates(run.report);
        run.instrumentation = aggregate_instrumentation(d.log, g.series.size());
        if (!out.empty()) {
            const fs::path dir = fs::path(out) / s.name / ("seed_" + std::to_string(run.seed));
            write_file_atomic(dir / "series.csv", [&](std::ostream &o) { write_csv(o, g.series); });
            write_json_file(dir / "truth.json",
                            to_json(Truth{s.name, run.seed, static_cast<std::int64_t>(g.series.size()), run.truth}));
            write_detection(dir, run.seed, s.name, d);
        }
        spdlog::info("{} seed {}: TPR {:.2f} PPV {:.2f} ({} events, {:.1f} s)", s.name, run.seed, run.rates.tpr,
                     run.rates.ppv, run.events.size(), run.seconds);
        tpr.push_back(run.rates.tpr);
        ppv.push_back(run.rates.ppv);
        interval.push_back(run.instrumentation.interval_size.mean);
        effective.push_back(run.instrumentation.effective_size.mean);
        evals.push_back(run.instrumentation.evaluations.mean);
        s.seconds += run.seconds;
        s.runs.push_back(std::move(run));
    }
    s.tpr = mean_std(tpr);
    s.ppv = mean_std(ppv);
    s.interval = mean_std(interval);
    s.effective = mean_std(effective);
    s.evaluations = mean_std(evals);
    return s;
}

inline Json to_json(const BenchSeries &s) {
    auto ms = [](const MeanStd &m) { return Json{{"mean", m.mean}, {"std", m.std}}; };
    Json runs = Json::array();
    for (const auto &r : s.runs) {
        runs.push_back(Json{{"seed", r.seed},
                            {"detected", change_points_of(r.events)},
                            {"rates", to_json(r.rates)},
                            {"match", to_json(r.report)},
                            {"instrumentation", to_json(r.instrumentation)},
                            {"seconds", r.seconds}});
    }
    return Json{{"series", s.name},       {"target", std::string(to_string(s.target))},
                {"tpr", ms(s.tpr)},       {"ppv", ms(s.ppv)},
                {"interval_size", ms(s.interval)}, {"effective_size", ms(s.effective)},
                {"evaluations", ms(s.evaluations)}, {"seconds", s.seconds},
                {"runs", runs}};
}

inline std::string bench_table(const std::vector<BenchSeries> &all) {
    std::ostringstream md;
    md << "| series | runs | TPR | PPV | interval | effective | evaluations | seconds |\n"
          "|---|---|---|---|---|---|---|---|\n";
    for (const auto &s : all) {
        md << "| " << s.name << " | " << s.runs.size() << " | " << fixed(s.tpr.mean) << " +- " << fixed(s.tpr.std)
           << " | " << fixed(s.ppv.mean) << " +- " << fixed(s.ppv.std) << " | " << fixed(s.interval.mean, 0)
           << " | " << fixed(s.effective.mean, 0) << " | " << fixed(s.evaluations.mean, 1) << " | "
           << fixed(s.seconds, 1) << " |\n";
    }
    return md.str();
}

inline std::vector<BenchSeries> cmd_bench(const BenchOptions &opt) {
    if (opt.reps == 0) {
        throw InvalidArgument("--reps must be positive");
    }
    RunSettings settings = load_run_settings(opt.config);
    if (opt.batch) {
        settings.detector.batch_size = *opt.batch;
    }
    std::vector<RegimeTarget> targets;
    for (const auto &name : opt.targets) {
        targets.push_back(target_from_string(name));
    }
    std::vector<BenchSeries> all;
    for (const auto target : targets) {
        all.push_back(bench_series(target, settings, opt.reps, opt.seed, opt.tolerance, opt.out));
    }
    const std::string table = bench_table(all);
    if (!opt.out.empty()) {
        Json series = Json::array();
        for (const auto &s : all) {
            series.push_back(to_json(s));
        }
        write_json_file(fs::path(opt.out) / "bench.json",
                        Json{{"config", to_json(settings)}, {"seed", opt.seed}, {"reps", opt.reps},
                             {"tolerance", opt.tolerance}, {"series", series}});
        write_file_atomic(fs::path(opt.out) / "bench.md", [&](std::ostream &out) { out << table; });
    }
    std::cout << table;
    return all;
}

} // namespace gocpd
