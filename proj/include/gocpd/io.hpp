#pragma once

#include "gocpd/datagen.hpp"
#include "gocpd/detector.hpp"
#include "gocpd/errors.hpp"
#include "gocpd/eval.hpp"
#include "gocpd/window.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace gocpd {

using Json = nlohmann::ordered_json;

/// Shortest decimal text that reads back to the same double.
inline std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        std::string_view field = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
        while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) {
            field.remove_prefix(1);
        }
        while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
            field.remove_suffix(1);
        }
        out.push_back(field);
        if (comma == std::string_view::npos) {
            return out;
        }
        pos = comma + 1;
    }
}

template <class T>
T parse_number(std::string_view text, std::size_t line, std::string_view column) {
    T value{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ParseError("column '" + std::string(column) + "': cannot parse '" + std::string(text) + "'", line);
    }
    return value;
}

} // namespace detail

// ---------------------------------------------------------------------------
// CSV series: header t,x0..x{D-1},y0..y{C-1}

inline void write_csv(std::ostream &out, const TimeSeriesWindow &window) {
    out << 't';
    for (std::size_t d = 0; d < window.input_dim(); ++d) {
        out << ",x" << d;
    }
    for (std::size_t c = 0; c < window.channel_count(); ++c) {
        out << ",y" << c;
    }
    out << '\n';
    for (std::size_t i = 0; i < window.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        out << window.timestamp(i);
        for (Eigen::Index d = 0; d < window.inputs().cols(); ++d) {
            out << ',' << format_double(window.inputs()(row, d));
        }
        for (Eigen::Index c = 0; c < window.outputs().cols(); ++c) {
            out << ',' << format_double(window.outputs()(row, c));
        }
        out << '\n';
    }
}

inline TimeSeriesWindow read_csv(std::istream &in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        for (const auto f : detail::split_fields(line)) {
            header.emplace_back(f);
        }
        break;
    }
    if (header.empty()) {
        throw ParseError("empty CSV file");
    }
    if (header.front() != "t") {
        throw ParseError("first column must be 't', got '" + header.front() + "'", line_no);
    }
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    for (std::size_t i = 1; i < header.size(); ++i) {
        const std::string &name = header[i];
        const bool is_x = !name.empty() && name[0] == 'x';
        const bool is_y = !name.empty() && name[0] == 'y';
        if (is_x && outputs == 0 && name == "x" + std::to_string(inputs)) {
            ++inputs;
        } else if (is_y && name == "y" + std::to_string(outputs)) {
            ++outputs;
        } else {
            throw ParseError("unexpected column '" + name + "'; expected t,x0..,y0..", line_no);
        }
    }
    if (outputs == 0) {
        throw ParseError("no output columns y0..", line_no);
    }

    std::vector<std::int64_t> ts;
    std::vector<double> xs;
    std::vector<double> ys;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto fields = detail::split_fields(line);
        if (fields.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        const auto t = detail::parse_number<std::int64_t>(fields[0], line_no, "t");
        if (!ts.empty() && t <= ts.back()) {
            throw ParseError("timestamps must be strictly increasing", line_no);
        }
        ts.push_back(t);
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const double v = detail::parse_number<double>(fields[i], line_no, header[i]);
            (i <= inputs ? xs : ys).push_back(v);
        }
    }
    if (ts.empty()) {
        throw ParseError("CSV file has no data rows", line_no);
    }
    const auto n = static_cast<Eigen::Index>(ts.size());
    Eigen::MatrixXd x(n, static_cast<Eigen::Index>(inputs == 0 ? 1 : inputs));
    Eigen::MatrixXd y(n, static_cast<Eigen::Index>(outputs));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = static_cast<std::size_t>(i);
        if (inputs == 0) {
            x(i, 0) = static_cast<double>(ts[row]);
        }
        for (std::size_t d = 0; d < inputs; ++d) {
            x(i, static_cast<Eigen::Index>(d)) = xs[row * inputs + d];
        }
        for (std::size_t c = 0; c < outputs; ++c) {
            y(i, static_cast<Eigen::Index>(c)) = ys[row * outputs + c];
        }
    }
    return TimeSeriesWindow(std::move(ts), std::move(x), std::move(y));
}

// ---------------------------------------------------------------------------
// JSON helpers

namespace detail {

inline std::string join_path(std::string_view prefix, std::string_view key) {
    return prefix.empty() ? std::string(key) : std::string(prefix) + "." + std::string(key);
}

inline const Json &require(const Json &obj, std::string_view key, std::string_view prefix) {
    if (!obj.is_object()) {
        throw SchemaError(std::string(prefix.empty() ? "<root>" : prefix), "expected an object");
    }
    const auto it = obj.find(std::string(key));
    if (it == obj.end()) {
        throw SchemaError(join_path(prefix, key), "required field is missing");
    }
    return *it;
}

template <class T>
T as(const Json &value, const std::string &field) {
    try {
        if constexpr (std::is_same_v<T, double>) {
            if (!value.is_number()) {
                throw SchemaError(field, "expected a number");
            }
        } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!value.is_number_integer()) {
                throw SchemaError(field, "expected an integer");
            }
            if constexpr (std::is_unsigned_v<T>) {
                if (value.get<std::int64_t>() < 0) {
                    throw SchemaError(field, "must not be negative");
                }
            }
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!value.is_boolean()) {
                throw SchemaError(field, "expected true or false");
            }
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!value.is_string()) {
                throw SchemaError(field, "expected a string");
            }
        }
        return value.get<T>();
    } catch (const nlohmann::json::exception &e) {
        throw SchemaError(field, e.what());
    }
}

template <class T>
T get(const Json &obj, std::string_view key, std::string_view prefix) {
    return as<T>(require(obj, key, prefix), join_path(prefix, key));
}

template <class T>
void get_optional(const Json &obj, std::string_view key, std::string_view prefix, T &target) {
    if (obj.is_object()) {
        if (const auto it = obj.find(std::string(key)); it != obj.end()) {
            target = as<T>(*it, join_path(prefix, key));
        }
    }
}

template <class Fn>
auto checked(const std::string &field, Fn &&fn) {
    try {
        return fn();
    } catch (const InvalidArgument &e) {
        throw SchemaError(field, e.what());
    }
}

inline Eigen::VectorXd read_vector(const Json &value, const std::string &field) {
    if (value.is_number()) {
        return Eigen::VectorXd::Constant(1, value.get<double>());
    }
    if (!value.is_array() || value.empty()) {
        throw SchemaError(field, "expected a number or a non-empty array of numbers");
    }
    Eigen::VectorXd out(static_cast<Eigen::Index>(value.size()));
    for (std::size_t i = 0; i < value.size(); ++i) {
        out(static_cast<Eigen::Index>(i)) = as<double>(value[i], field + "[" + std::to_string(i) + "]");
    }
    return out;
}

inline Json write_vector(const Eigen::VectorXd &v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out.push_back(v(i));
    }
    return out;
}

} // namespace detail

inline Json to_json(const ModelParams &p) {
    return Json{{"kernel", std::string(to_string(p.kernel))},
                {"lengthscale", p.lengthscale},
                {"output_scale", p.output_scale},
                {"noise_std", p.noise_std},
                {"mean", detail::write_vector(p.mean)}};
}

/// Fields missing from `obj` keep the values of `defaults`.
inline ModelParams model_params_from_json(const Json &obj, const std::string &prefix, ModelParams defaults = {}) {
    ModelParams p = std::move(defaults);
    std::string kernel(to_string(p.kernel));
    detail::get_optional(obj, "kernel", prefix, kernel);
    p.kernel = detail::checked(detail::join_path(prefix, "kernel"), [&] { return kernel_from_string(kernel); });
    detail::get_optional(obj, "lengthscale", prefix, p.lengthscale);
    detail::get_optional(obj, "output_scale", prefix, p.output_scale);
    detail::get_optional(obj, "noise_std", prefix, p.noise_std);
    if (obj.is_object() && obj.contains("mean")) {
        p.mean = detail::read_vector(obj["mean"], detail::join_path(prefix, "mean"));
    }
    detail::checked(prefix, [&] {
        p.validate();
        return 0;
    });
    return p;
}

inline Json to_json(const FitOptions &f) {
    return Json{{"min_fit_points", f.min_fit_points},
                {"max_iterations", f.max_iterations},
                {"gradient_tolerance", f.gradient_tolerance},
                {"min_noise_std", f.min_noise_std},
                {"max_noise_std", f.max_noise_std},
                {"min_lengthscale", f.min_lengthscale},
                {"max_lengthscale", f.max_lengthscale},
                {"min_output_scale", f.min_output_scale},
                {"max_output_scale", f.max_output_scale},
                {"restart_from_prior", f.restart_from_prior}};
}

inline FitOptions fit_options_from_json(const Json &obj, const std::string &prefix) {
    FitOptions f;
    detail::get_optional(obj, "min_fit_points", prefix, f.min_fit_points);
    detail::get_optional(obj, "max_iterations", prefix, f.max_iterations);
    detail::get_optional(obj, "gradient_tolerance", prefix, f.gradient_tolerance);
    detail::get_optional(obj, "min_noise_std", prefix, f.min_noise_std);
    detail::get_optional(obj, "max_noise_std", prefix, f.max_noise_std);
    detail::get_optional(obj, "min_lengthscale", prefix, f.min_lengthscale);
    detail::get_optional(obj, "max_lengthscale", prefix, f.max_lengthscale);
    detail::get_optional(obj, "min_output_scale", prefix, f.min_output_scale);
    detail::get_optional(obj, "max_output_scale", prefix, f.max_output_scale);
    detail::get_optional(obj, "restart_from_prior", prefix, f.restart_from_prior);
    return f;
}

inline Json to_json(const ModelSpec &m) {
    return Json{{"family", std::string(to_string(m.family))},
                {"prior", to_json(m.prior)},
                {"fit", to_json(m.fit)},
                {"fixed_variance", m.fixed_variance}};
}

inline ModelSpec model_spec_from_json(const Json &obj, const std::string &prefix) {
    ModelSpec m;
    const auto family = detail::get<std::string>(obj, "family", prefix);
    m.family = detail::checked(detail::join_path(prefix, "family"), [&] { return family_from_string(family); });
    if (obj.contains("prior")) {
        m.prior = model_params_from_json(obj["prior"], detail::join_path(prefix, "prior"), m.prior);
    }
    if (obj.contains("fit")) {
        m.fit = fit_options_from_json(obj["fit"], detail::join_path(prefix, "fit"));
    }
    detail::get_optional(obj, "fixed_variance", prefix, m.fixed_variance);
    return m;
}

inline Json to_json(const DetectorConfig &c) {
    return Json{{"nu1", c.nu1},
                {"nu2", c.nu2},
                {"k_max", c.k_max},
                {"t_ini", c.t_ini},
                {"wait", c.wait},
                {"search_tolerance", c.search_tolerance},
                {"batch_size", c.batch_size},
                {"freeze_on_move", c.freeze_on_move},
                {"model", to_json(c.model)}};
}

/// nu1, nu2, k_max, t_ini and model.family are required; everything else
/// falls back to the DetectorConfig defaults.
inline DetectorConfig detector_config_from_json(const Json &obj) {
    DetectorConfig c;
    c.nu1 = detail::get<double>(obj, "nu1", "");
    c.nu2 = detail::get<double>(obj, "nu2", "");
    c.k_max = detail::get<std::size_t>(obj, "k_max", "");
    c.t_ini = detail::get<std::size_t>(obj, "t_ini", "");
    detail::get_optional(obj, "wait", "", c.wait);
    detail::get_optional(obj, "search_tolerance", "", c.search_tolerance);
    detail::get_optional(obj, "batch_size", "", c.batch_size);
    detail::get_optional(obj, "freeze_on_move", "", c.freeze_on_move);
    c.model = model_spec_from_json(detail::require(obj, "model", ""), "model");
    detail::checked("<root>", [&] {
        c.validate();
        return 0;
    });
    return c;
}

// ---------------------------------------------------------------------------
// Regime scripts

/// A data-generation request: either a piecewise GP script or the mean step
/// of the unimodality example.
struct GenerationRequest {
    enum class Kind { PiecewiseGp, StepExample };
    Kind kind = Kind::PiecewiseGp;
    RegimeScript script;
    std::uint64_t seed = 0;
};

inline Json to_json(const RegimeScript &s) {
    return Json{{"kind", "piecewise_gp"},
                {"name", s.name},
                {"locations", s.locations},
                {"base_params", to_json(s.base_params)},
                {"target", std::string(to_string(s.target))},
                {"factors", s.factors},
                {"length", s.length},
                {"seed", s.seed},
                {"min_gap", s.min_gap}};
}

/// Accepts {"kind": "step_example", "seed": n}, {"kind": "benchmark",
/// "target": ..., "seed": n} for the four standard scripts, or a full
/// piecewise_gp script.
inline GenerationRequest generation_request_from_json(const Json &obj) {
    GenerationRequest req;
    std::string kind = "piecewise_gp";
    detail::get_optional(obj, "kind", "", kind);
    detail::get_optional(obj, "seed", "", req.seed);
    if (kind == "step_example") {
        req.kind = GenerationRequest::Kind::StepExample;
        req.script.name = "step_example";
        req.script.seed = req.seed;
        return req;
    }
    if (kind == "benchmark") {
        const auto target = detail::get<std::string>(obj, "target", "");
        req.script = benchmark_script(detail::checked("target", [&] { return target_from_string(target); }), req.seed);
        return req;
    }
    if (kind != "piecewise_gp") {
        throw SchemaError("kind", "expected piecewise_gp, benchmark or step_example, got '" + kind + "'");
    }
    RegimeScript &s = req.script;
    s.seed = req.seed;
    detail::get_optional(obj, "name", "", s.name);
    s.locations = detail::get<std::vector<std::int64_t>>(obj, "locations", "");
    s.factors = detail::get<std::vector<double>>(obj, "factors", "");
    const auto target = detail::get<std::string>(obj, "target", "");
    s.target = detail::checked("target", [&] { return target_from_string(target); });
    s.length = detail::get<std::int64_t>(obj, "length", "");
    detail::get_optional(obj, "min_gap", "", s.min_gap);
    if (obj.contains("base_params")) {
        s.base_params = model_params_from_json(obj["base_params"], "base_params", s.base_params);
    }
    detail::checked("<root>", [&] {
        s.validate();
        return 0;
    });
    return req;
}

inline GeneratedSeries generate(const GenerationRequest &req) {
    if (req.kind == GenerationRequest::Kind::StepExample) {
        return GeneratedSeries{step_example(req.seed), {50}};
    }
    return sample_piecewise_gp(req.script);
}

// ---------------------------------------------------------------------------
// Truth, events and instrumentation

struct Truth {
    std::string name;
    std::uint64_t seed = 0;
    std::int64_t length = 0;
    std::vector<std::int64_t> change_points;
};

inline Json to_json(const Truth &t) {
    return Json{{"name", t.name}, {"seed", t.seed}, {"length", t.length}, {"change_points", t.change_points}};
}

inline Truth truth_from_json(const Json &obj) {
    Truth t;
    detail::get_optional(obj, "name", "", t.name);
    detail::get_optional(obj, "seed", "", t.seed);
    detail::get_optional(obj, "length", "", t.length);
    t.change_points = detail::get<std::vector<std::int64_t>>(obj, "change_points", "");
    return t;
}

inline Json to_json(const DetectionEvent &e) {
    return Json{{"kind", "change"},
                {"t", e.declared_at},
                {"change_point", e.change_point},
                {"change_timestamp", e.change_timestamp},
                {"declared_timestamp", e.declared_timestamp},
                {"candidate_score", e.candidate_score},
                {"left_distance", e.left_distance},
                {"right_distance", e.right_distance}};
}

/// Run header written as the first line of every events file.
struct RunInfo {
    std::uint64_t seed = 0;
    std::string data;
    DetectorConfig config;
};

inline void write_events(std::ostream &out, const RunInfo &info, const std::vector<DetectionEvent> &events) {
    const Json header{{"kind", "run"}, {"seed", info.seed}, {"data", info.data}, {"config", to_json(info.config)}};
    out << header.dump() << '\n';
    for (const auto &e : events) {
        out << to_json(e).dump() << '\n';
    }
}

struct EventLog {
    std::uint64_t seed = 0;
    std::vector<std::int64_t> change_points;
};

/// Reads the change locations (stream indices) of an events file.
inline EventLog read_events(std::istream &in) {
    EventLog out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        Json obj;
        try {
            obj = Json::parse(line);
        } catch (const nlohmann::json::parse_error &e) {
            throw ParseError(e.what(), line_no);
        }
        if (!obj.is_object() || !obj.contains("kind")) {
            throw ParseError("record without 'kind'", line_no);
        }
        const auto kind = obj["kind"];
        if (kind == "run") {
            if (obj.contains("seed") && obj["seed"].is_number_unsigned()) {
                out.seed = obj["seed"].get<std::uint64_t>();
            }
        } else if (kind == "change") {
            if (!obj.contains("change_point") || !obj["change_point"].is_number_integer()) {
                throw ParseError("change record without integer 'change_point'", line_no);
            }
            out.change_points.push_back(obj["change_point"].get<std::int64_t>());
        }
    }
    return out;
}

inline Json to_json(const IterationRecord &r) {
    Json out{{"kind", "iteration"},
             {"t", r.t},
             {"searched", r.searched},
             {"interval_size", r.interval_size},
             {"effective_size", r.effective_size},
             {"evaluations", r.evaluations},
             {"candidate", r.candidate},
             {"persistence", r.persistence},
             {"detected", r.detected},
             {"seconds", r.seconds}};
    if (!r.warning.empty()) {
        out["warning"] = r.warning;
    }
    return out;
}

inline void write_instrumentation(std::ostream &out, std::uint64_t seed, const std::vector<IterationRecord> &log) {
    out << Json{{"kind", "run"}, {"seed", seed}}.dump() << '\n';
    for (const auto &r : log) {
        out << to_json(r).dump() << '\n';
    }
}

/// Per-step candidate and criterion distances for external plotting.
inline void write_plot_data(std::ostream &out, const std::vector<IterationRecord> &log) {
    out << "t,candidate,left_distance,right_distance,criterion,persistence,detected\n";
    for (const auto &r : log) {
        if (!r.searched) {
            continue;
        }
        out << r.t << ',' << r.candidate << ',' << format_double(r.left_distance) << ','
            << format_double(r.right_distance) << ',' << (r.criterion ? 1 : 0) << ',' << r.persistence << ','
            << (r.detected ? 1 : 0) << '\n';
    }
}

inline Json to_json(const InstrumentationSummary &s) {
    auto ms = [](const MeanStd &m) { return Json{{"mean", m.mean}, {"std", m.std}}; };
    return Json{{"iterations", s.iterations},       {"points", s.points},
                {"interval_size", ms(s.interval_size)}, {"effective_size", ms(s.effective_size)},
                {"evaluations", ms(s.evaluations)},     {"total_seconds", s.total_seconds},
                {"seconds_per_point", s.seconds_per_point}};
}

// ---------------------------------------------------------------------------
// Files

inline Json read_json_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    if (buf.str().find_first_not_of(" \t\r\n") == std::string::npos) {
        throw ParseError("'" + path + "' is empty");
    }
    try {
        return Json::parse(buf.str());
    } catch (const nlohmann::json::parse_error &e) {
        // byte offset -> line number
        const std::string text = buf.str();
        const std::size_t upto = std::min(e.byte, text.size());
        const auto line = static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n')) + 1;
        throw ParseError("'" + path + "': " + e.what(), line);
    }
}

inline TimeSeriesWindow read_csv_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path + "'");
    }
    return read_csv(in);
}

} // namespace gocpd
