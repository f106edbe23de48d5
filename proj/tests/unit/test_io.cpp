#include "gocpd/datagen.hpp"
#include "gocpd/io.hpp"

#include <catch_amalgamated.hpp>

#include <limits>
#include <sstream>
#include <string>

using namespace gocpd;

namespace {

TimeSeriesWindow parse(const std::string &text) {
    std::istringstream in(text);
    return read_csv(in);
}

template <class Fn>
std::string schema_field(Fn &&fn) {
    try {
        fn();
    } catch (const SchemaError &e) {
        return e.field();
    }
    return "<no error>";
}

template <class Fn>
std::size_t parse_line(Fn &&fn) {
    try {
        fn();
    } catch (const ParseError &e) {
        return e.line();
    }
    return 0;
}

Json minimal_config() {
    return Json::parse(R"({"nu1": 2, "nu2": 2, "k_max": 10, "t_ini": 30, "model": {"family": "iid"}})");
}

} // namespace

TEST_CASE("CSV roundtrip is exact") {
    const GeneratedSeries g = sample_piecewise_gp(benchmark_script(RegimeTarget::OutputScale, 4));
    std::ostringstream out;
    write_csv(out, g.series);
    const TimeSeriesWindow back = parse(out.str());
    CHECK(back.timestamps() == g.series.timestamps());
    CHECK(back.inputs() == g.series.inputs());
    CHECK(back.outputs() == g.series.outputs());

    std::ostringstream again;
    write_csv(again, back);
    CHECK(again.str() == out.str());
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("CSV without inputs uses the timestamps") {
    const TimeSeriesWindow w = parse("t,y0,y1\n3,1.5,2\n\n7,-1,0.25\n");
    REQUIRE(w.size() == 2);
    CHECK(w.channel_count() == 2);
    CHECK(w.timestamp(1) == 7);
    CHECK(w.inputs()(1, 0) == 7.0);
    CHECK(w.outputs()(1, 1) == 0.25);

    const TimeSeriesWindow x = parse("t,x0,x1,y0\n0,0.5,1,2\n1,0.7,1,3\n");
    CHECK(x.input_dim() == 2);
    CHECK(x.inputs()(1, 0) == 0.7);
}

TEST_CASE("malformed CSV reports the line") {
    CHECK(parse_line([] { parse("t,y0\n0,1\n1,abc\n"); }) == 3);
    CHECK(parse_line([] { parse("t,y0\n0,1\n1,2,3\n"); }) == 3);
    CHECK(parse_line([] { parse("t,y0\n5,1\n5,2\n"); }) == 3);
    CHECK(parse_line([] { parse("time,y0\n0,1\n"); }) == 1);
    CHECK(parse_line([] { parse("t,y0,x0\n0,1,2\n"); }) == 1);
    CHECK(parse_line([] { parse("t,x0\n0,1\n"); }) == 1);
    CHECK_THROWS_AS(parse(""), ParseError);
    CHECK_THROWS_AS(parse("t,y0\n"), ParseError);
    CHECK_THROWS_WITH(parse("t,y0\n0,1\n1,abc\n"), Catch::Matchers::ContainsSubstring("line 3"));
}

TEST_CASE("detector config parsing") {
    const DetectorConfig c = detector_config_from_json(minimal_config());
    CHECK(c.nu1 == 2.0);
    CHECK(c.wait == DetectorConfig{}.wait);
    CHECK(c.model.family == ModelFamily::IidGaussian);

    Json full = minimal_config();
    full["wait"] = 12;
    full["model"] = Json::parse(R"({"family": "gp", "prior": {"lengthscale": 3, "mean": [0, 1]},
                                    "fit": {"min_fit_points": 10, "min_lengthscale": 0.5}})");
    full["t_ini"] = 20;
    const DetectorConfig g = detector_config_from_json(full);
    CHECK(g.wait == 12);
    CHECK(g.model.family == ModelFamily::GaussianProcess);
    CHECK(g.model.prior.lengthscale == 3.0);
    CHECK(g.model.prior.mean.size() == 2);
    CHECK(g.model.fit.min_fit_points == 10);
    CHECK(g.model.fit.min_lengthscale == 0.5);

    const DetectorConfig back = detector_config_from_json(to_json(g));
    CHECK(to_json(back).dump() == to_json(g).dump());
}

TEST_CASE("schema errors name the offending field") {
    for (const char *key : {"nu1", "nu2", "k_max", "t_ini"}) {
        Json j = minimal_config();
        j.erase(key);
        CHECK(schema_field([&] { detector_config_from_json(j); }) == key);
    }
    Json j = minimal_config();
    j["model"].erase("family");
    CHECK(schema_field([&] { detector_config_from_json(j); }) == "model.family");
    j = minimal_config();
    j["model"]["family"] = "arima";
    CHECK(schema_field([&] { detector_config_from_json(j); }) == "model.family");
    j = minimal_config();
    j["nu1"] = "two";
    CHECK(schema_field([&] { detector_config_from_json(j); }) == "nu1");
    j = minimal_config();
    j["k_max"] = -3;
    CHECK(schema_field([&] { detector_config_from_json(j); }) == "k_max");
    j = minimal_config();
    j["model"]["prior"] = Json{{"noise_std", -1.0}};
    CHECK(schema_field([&] { detector_config_from_json(j); }) == "model.prior");
    j = minimal_config();
    j["model"]["fit"] = Json{{"min_fit_points", 1.5}};
    CHECK(schema_field([&] { detector_config_from_json(j); }) == "model.fit.min_fit_points");
    j = minimal_config();
    j["t_ini"] = 2;
    CHECK(schema_field([&] { detector_config_from_json(j); }) == "<root>");
    CHECK_THROWS_WITH(detector_config_from_json(Json::parse(R"({"nu1": 2})")),
                      Catch::Matchers::ContainsSubstring("'nu2'"));
}

TEST_CASE("generation requests") {
    const GenerationRequest step = generation_request_from_json(Json::parse(R"({"kind": "step_example", "seed": 3})"));
    CHECK(step.kind == GenerationRequest::Kind::StepExample);
    const GeneratedSeries s = generate(step);
    CHECK(s.series.outputs() == step_example(3).outputs());
    CHECK(s.change_points == std::vector<std::int64_t>{50});

    const GenerationRequest bench =
        generation_request_from_json(Json::parse(R"({"kind": "benchmark", "target": "noise_std", "seed": 2})"));
    CHECK(bench.script.factors == benchmark_script(RegimeTarget::NoiseStd, 2).factors);

    const RegimeScript mean = benchmark_script(RegimeTarget::Mean, 9);
    const GenerationRequest round = generation_request_from_json(to_json(mean));
    CHECK(generate(round).series.outputs() == sample_piecewise_gp(mean).series.outputs());

    Json bad = to_json(mean);
    bad["locations"] = Json::array({0, 60, 90});
    bad["factors"] = Json::array({1, 2, 3});
    CHECK(schema_field([&] { generation_request_from_json(bad); }) == "<root>");
    bad = to_json(mean);
    bad.erase("length");
    CHECK(schema_field([&] { generation_request_from_json(bad); }) == "length");
    CHECK(schema_field([&] { generation_request_from_json(Json{{"kind", "wave"}}); }) == "kind");
}

TEST_CASE("events roundtrip") {
    std::vector<DetectionEvent> events(2);
    events[0].change_point = 61;
    events[0].declared_at = 80;
    events[1].change_point = 152;
    events[1].declared_at = 171;
    events[1].left_distance = std::numeric_limits<double>::max();
    std::ostringstream out;
    write_events(out, RunInfo{7, "series.csv", DetectorConfig{}}, events);
    std::istringstream in(out.str());
    const EventLog log = read_events(in);
    CHECK(log.seed == 7);
    CHECK(log.change_points == std::vector<std::int64_t>{61, 152});

    std::istringstream empty("");
    CHECK(read_events(empty).change_points.empty());
    std::istringstream broken("{\"kind\": \"run\"}\n{\"kind\": \"change\"}\n");
    CHECK(parse_line([&] { read_events(broken); }) == 2);
    std::istringstream garbage("{\"kind\": \"run\"}\n\nnot json\n");
    CHECK(parse_line([&] { read_events(garbage); }) == 3);
}

TEST_CASE("instrumentation records") {
    std::vector<IterationRecord> log(3);
    log[1].searched = true;
    log[1].t = 1;
    log[1].warning = "step skipped";
    std::ostringstream inst;
    write_instrumentation(inst, 4, log);
    std::istringstream lines(inst.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
        const Json j = Json::parse(line);
        CHECK(j.contains("kind"));
        ++n;
    }
    CHECK(n == 4);
    CHECK(inst.str().find("step skipped") != std::string::npos);

    std::ostringstream plot;
    write_plot_data(plot, log);
    CHECK(plot.str() == "t,candidate,left_distance,right_distance,criterion,persistence,detected\n1,0,0,0,0,0,0\n");
}
