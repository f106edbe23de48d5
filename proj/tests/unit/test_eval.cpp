#include "gocpd/datagen.hpp"
#include "gocpd/eval.hpp"
#include "gocpd/iid_model.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace gocpd;

namespace {

using Points = std::vector<std::int64_t>;

MatchReport match(const Points &truth, const Points &detected, std::int64_t tol) {
    return match_detections(truth, detected, tol);
}

MatchReport counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    MatchReport r;
    r.true_positives = tp;
    r.false_positives = fp;
    r.false_negatives = fn;
    return r;
}

} // namespace

TEST_CASE("matching examples") {
    MatchReport r = match({50}, {51}, 5);
    CHECK(r.true_positives == 1);
    CHECK(r.false_positives == 0);
    CHECK(r.false_negatives == 0);
    REQUIRE(r.pairs.size() == 1);
    CHECK(r.pairs[0] == MatchedPair{50, 51, 1});

    r = match({50}, {}, 5);
    CHECK(r.false_negatives == 1);
    CHECK(r.true_positives == 0);

    r = match({50, 100}, {52, 53, 150}, 5);
    CHECK(r.true_positives == 1);
    CHECK(r.false_positives == 2);
    CHECK(r.false_negatives == 1);
    CHECK(r.pairs[0].detected == 52);
}

TEST_CASE("matching commits the closest pairs first") {
    // 48 is 2 from 50 and 3 from 45; the closer pair wins and 45 takes 44.
    const MatchReport r = match({45, 50}, {44, 48}, 5);
    CHECK(r.true_positives == 2);
    CHECK(r.pairs[0] == MatchedPair{45, 44, -1});
    CHECK(r.pairs[1] == MatchedPair{50, 48, -2});

    // equal distance: the earlier true change takes the detection
    const MatchReport tie = match({40, 50}, {45}, 5);
    REQUIRE(tie.pairs.size() == 1);
    CHECK(tie.pairs[0].truth == 40);
    CHECK(tie.false_negatives == 1);

    const MatchReport edge = match({100}, {75, 125}, 25);
    CHECK(edge.true_positives == 1);
    CHECK(edge.pairs[0].detected == 75);
    CHECK(match({100}, {126}, 25).true_positives == 0);
}

TEST_CASE("rates examples") {
    Rates r = rates(counts(6, 0, 1));
    CHECK(r.tpr == Catch::Approx(6.0 / 7.0));
    CHECK(r.ppv == 1.0);
    CHECK(r.fdr == 0.0);
    CHECK_FALSE(r.ppv_vacuous);

    r = rates(counts(7, 2, 0));
    CHECK(r.tpr == 1.0);
    CHECK(r.ppv == Catch::Approx(0.78).margin(0.005));
    CHECK(r.fdr == 1.0 - r.ppv);

    r = rates(counts(0, 0, 0));
    CHECK(r.tpr == 1.0);
    CHECK(r.ppv == 1.0);
    CHECK(r.fdr == 0.0);
    CHECK(r.tpr_vacuous);
    CHECK(r.ppv_vacuous);

    r = rates(counts(0, 0, 7));
    CHECK(r.tpr == 0.0);
    CHECK(r.ppv_vacuous);
}

TEST_CASE("matching properties on random layouts") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        Points truth;
        Points detected;
        for (std::int64_t c = 50; c < 1000; c += std::uniform_int_distribution<std::int64_t>(50, 200)(rng)) {
            truth.push_back(c);
        }
        const int n = std::uniform_int_distribution<int>(0, 12)(rng);
        for (int i = 0; i < n; ++i) {
            detected.push_back(std::uniform_int_distribution<std::int64_t>(0, 1000)(rng));
        }
        std::sort(detected.begin(), detected.end());
        const MatchReport r = match(truth, detected, 25);
        CHECK(r.true_positives + r.false_negatives == truth.size());
        CHECK(r.true_positives + r.false_positives == detected.size());
        const Rates q = rates(r);
        CHECK(q.tpr >= 0.0);
        CHECK(q.tpr <= 1.0);
        CHECK(q.ppv >= 0.0);
        CHECK(q.ppv <= 1.0);
        CHECK(q.fdr == 1.0 - q.ppv);

        Points ts = truth;
        Points ds = detected;
        for (auto &v : ts) {
            v += 137;
        }
        for (auto &v : ds) {
            v += 137;
        }
        const MatchReport shifted = match(ts, ds, 25);
        CHECK(shifted.true_positives == r.true_positives);
        for (std::size_t i = 0; i < r.pairs.size(); ++i) {
            CHECK(shifted.pairs[i].delay == r.pairs[i].delay);
        }

        Points extra = detected;
        extra.push_back(5000);
        const Rates more = rates(match(truth, extra, 25));
        CHECK(more.tpr == q.tpr);
        if (r.true_positives > 0) {
            CHECK(more.ppv < q.ppv);
        }
    }
}

TEST_CASE("the series start is not scorable") {
    const Points truth{0, 60, 150};
    CHECK(scorable_truth(truth) == Points{60, 150});
    CHECK(scorable_truth(truth, 60) == Points{150});
}

TEST_CASE("instrumentation summary") {
    std::vector<IterationRecord> log(12);
    for (std::size_t i = 0; i < log.size(); ++i) {
        log[i].t = static_cast<std::int64_t>(i);
        log[i].searched = i >= 2;
        log[i].interval_size = 100;
        log[i].effective_size = 40;
        log[i].evaluations = 6;
        log[i].seconds = 0.5;
    }
    const InstrumentationSummary s = aggregate_instrumentation(log);
    CHECK(s.iterations == 10);
    CHECK(s.points == 12);
    CHECK(s.interval_size.mean == 100.0);
    CHECK(s.interval_size.std == 0.0);
    CHECK(s.effective_size.std == 0.0);
    CHECK(s.evaluations.mean == 6.0);
    CHECK(s.total_seconds == Catch::Approx(6.0));
    CHECK(s.seconds_per_point == Catch::Approx(0.5));

    log[2].evaluations = 0;
    log[3].evaluations = 12;
    CHECK(aggregate_instrumentation(log).evaluations.std == Catch::Approx(std::sqrt(7.2)));

    for (auto &r : log) {
        r.searched = false;
    }
    CHECK_THROWS_AS(aggregate_instrumentation(log), EmptyLog);
    CHECK_THROWS_AS(aggregate_instrumentation({}), EmptyLog);
}

TEST_CASE("evaluation counts of a mean-change run stay logarithmic") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> e(0.0, 1.0);
    std::vector<double> v(600);
    for (std::size_t t = 0; t < v.size(); ++t) {
        v[t] = (t / 150 % 2 == 1 ? 5.0 : 0.0) + e(rng);
    }
    DetectorConfig cfg;
    cfg.nu1 = 1.02;
    cfg.nu2 = 1.02;
    cfg.k_max = 5;
    const StreamResult run =
        run_stream(TimeSeriesWindow::from_values(v), cfg, IidGaussianModel(cfg.model.prior, cfg.model.fit));
    const InstrumentationSummary s = aggregate_instrumentation(run.log);
    CHECK(s.evaluations.mean <= 3.0 * (std::log(s.effective_size.mean) / std::log(1.5) + 1.0));
    for (const auto &r : run.log) {
        if (r.searched) {
            CHECK(static_cast<double>(r.evaluations) <= evaluation_bound(static_cast<double>(r.effective_size)));
        }
    }
}

TEST_CASE("evaluation bound") {
    CHECK(evaluation_bound(1.0) == 3.0);
    CHECK(evaluation_bound(2.0) == 9.0);
    CHECK(evaluation_bound(100.0) == 3.0 * (12.0 + 1.0));
}
