#include "gocpd/datagen.hpp"
#include "gocpd/eval.hpp"
#include "gocpd/iid_model.hpp"
#include "gocpd/search.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

using namespace gocpd;

namespace {

IidGaussianModel step_model() {
    FitOptions opt;
    opt.min_fit_points = 3;
    return IidGaussianModel(ModelParams{KernelKind::Rbf, 1.0, 1.0, 0.001, Eigen::VectorXd::Zero(1)}, opt, true);
}

} // namespace

TEST_CASE("effective interval") {
    CHECK(effective_interval(100, 0, 0, 3) == IndexRange{3, 97});
    CHECK(effective_interval(100, 0, 40, 3) == IndexRange{40, 97});
    CHECK(effective_interval(10, 0, 9, 3).empty());
    CHECK(effective_interval(100, 60, 20, 5) == IndexRange{65, 95});
    CHECK(effective_interval(100, 0, 0, 3).size() == 95);
}

TEST_CASE("ternary search finds the peak of unimodal sequences") {
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<int> len(1, 400);
    for (int trial = 0; trial < 500; ++trial) {
        const std::int64_t first = std::uniform_int_distribution<int>(0, 50)(rng);
        const std::int64_t last = first + len(rng) - 1;
        const std::int64_t peak = std::uniform_int_distribution<std::int64_t>(first, last)(rng);
        const double slope_l = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
        const double slope_r = std::uniform_real_distribution<double>(0.1, 3.0)(rng);
        auto f = [&](std::int64_t x) {
            return x <= peak ? -slope_l * static_cast<double>(peak - x) : -slope_r * static_cast<double>(x - peak);
        };
        const IndexRange domain{first, last};
        const SearchResult want = linear_scan_argmax(f, domain);
        const SearchResult got = ternary_search(f, domain, first, 1);
        INFO("domain [" << first << ", " << last << "] peak " << peak);
        CHECK(got.argmax == want.argmax);
        CHECK(got.evaluations <= evaluation_bound(static_cast<double>(domain.size())));
    }
}

TEST_CASE("ternary search with a larger tolerance still scans the final bracket") {
    auto f = [](std::int64_t x) { return -std::abs(static_cast<double>(x) - 77.0); };
    for (const std::int64_t tol : {1, 2, 3, 5}) {
        CHECK(ternary_search(f, IndexRange{0, 300}, 0, tol).argmax == 77);
    }
}

TEST_CASE("previous candidate above tau1 narrows the bracket towards it") {
    // prev sits at the maximum: [l, tau1] is kept and prev wins.
    std::vector<std::int64_t> probes;
    auto f = [&](std::int64_t x) {
        probes.push_back(x);
        return -std::abs(static_cast<double>(x) - 12.0);
    };
    const SearchResult r = ternary_search(f, IndexRange{10, 100}, 12, 1);
    CHECK(r.argmax == 12);
    // only the first tau2 = 70 lies beyond the first tau1 = 40
    CHECK(std::count_if(probes.begin(), probes.end(), [](std::int64_t p) { return p > 40; }) == 1);
}

TEST_CASE("ties between the two probes drop both outer thirds") {
    auto f = [](std::int64_t x) { return -std::abs(static_cast<double>(x) - 50.0); };
    // tau1 = 30, tau2 = 70 score equally
    const SearchResult r = ternary_search(f, IndexRange{0, 100}, 0, 1);
    CHECK(r.argmax == 50);
}

TEST_CASE("search over an empty domain throws") {
    auto f = [](std::int64_t) { return 0.0; };
    CHECK_THROWS_AS(ternary_search(f, IndexRange{5, 4}, 5), EmptyDomain);
    CHECK_THROWS_AS(linear_scan_argmax(f, IndexRange{5, 4}), EmptyDomain);
    CHECK_THROWS_AS(ternary_search(f, IndexRange{0, 4}, 0, 0), InvalidArgument);
}

TEST_CASE("split score prefers the true step location") {
    const TimeSeriesWindow w = step_example(0);
    IidGaussianModel m1 = step_model();
    IidGaussianModel m2 = step_model();
    const double s25 = split_score(w, 0, 25, m1, m2, false).score;
    const double s50 = split_score(w, 0, 50, m1, m2, false).score;
    CHECK(s25 < s50);
    CHECK_THROWS_AS(split_score(w, 0, 2, m1, m2, false), TooFewPoints);
    CHECK_THROWS_AS(split_score(w, 0, 99, m1, m2, false), TooFewPoints);
}

TEST_CASE("split scorer memoizes within an iteration and agrees with split_score") {
    const TimeSeriesWindow w = step_example(1);
    SplitScorer<IidGaussianModel> scorer(step_model(), step_model());
    scorer.begin_iteration(w, 0);
    const double a = scorer(40);
    const double b = scorer(40);
    CHECK(a == b);
    CHECK(scorer.evaluations() == 1);
    IidGaussianModel m1 = step_model();
    IidGaussianModel m2 = step_model();
    CHECK(a == Catch::Approx(split_score(w, 0, 40, m1, m2, false).score).epsilon(1e-14));
    scorer.begin_iteration(w, 0);
    CHECK(scorer.evaluations() == 0);
    CHECK(scorer.scores().empty());
}

TEST_CASE("ternary search over the split metric of the step example") {
    const TimeSeriesWindow w = step_example(3);
    SplitScorer<IidGaussianModel> scorer(step_model(), step_model());
    scorer.begin_iteration(w, 0);
    const IndexRange domain = effective_interval(100, 0, 0, 3);
    const SearchResult scan = linear_scan_argmax([&](std::int64_t tau) { return scorer(tau); }, domain);
    const SearchResult found = ternary_search(scorer, domain, 0, 1);
    CHECK(found.argmax == scan.argmax);
    CHECK(std::abs(found.argmax - 50) <= 2);
}
