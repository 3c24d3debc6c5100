#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "cogload/error.hpp"
#include "cogload/mechanisms.hpp"
#include "support/gen.hpp"

using namespace cogload;
using namespace cogload::mech;

namespace {

InvestorProfile capacities(double a, double w) {
    InvestorProfile inv;
    inv.attention_capacity = a;
    inv.memory_capacity = w;
    return inv;
}

double error_sd(double load, const InvestorProfile& inv, int draws, std::uint64_t seed) {
    MechanismParams p;
    p.error_scale = 1.0;
    Rng rng(seed);
    double s2 = 0.0;
    for (int k = 0; k < draws; ++k) {
        const double e = processing_error(0.0, load, inv, p, rng);
        s2 += e * e;
    }
    return std::sqrt(s2 / draws);
}

// Direct grid search over [0, max_structure] at the given resolution.
double grid_best_structure(double content, const MechanismParams& p, double h) {
    const int n = static_cast<int>(std::lround(p.max_structure / h));
    double best_s = 0.0, best_v = -INFINITY;
    for (int k = 0; k <= n; ++k) {
        const double v = strategic_objective(k * h, content, p, {}, capacities(1, 1), {});
        if (v > best_v) {
            best_v = v;
            best_s = k * h;
        }
    }
    return best_s;
}

}  // namespace

TEST_SUITE("mechanisms") {

TEST_CASE("softmax examples") {
    const std::vector<double> eq{2, 2, 2, 2};
    for (double p : attention_probabilities(eq, 3.0)) CHECK(p == doctest::Approx(0.25).epsilon(1e-15));
    const std::vector<double> mixed{0.1, 5, 9};
    for (double p : attention_probabilities(mixed, 0.0)) CHECK(p == doctest::Approx(1.0 / 3).epsilon(1e-15));
    const std::vector<double> two{1, 2};
    const auto p = attention_probabilities(two, 1.0);
    CHECK(std::abs(p[0] - 0.73106) < 1e-5);
    CHECK(std::abs(p[1] - 0.26894) < 1e-5);
    CHECK_THROWS_AS(attention_probabilities(std::vector<double>{}, 1.0), InvalidArgument);
    CHECK_THROWS_AS(attention_probabilities(std::vector<double>{1, INFINITY}, 1.0), InvalidArgument);
}

TEST_CASE("softmax is a stable, shift-invariant, decreasing probability vector") {
    testgen::Gen g(41);
    for (int c = 0; c < 2000; ++c) {
        CAPTURE(c);
        const int m = g.integer(1, 8);
        const double scale = std::pow(10.0, g.uniform(-2, 6));
        std::vector<double> loads(m);
        for (double& l : loads) l = g.uniform(0, scale);
        const double gamma = g.uniform(0, 5);
        const auto p = attention_probabilities(loads, gamma);
        double total = 0.0;
        for (double v : p) {
            REQUIRE(v >= 0.0);
            REQUIRE(std::isfinite(v));
            total += v;
        }
        REQUIRE(std::abs(total - 1.0) <= 1e-12);

        std::vector<double> shifted = loads;
        const double k = g.uniform(0, 100);
        for (double& l : shifted) l += k;
        const auto ps = attention_probabilities(shifted, gamma);
        for (int j = 0; j < m; ++j) CHECK(ps[j] == doctest::Approx(p[j]).epsilon(1e-9));

        // Strictness is only visible away from floating-point saturation.
        if (m >= 2 && gamma > 0.01 && p[0] > 1e-12 && p[0] < 1 - 1e-9) {
            std::vector<double> heavier = loads;
            heavier[0] += 0.5;
            CHECK(attention_probabilities(heavier, gamma)[0] < p[0]);
        }
    }
}

TEST_CASE("selection frequencies follow the softmax") {
    Rng rng(42);
    const std::vector<double> loads{1, 2};
    const std::vector<double> probs = attention_probabilities(loads, 1.0);
    int first = 0;
    for (int k = 0; k < 10000; ++k) first += sample_without_replacement(probs, 1, rng)[0] == 0;
    CHECK(std::abs(first / 1e4 - 0.731) <= 0.02);

    const std::vector<double> spread{3, 1, 2, 5};
    const std::vector<double> sharp = attention_probabilities(spread, 1e3);
    int lowest = 0;
    for (int k = 0; k < 10000; ++k) lowest += sample_without_replacement(sharp, 1, rng)[0] == 1;
    CHECK(lowest / 1e4 > 0.99);
}

TEST_CASE("sampling without replacement") {
    Rng rng(43);
    const std::vector<double> p{0.1, 0.2, 0.3, 0.4};
    for (int k = 0; k < 200; ++k) {
        auto picked = sample_without_replacement(p, 3, rng);
        std::sort(picked.begin(), picked.end());
        CHECK(std::unique(picked.begin(), picked.end()) == picked.end());
    }
    CHECK(sample_without_replacement(p, 4, rng).size() == 4);
    CHECK_THROWS_AS(sample_without_replacement(p, 5, rng), InvalidArgument);
}

TEST_CASE("selective attention") {
    Rng rng(44);
    Eigen::MatrixXd q(3, 2);
    q << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    const std::vector<double> loads{1, 2};
    CHECK(apply_selective_attention(q, loads, 1.0, 2, rng) == q);
    const Eigen::MatrixXd one = apply_selective_attention(q, loads, 1.0, 1, rng);
    for (int i = 0; i < 3; ++i) CHECK(((one(i, 0) == 0.0) != (one(i, 1) == 0.0)));
    CHECK_THROWS_AS(apply_selective_attention(q, loads, 1.0, 3, rng), InvalidArgument);
    CHECK_THROWS_AS(apply_selective_attention(q, loads, 1.0, 0, rng), InvalidArgument);
    CHECK_THROWS_AS(apply_selective_attention(q, std::vector<double>{1}, 1.0, 1, rng), InvalidArgument);
}

TEST_CASE("processing error limits") {
    Rng rng(45);
    MechanismParams p;
    p.error_scale = 0.0;
    CHECK(processing_error(1.25, 3.0, capacities(1, 1), p, rng) == 1.25);
    p.error_scale = 1.0;
    CHECK(processing_error(1.25, 0.0, capacities(1, 1), p, rng) == 1.25);
    CHECK(error_multiplier(2.0, capacities(1, 3)) == 0.5);
    CHECK_THROWS_AS(error_multiplier(-1.0, capacities(1, 1)), InvalidArgument);
}

TEST_CASE("processing error spread") {
    CHECK(std::abs(error_sd(2.0, capacities(1.5, 2.5), 100000, 46) - 0.5) <= 0.01);
    // Monotone in load, antitone in capacity.
    const double l1 = error_sd(1.0, capacities(1, 1), 20000, 47);
    const double l2 = error_sd(2.0, capacities(1, 1), 20000, 47);
    const double l4 = error_sd(4.0, capacities(1, 1), 20000, 47);
    CHECK(l1 < l2);
    CHECK(l2 < l4);
    const double c1 = error_sd(2.0, capacities(0.5, 0.5), 20000, 48);
    const double c2 = error_sd(2.0, capacities(1, 1), 20000, 48);
    const double c4 = error_sd(2.0, capacities(2, 2), 20000, 48);
    CHECK(c1 > c2);
    CHECK(c2 > c4);
}

TEST_CASE("strategic complexity corners") {
    const MechanismParams p;
    for (double content : {0.0, 0.5, 3.0, 100.0})
        CHECK(strategic_complexity(content, p, {}, capacities(1, 1), {}).structure == 0.0);
    MechanismParams costly;
    costly.complexity_cost = 1e6;
    for (double content : {-5.0, -1.0, 2.0})
        CHECK(strategic_complexity(content, costly, {}, capacities(1, 1), {}).structure <= 1e-3);
}

TEST_CASE("strategic complexity matches grid search") {
    const MechanismParams p;
    const StrategicChoice c = strategic_complexity(-5.0, p, {}, capacities(1, 1), {});
    CHECK(std::abs(c.structure - grid_best_structure(-5.0, p, 1e-3)) <= 2e-3);
}

TEST_CASE("worse news is buried deeper") {
    const MechanismParams p;
    double previous = -1.0;
    for (double content : {-0.5, -1.0, -2.0, -4.0, -8.0}) {
        CAPTURE(content);
        const StrategicChoice c = strategic_complexity(content, p, {}, capacities(1, 1), {});
        CHECK(c.structure >= previous);
        // Never worse than a coarse grid.
        double grid = -INFINITY;
        for (int k = 0; k <= 300; ++k)
            grid = std::max(grid, strategic_objective(0.1 * k, content, p, {}, capacities(1, 1), {}));
        CHECK(c.objective >= grid - 1e-4);
        previous = c.structure;
    }
}

TEST_CASE("parameter validation") {
    MechanismParams p;
    p.gamma = -1;
    CHECK_THROWS_AS(p.validate(), InvalidArgument);
    p = {};
    p.max_structure = 0;
    CHECK_THROWS_AS(strategic_complexity(-1.0, p, {}, capacities(1, 1), {}), InvalidArgument);
}

}
