#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogload/did.hpp"
#include "cogload/error.hpp"

using namespace cogload;
using namespace cogload::did;

namespace {

DidSpec planted_spec() {
    DidSpec s;
    s.outcome = "y";
    s.treatment = "treated";
    s.controls = {};
    s.unit_key = "unit";
    s.time_key = "time";
    return s;
}

Table small_panel(std::uint64_t seed, int units, int periods, double noise) {
    PlantedPanelSpec p;
    p.n_units = units;
    p.n_periods = periods;
    p.adoption_periods = {periods / 3, periods / 2};
    p.sigma = noise;
    p.seed = seed;
    return make_planted_panel(p);
}

Table with_column(const Table& t, const std::string& name, std::vector<double> values) {
    Table out = t;
    out.add_column(name, std::move(values));
    return out;
}

// Kolmogorov-Smirnov distance from U(0, 1) and its asymptotic p-value.
double ks_uniform_p(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        d = std::max({d, (i + 1) / n - x[i], x[i] - i / n});
    const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) p += 2 * (k % 2 ? 1 : -1) * std::exp(-2.0 * k * k * lambda * lambda);
    return std::clamp(p, 0.0, 1.0);
}

}  // namespace

TEST_SUITE("did") {

TEST_CASE("two by two demeaning matches the closed form") {
    const std::vector<double> unit{0, 0, 1, 1}, time{0, 1, 0, 1};
    Eigen::MatrixXd x(4, 1);
    x << 1.0, 4.0, 2.0, 9.0;
    const Eigen::VectorXd orig = x.col(0);
    demean(x, make_grouping(unit), make_grouping(time), 1e-12, 100);
    const double grand = orig.mean();
    const double ubar[2] = {(orig(0) + orig(1)) / 2, (orig(2) + orig(3)) / 2};
    const double tbar[2] = {(orig(0) + orig(2)) / 2, (orig(1) + orig(3)) / 2};
    for (int i = 0; i < 4; ++i)
        CHECK(x(i, 0) == doctest::Approx(orig(i) - ubar[(int)unit[i]] - tbar[(int)time[i]] + grand).epsilon(1e-12));
}

TEST_CASE("single group is centered in one sweep") {
    const std::vector<double> key(5, 3.0);
    Eigen::MatrixXd x(5, 2);
    x << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
    CHECK(demean(x, make_grouping(key), make_grouping(key), 1e-12, 1) == 1);
    CHECK(std::abs(x.col(0).sum()) < 1e-12);
    CHECK(x(0, 0) == doctest::Approx(-4.0));
    Eigen::MatrixXd y = Eigen::MatrixXd::Random(5, 1);
    const std::vector<double> unit{0, 0, 1, 1, 2}, time{0, 1, 0, 1, 1};
    CHECK_THROWS_AS(demean(y, make_grouping(unit), make_grouping(time), 1e-300, 1), NonConvergence);
}

TEST_CASE("grouping") {
    const Grouping g = make_grouping({5, 2, 5, 7});
    CHECK(g.count == 3);
    CHECK(g.index == std::vector<int>{0, 1, 0, 2});
    CHECK(g.size == std::vector<double>{2, 1, 1});
}

TEST_CASE("absorption invariance") {
    const Table base = small_panel(3, 40, 12, 0.05);
    const DidFit fit = estimate(base, planted_spec());
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    std::vector<double> unit_shift(40), time_shift(12);
    for (double& v : unit_shift) v = 10 * z(rng);
    for (double& v : time_shift) v = 10 * z(rng);
    const auto& unit = base.column("unit");
    const auto& time = base.column("time");
    std::vector<double> y = base.column("y"), y2 = y;
    for (std::size_t r = 0; r < y.size(); ++r) {
        y[r] += unit_shift[(std::size_t)unit[r]];
        y2[r] += time_shift[(std::size_t)time[r]];
    }
    DidSpec spec = planted_spec();
    spec.outcome = "y_shift";
    for (const auto& col : {y, y2}) {
        const DidFit shifted = estimate(with_column(base, "y_shift", col), spec);
        CHECK(std::abs(shifted.beta_treatment - fit.beta_treatment) < 1e-8);
        CHECK(std::abs(shifted.se_treatment - fit.se_treatment) < 1e-8);
    }
}

TEST_CASE("planted effect is recovered") {
    const Table t = make_planted_panel({});
    const DidFit fit = estimate(t, planted_spec());
    CHECK(std::abs(fit.beta_treatment - (-0.162)) < 0.005);
    CHECK(fit.ci_low < -0.162);
    CHECK(fit.ci_high > -0.162);
    CHECK(fit.n_obs == 8000);
    CHECK(fit.n_clusters == 200);
    CHECK(fit.se_treatment > 0.0);
    CHECK(fit.p_value < 1e-6);
}

TEST_CASE("noiseless panel is recovered exactly") {
    PlantedPanelSpec p;
    p.sigma = 0.0;
    const DidFit fit = estimate(make_planted_panel(p), planted_spec());
    CHECK(std::abs(fit.beta_treatment - (-0.162)) < 1e-10);
}

TEST_CASE("matches the dummy-variable reference fit") {
    const Table t = Table::read_csv_file(COGLOAD_FIXTURE_DIR "/planted_panel.csv");
    std::ifstream in(COGLOAD_FIXTURE_DIR "/planted_expected.json");
    const nlohmann::json ref = nlohmann::json::parse(in);
    DidSpec spec = planted_spec();
    spec.controls = {"x"};
    const DidFit fit = estimate(t, spec);
    CHECK(fit.n_obs == ref["n_obs"].get<std::size_t>());
    CHECK(fit.n_clusters == ref["n_clusters"].get<std::size_t>());
    CHECK(fit.coefficients(0) == doctest::Approx(ref["beta_treated"].get<double>()).epsilon(1e-9));
    CHECK(fit.coefficients(1) == doctest::Approx(ref["beta_x"].get<double>()).epsilon(1e-8));
    CHECK(fit.se(0) == doctest::Approx(ref["se_treated"].get<double>()).epsilon(1e-7));
    CHECK(fit.se(1) == doctest::Approx(ref["se_x"].get<double>()).epsilon(1e-7));
}

TEST_CASE("covariance is symmetric positive semidefinite") {
    const Table base = small_panel(4, 50, 10, 0.1);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> z;
    std::vector<double> a(base.rows()), b(base.rows());
    for (std::size_t r = 0; r < a.size(); ++r) {
        a[r] = z(rng);
        b[r] = 0.5 * a[r] + z(rng);
    }
    DidSpec spec = planted_spec();
    spec.controls = {"a", "b"};
    const DidFit fit = estimate(with_column(with_column(base, "a", a), "b", b), spec);
    CHECK((fit.covariance - fit.covariance.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.covariance);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-14 * eig.eigenvalues().maxCoeff());
    for (Eigen::Index j = 0; j < fit.se.size(); ++j) CHECK(fit.se(j) > 0.0);
}

TEST_CASE("singleton clusters reduce to HC1") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z;
    const int n = 50, k = 3;
    Eigen::MatrixXd x(n, k);
    Eigen::VectorXd y(n);
    std::vector<int> cluster(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) x(i, j) = z(rng);
        y(i) = x(i, 0) - 0.5 * x(i, 2) + (1 + std::abs(x(i, 1))) * z(rng);
        cluster[i] = i;
    }
    const OlsResult r = ols_cr1(y, x, cluster, {"a", "b", "c"}, Eigen::VectorXd::Ones(k));
    // Direct HC1: (X'X)^-1 X' diag(e^2) X (X'X)^-1 * n / (n - k).
    const Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
    const Eigen::VectorXd beta = xtx_inv * x.transpose() * y;
    const Eigen::VectorXd e = y - x * beta;
    const Eigen::MatrixXd meat = x.transpose() * e.array().square().matrix().asDiagonal() * x;
    const Eigen::MatrixXd hc1 = xtx_inv * meat * xtx_inv * (double(n) / (n - k));
    CHECK((r.beta - beta).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((r.covariance - hc1).cwiseAbs().maxCoeff() < 1e-12 * hc1.cwiseAbs().maxCoeff());
    CHECK(r.n_clusters == 50);
}

TEST_CASE("collinear and unclustered designs are rejected") {
    const Table base = small_panel(8, 20, 8, 0.1);
    // A unit-constant control is absorbed by the unit effects.
    std::vector<double> size(base.rows());
    for (std::size_t r = 0; r < size.size(); ++r) size[r] = 3 * base.column("unit")[r] + 1;
    DidSpec spec = planted_spec();
    spec.controls = {"size"};
    try {
        estimate(with_column(base, "size", size), spec);
        FAIL("expected RankDeficient");
    } catch (const RankDeficient& e) {
        CHECK(std::string(e.what()).find("size") != std::string::npos);
    }

    std::vector<double> one(base.rows(), 1.0);
    spec = planted_spec();
    spec.cluster_key = "everyone";
    CHECK_THROWS_AS(estimate(with_column(base, "everyone", one), spec), TooFewClusters);

    spec = planted_spec();
    spec.controls = {"missing"};
    CHECK_THROWS_AS(estimate(base, spec), DataError);
    spec = planted_spec();
    spec.outcome = "treated";
    CHECK_THROWS_AS(estimate(base, spec), ConfigError);
}

TEST_CASE("incomplete rows are dropped") {
    const Table base = small_panel(9, 20, 8, 0.1);
    std::vector<double> y = base.column("y");
    y[0] = NAN;
    y[5] = NAN;
    DidSpec spec = planted_spec();
    spec.outcome = "y_na";
    const DidFit fit = estimate(with_column(base, "y_na", y), spec);
    CHECK(fit.n_obs == base.rows() - 2);
}

TEST_CASE("event study on a single cohort") {
    PlantedPanelSpec p;
    p.n_units = 100;
    p.n_periods = 20;
    p.adoption_periods = {10};
    p.never_treated_share = 0.5;
    p.beta = -0.2;
    p.sigma = 0.05;
    const DidFit fit = event_study(make_planted_panel(p), planted_spec(), 4, 5);
    REQUIRE(fit.event_study.size() == 10);
    CHECK(std::isnan(fit.beta_treatment));
    for (const EventStudyRow& row : fit.event_study) {
        CAPTURE(row.relative_period);
        if (row.reference) {
            CHECK(row.relative_period == -1);
            CHECK(row.coefficient == 0.0);
            continue;
        }
        REQUIRE_FALSE(row.empty);
        const double truth = row.relative_period >= 0 ? -0.2 : 0.0;
        CHECK(std::abs(row.coefficient - truth) <= 2 * row.se);
    }
}

TEST_CASE("event study marks empty cells") {
    PlantedPanelSpec p;
    p.n_units = 40;
    p.n_periods = 10;
    p.adoption_periods = {2};
    const DidFit fit = event_study(make_planted_panel(p), planted_spec(), 4, 3);
    // Adoption at 2 leaves relative periods -1 and -2 only; -3 and below bin
    // into -4, which stays empty.
    const EventStudyRow& far = fit.event_study.front();
    CHECK(far.relative_period == -4);
    CHECK(far.empty);
    CHECK(std::isnan(far.coefficient));
    CHECK(far.n_obs == 0);
}

TEST_CASE("placebo rejects a planted effect") {
    const PlaceboResult r = placebo_test(make_planted_panel({}), planted_spec(), 500, 11);
    CHECK(r.p_value < 0.01);
    CHECK(r.n_failed == 0);
    CHECK(r.draws.size() == 500);
    CHECK(r.actual_beta == doctest::Approx(-0.162).epsilon(0.05));
}

TEST_CASE("minimal placebo run is centred") {
    const PlaceboResult r = placebo_test(small_panel(12, 60, 12, 0.05), planted_spec(), 100, 12);
    CHECK(r.draws.size() == 100);
    CHECK(std::abs(r.mean) <= 2 * r.sd);
    CHECK_THROWS_AS(placebo_test(small_panel(12, 60, 12, 0.05), planted_spec(), 99, 12), InvalidArgument);
}

TEST_CASE("placebo draws do not depend on threads") {
    const Table t = small_panel(13, 40, 10, 0.05);
    const PlaceboResult a = placebo_test(t, planted_spec(), 100, 5, 1);
    const PlaceboResult b = placebo_test(t, planted_spec(), 100, 5, 3);
    CHECK(a.draws == b.draws);
}

TEST_CASE("placebo p-values are uniform under the null") {
    std::vector<double> p;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        PlantedPanelSpec spec;
        spec.n_units = 40;
        spec.n_periods = 10;
        spec.adoption_periods = {3, 6};
        spec.beta = 0.0;
        spec.sigma = 0.05;
        spec.seed = 100 + seed;
        p.push_back(placebo_test(make_planted_panel(spec), planted_spec(), 100, seed).p_value);
    }
    CHECK(ks_uniform_p(p) > 0.01);
}

TEST_CASE("t distribution helpers") {
    CHECK(t_two_sided_p(0.0, 10) == doctest::Approx(1.0));
    CHECK(t_quantile(0.975, 1e6) == doctest::Approx(1.959964).epsilon(1e-5));
    CHECK(t_quantile(0.975, 10) == doctest::Approx(2.228139).epsilon(1e-6));
    CHECK(t_two_sided_p(2.228139, 10) == doctest::Approx(0.05).epsilon(1e-5));
}

}
