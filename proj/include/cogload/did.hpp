#pragma once

// Two-way fixed effects difference-in-differences on a numeric panel table:
// alternating-projections demeaning, OLS on the within-transformed data,
// one-way cluster-robust (CR1) covariance, event-study dummies and placebo
// reassignment of adoption dates.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cogload/table.hpp"

namespace cogload::did {

struct DidSpec {
    std::string outcome = "log_speed";
    std::string treatment = "treated";
    std::vector<std::string> controls{"log_market_cap", "institutional_ownership",
                                      "analyst_coverage"};
    std::string unit_key = "firm_id";
    std::string time_key = "period";
    std::string cluster_key;  // empty: cluster by unit_key
    double demean_tolerance = 1e-10;
    int max_demean_sweeps = 200;

    const std::string& effective_cluster_key() const;
    /// Checks the spec against a table: keys present, outcome != treatment.
    void validate(const Table& panel) const;
};

/// Dense group index per row for one fixed-effect key.
struct Grouping {
    std::vector<int> index;
    std::vector<double> size;
    int count = 0;
};
Grouping make_grouping(const std::vector<double>& key);

struct Demeaned {
    Eigen::VectorXd y;
    Eigen::MatrixXd x;  // treatment first, then controls
    std::vector<std::string> names;
    std::vector<std::size_t> rows;  // source row of each observation
    int sweeps = 0;
};

/// Alternating projections over the unit and time groups of `x`, in place.
/// Stops once every group mean of every column is below tolerance times the
/// column's scale; returns the number of sweeps.
int demean(Eigen::MatrixXd& x, const Grouping& unit, const Grouping& time, double tolerance,
           int max_sweeps);

/// Rows with a missing value in any used column are dropped.
Demeaned within_transform(const Table& panel, const DidSpec& spec);

struct EventStudyRow {
    int relative_period = 0;
    double coefficient = 0.0;
    double se = 0.0;
    std::size_t n_obs = 0;  // observations in the cell
    bool reference = false;
    bool empty = false;  // no observations: coefficient and se are NaN
};

struct DidFit {
    double beta_treatment = 0.0;
    double se_treatment = 0.0;
    double t_stat = 0.0;
    double p_value = 0.0;
    double ci_low = 0.0;  // 95%, t with n_clusters - 1 dof
    double ci_high = 0.0;
    std::vector<std::string> names;
    Eigen::VectorXd coefficients;
    Eigen::VectorXd se;
    Eigen::MatrixXd covariance;
    std::size_t n_obs = 0;
    std::size_t n_clusters = 0;
    double r_squared_within = 0.0;
    int demean_sweeps = 0;
    std::vector<EventStudyRow> event_study;
};

struct OlsResult {
    Eigen::VectorXd beta;
    Eigen::VectorXd residuals;
    Eigen::MatrixXd covariance;
    std::size_t n_clusters = 0;
};

/// OLS of y on x with CR1 covariance:
///   (G/(G-1)) ((n-1)/(n-k)) (X'X)^-1 (sum_g X_g'u_g u_g'X_g) (X'X)^-1.
/// `scale` holds each column's norm before demeaning; a column whose part not
/// explained by earlier columns falls below 1e-9 of it is rank deficient.
OlsResult ols_cr1(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                  const std::vector<int>& cluster, const std::vector<std::string>& names,
                  const Eigen::VectorXd& scale);

DidFit estimate(const Table& panel, const DidSpec& spec);

/// Relative-time dummies in [-pre, post] with -1 omitted; event times beyond
/// the window are binned into the end points. Units that never adopt carry no
/// dummies. Adoption is the first time the treatment column is 1.
DidFit event_study(const Table& panel, const DidSpec& spec, int pre, int post);

struct PlaceboResult {
    double actual_beta = 0.0;
    std::vector<double> draws;  // NaN where a draw failed
    std::size_t n_failed = 0;
    double p_value = 1.0;
    double mean = 0.0;
    double sd = 0.0;
};

/// Permutes adoption periods across units and re-estimates. p-value is
/// (1 + #{|b| >= |b_actual|}) / (1 + successful draws). Draw d uses a stream
/// seeded by (seed, d), so results do not depend on `threads`.
PlaceboResult placebo_test(const Table& panel, const DidSpec& spec, int n_draws,
                           std::uint64_t seed, int threads = 1);

struct PlantedPanelSpec {
    int n_units = 200;
    int n_periods = 40;
    double beta = -0.162;
    double sigma = 0.01;
    std::vector<int> adoption_periods{10, 16, 22};
    double never_treated_share = 0.25;
    std::uint64_t seed = 1;
};

/// y = 2 + 0.5 * unit_effect + time_effect + beta * treated + N(0, sigma^2),
/// unit effects N(0, 1), time effects 0.05 * t + N(0, 0.1^2). Treated units are
/// spread evenly over the adoption periods. Columns: unit, time, treated,
/// adoption_period, y.
Table make_planted_panel(const PlantedPanelSpec& spec);

/// Two-sided p-value and quantile helpers for Student t.
double t_two_sided_p(double t, double dof);
double t_quantile(double p, double dof);

}  // namespace cogload::did
