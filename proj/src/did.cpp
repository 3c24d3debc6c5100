#include "cogload/did.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "cogload/error.hpp"
#include "cogload/parallel.hpp"

namespace cogload::did {

namespace {

constexpr double kRankTolerance = 1e-9;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string relative_name(int r) { return r < 0 ? fmt::format("rel_m{}", -r) : fmt::format("rel_p{}", r); }

// Panel rows restricted to complete cases, with their fixed-effect groupings.
struct Sample {
    std::vector<std::size_t> rows;
    Grouping unit;
    Grouping time;
    std::vector<int> cluster;
    std::size_t n_clusters = 0;
};

Sample complete_cases(const Table& panel, const DidSpec& spec,
                      const std::vector<std::string>& used) {
    const std::vector<double>& unit = panel.column(spec.unit_key);
    const std::vector<double>& time = panel.column(spec.time_key);
    const std::vector<double>& cluster = panel.column(spec.effective_cluster_key());
    std::vector<const std::vector<double>*> cols;
    for (const std::string& name : used) cols.push_back(&panel.column(name));

    Sample s;
    for (std::size_t r = 0; r < panel.rows(); ++r) {
        bool ok = !std::isnan(unit[r]) && !std::isnan(time[r]) && !std::isnan(cluster[r]);
        for (const auto* c : cols) ok = ok && std::isfinite((*c)[r]);
        if (ok) s.rows.push_back(r);
    }
    if (s.rows.empty()) throw DataError("no complete observations for the requested columns");
    std::vector<double> u, t, c;
    for (std::size_t r : s.rows) {
        u.push_back(unit[r]);
        t.push_back(time[r]);
        c.push_back(cluster[r]);
    }
    s.unit = make_grouping(u);
    s.time = make_grouping(t);
    const Grouping g = make_grouping(c);
    s.cluster = g.index;
    s.n_clusters = static_cast<std::size_t>(g.count);
    return s;
}

Eigen::MatrixXd gather(const Table& panel, const std::vector<std::size_t>& rows,
                       const std::vector<std::string>& names) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t c = 0; c < names.size(); ++c) {
        const std::vector<double>& col = panel.column(names[c]);
        for (std::size_t i = 0; i < rows.size(); ++i)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = col[rows[i]];
    }
    return m;
}

Eigen::VectorXd centered_norms(const Eigen::MatrixXd& x) {
    Eigen::VectorXd out(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        out(c) = (x.col(c).array() - x.col(c).mean()).matrix().norm();
    return out;
}

void fill_inference(DidFit& fit, const OlsResult& ols, std::size_t n_obs) {
    fit.coefficients = ols.beta;
    fit.covariance = ols.covariance;
    fit.se = ols.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
    fit.n_obs = n_obs;
    fit.n_clusters = ols.n_clusters;
}

}  // namespace

const std::string& DidSpec::effective_cluster_key() const {
    return cluster_key.empty() ? unit_key : cluster_key;
}

void DidSpec::validate(const Table& panel) const {
    if (outcome == treatment) throw InvalidArgument("outcome and treatment must be different columns");
    if (!(demean_tolerance > 0.0)) throw InvalidArgument("demean_tolerance must be positive");
    if (max_demean_sweeps < 1) throw InvalidArgument("max_demean_sweeps must be at least 1");
    for (const std::string* key : {&outcome, &treatment, &unit_key, &time_key, &effective_cluster_key()})
        panel.column(*key);
    for (const std::string& c : controls) {
        panel.column(c);
        if (c == outcome || c == treatment)
            throw InvalidArgument(fmt::format("control '{}' repeats the outcome or treatment", c));
    }
}

Grouping make_grouping(const std::vector<double>& key) {
    Grouping g;
    std::map<double, int> ids;
    g.index.reserve(key.size());
    for (double k : key) {
        const auto [it, inserted] = ids.emplace(k, g.count);
        if (inserted) {
            ++g.count;
            g.size.push_back(0.0);
        }
        g.index.push_back(it->second);
        g.size[static_cast<std::size_t>(it->second)] += 1.0;
    }
    return g;
}

int demean(Eigen::MatrixXd& x, const Grouping& unit, const Grouping& time, double tolerance,
           int max_sweeps) {
    const auto n = static_cast<std::size_t>(x.rows());
    int sweeps_used = 0;
    std::vector<double> sums;
    auto subtract_means = [&](Eigen::Ref<Eigen::VectorXd> v, const Grouping& g) {
        sums.assign(static_cast<std::size_t>(g.count), 0.0);
        for (std::size_t i = 0; i < n; ++i) sums[static_cast<std::size_t>(g.index[i])] += v(static_cast<Eigen::Index>(i));
        double worst = 0.0;
        for (std::size_t k = 0; k < sums.size(); ++k) {
            sums[k] /= g.size[k];
            worst = std::max(worst, std::abs(sums[k]));
        }
        for (std::size_t i = 0; i < n; ++i) v(static_cast<Eigen::Index>(i)) -= sums[static_cast<std::size_t>(g.index[i])];
        return worst;
    };
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        auto v = x.col(c);
        const double threshold = tolerance * std::max(1.0, v.cwiseAbs().maxCoeff());
        int sweep = 0;
        double worst = std::numeric_limits<double>::infinity();
        while (sweep < max_sweeps) {
            ++sweep;
            subtract_means(v, unit);
            subtract_means(v, time);
            // Time means are now zero; unit means measure what is left.
            sums.assign(static_cast<std::size_t>(unit.count), 0.0);
            for (std::size_t i = 0; i < n; ++i) sums[static_cast<std::size_t>(unit.index[i])] += v(static_cast<Eigen::Index>(i));
            worst = 0.0;
            for (std::size_t k = 0; k < sums.size(); ++k) worst = std::max(worst, std::abs(sums[k] / unit.size[k]));
            if (worst < threshold) break;
        }
        if (!(worst < threshold))
            throw NonConvergence(fmt::format("demeaning did not converge in {} sweeps (max group mean {:.3g})",
                                             max_sweeps, worst),
                                 worst);
        sweeps_used = std::max(sweeps_used, sweep);
    }
    return sweeps_used;
}

Demeaned within_transform(const Table& panel, const DidSpec& spec) {
    spec.validate(panel);
    std::vector<std::string> used{spec.outcome, spec.treatment};
    used.insert(used.end(), spec.controls.begin(), spec.controls.end());
    const Sample s = complete_cases(panel, spec, used);
    Eigen::MatrixXd m = gather(panel, s.rows, used);
    Demeaned d;
    d.sweeps = demean(m, s.unit, s.time, spec.demean_tolerance, spec.max_demean_sweeps);
    d.y = m.col(0);
    d.x = m.rightCols(m.cols() - 1);
    d.names.assign(used.begin() + 1, used.end());
    d.rows = s.rows;
    return d;
}

OlsResult ols_cr1(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                  const std::vector<int>& cluster, const std::vector<std::string>& names,
                  const Eigen::VectorXd& scale) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto k = static_cast<std::size_t>(x.cols());
    if (cluster.size() != n || names.size() != k || static_cast<std::size_t>(scale.size()) != k)
        throw InvalidArgument("ols_cr1: dimension mismatch");
    if (k == 0) throw InvalidArgument("ols_cr1: no regressors");
    const int n_clusters = cluster.empty() ? 0 : *std::max_element(cluster.begin(), cluster.end()) + 1;
    if (n_clusters < 2)
        throw TooFewClusters(fmt::format("need at least 2 clusters, found {}", n_clusters));
    if (n <= k) throw RankDeficient(fmt::format("{} observations for {} regressors", n, k));

    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(static_cast<Eigen::Index>(k))
                                  .triangularView<Eigen::Upper>();
    for (std::size_t j = 0; j < k; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (!(scale(jj) > 0.0) || std::abs(r(jj, jj)) <= kRankTolerance * scale(jj))
            throw RankDeficient(fmt::format(
                "column '{}' is collinear with the fixed effects or earlier regressors", names[j]));
    }

    OlsResult out;
    out.beta = qr.solve(y);
    out.residuals = y - x * out.beta;
    // (X'X)^-1 = R^-1 R^-T
    const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(
        Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)));
    const Eigen::MatrixXd bread = r_inv * r_inv.transpose();

    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n_clusters, static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n; ++i)
        scores.row(cluster[i]) += out.residuals(static_cast<Eigen::Index>(i)) * x.row(static_cast<Eigen::Index>(i));
    const Eigen::MatrixXd meat = scores.transpose() * scores;
    const double g = n_clusters;
    const double factor = (g / (g - 1.0)) * (static_cast<double>(n) - 1.0) /
                          (static_cast<double>(n) - static_cast<double>(k));
    out.covariance = factor * bread * meat * bread;
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose());
    out.n_clusters = static_cast<std::size_t>(n_clusters);
    return out;
}

DidFit estimate(const Table& panel, const DidSpec& spec) {
    spec.validate(panel);
    std::vector<std::string> used{spec.outcome, spec.treatment};
    used.insert(used.end(), spec.controls.begin(), spec.controls.end());
    const Sample s = complete_cases(panel, spec, used);
    Eigen::MatrixXd m = gather(panel, s.rows, used);
    const Eigen::VectorXd scale = centered_norms(m.rightCols(m.cols() - 1));

    DidFit fit;
    fit.demean_sweeps = demean(m, s.unit, s.time, spec.demean_tolerance, spec.max_demean_sweeps);
    const Eigen::VectorXd y = m.col(0);
    const Eigen::MatrixXd x = m.rightCols(m.cols() - 1);
    fit.names.assign(used.begin() + 1, used.end());
    const OlsResult ols = ols_cr1(y, x, s.cluster, fit.names, scale);
    fill_inference(fit, ols, s.rows.size());

    const double tss = y.squaredNorm();
    fit.r_squared_within = tss > 0.0 ? 1.0 - ols.residuals.squaredNorm() / tss : 0.0;
    fit.beta_treatment = fit.coefficients(0);
    fit.se_treatment = fit.se(0);
    const double dof = static_cast<double>(fit.n_clusters) - 1.0;
    fit.t_stat = fit.beta_treatment / fit.se_treatment;
    fit.p_value = t_two_sided_p(fit.t_stat, dof);
    const double crit = t_quantile(0.975, dof);
    fit.ci_low = fit.beta_treatment - crit * fit.se_treatment;
    fit.ci_high = fit.beta_treatment + crit * fit.se_treatment;
    return fit;
}

DidFit event_study(const Table& panel, const DidSpec& spec, int pre, int post) {
    spec.validate(panel);
    if (pre < 1 || post < 0) throw InvalidArgument("event_study: window needs pre >= 1 and post >= 0");
    std::vector<std::string> used{spec.outcome, spec.treatment};
    used.insert(used.end(), spec.controls.begin(), spec.controls.end());
    const Sample s = complete_cases(panel, spec, used);

    const std::vector<double>& unit = panel.column(spec.unit_key);
    const std::vector<double>& time = panel.column(spec.time_key);
    const std::vector<double>& treat = panel.column(spec.treatment);
    std::map<double, double> adoption;
    for (std::size_t r : s.rows) {
        if (treat[r] != 1.0) continue;
        auto [it, inserted] = adoption.emplace(unit[r], time[r]);
        if (!inserted) it->second = std::min(it->second, time[r]);
    }
    if (adoption.empty()) throw DataError("event_study: no unit is ever treated");

    std::vector<int> periods;
    for (int rel = -pre; rel <= post; ++rel)
        if (rel != -1) periods.push_back(rel);
    const auto n = static_cast<Eigen::Index>(s.rows.size());
    Eigen::MatrixXd dummies = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(periods.size()));
    std::map<int, std::size_t> cell_count;
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t r = s.rows[static_cast<std::size_t>(i)];
        const auto it = adoption.find(unit[r]);
        if (it == adoption.end()) continue;
        int rel = static_cast<int>(std::lround(time[r] - it->second));
        rel = std::clamp(rel, -pre, post);
        ++cell_count[rel];
        if (rel == -1) continue;
        const auto pos = std::find(periods.begin(), periods.end(), rel) - periods.begin();
        dummies(i, pos) = 1.0;
    }

    std::vector<std::string> names;
    std::vector<Eigen::Index> keep;
    for (std::size_t p = 0; p < periods.size(); ++p)
        if (cell_count[periods[p]] > 0) {
            keep.push_back(static_cast<Eigen::Index>(p));
            names.push_back(relative_name(periods[p]));
        }
    names.insert(names.end(), spec.controls.begin(), spec.controls.end());

    const Eigen::MatrixXd controls = gather(panel, s.rows, spec.controls);
    const Eigen::VectorXd outcome = gather(panel, s.rows, {spec.outcome}).col(0);
    Eigen::MatrixXd m(n, 1 + static_cast<Eigen::Index>(names.size()));
    m.col(0) = outcome;
    for (std::size_t c = 0; c < keep.size(); ++c) m.col(1 + static_cast<Eigen::Index>(c)) = dummies.col(keep[c]);
    m.rightCols(controls.cols()) = controls;
    const Eigen::VectorXd scale = centered_norms(m.rightCols(m.cols() - 1));

    DidFit fit;
    fit.demean_sweeps = demean(m, s.unit, s.time, spec.demean_tolerance, spec.max_demean_sweeps);
    const Eigen::VectorXd y = m.col(0);
    const Eigen::MatrixXd x = m.rightCols(m.cols() - 1);
    fit.names = names;
    const OlsResult ols = ols_cr1(y, x, s.cluster, names, scale);
    fill_inference(fit, ols, s.rows.size());
    const double tss = y.squaredNorm();
    fit.r_squared_within = tss > 0.0 ? 1.0 - ols.residuals.squaredNorm() / tss : 0.0;
    fit.beta_treatment = kNaN;
    fit.se_treatment = kNaN;
    fit.t_stat = kNaN;
    fit.p_value = kNaN;
    fit.ci_low = kNaN;
    fit.ci_high = kNaN;

    for (int rel = -pre; rel <= post; ++rel) {
        EventStudyRow row;
        row.relative_period = rel;
        row.n_obs = cell_count[rel];
        if (rel == -1) {
            row.reference = true;
        } else if (row.n_obs == 0) {
            row.empty = true;
            row.coefficient = kNaN;
            row.se = kNaN;
        } else {
            const auto pos = std::find(names.begin(), names.end(), relative_name(rel)) - names.begin();
            row.coefficient = fit.coefficients(pos);
            row.se = fit.se(pos);
        }
        fit.event_study.push_back(row);
    }
    return fit;
}

PlaceboResult placebo_test(const Table& panel, const DidSpec& spec, int n_draws,
                           std::uint64_t seed, int threads) {
    if (n_draws < 100) throw InvalidArgument("placebo_test: n_draws must be at least 100");
    const DidFit actual = estimate(panel, spec);

    std::vector<std::string> used{spec.outcome, spec.treatment};
    used.insert(used.end(), spec.controls.begin(), spec.controls.end());
    const Sample s = complete_cases(panel, spec, used);
    std::vector<std::string> fixed_cols{spec.outcome};
    fixed_cols.insert(fixed_cols.end(), spec.controls.begin(), spec.controls.end());
    Eigen::MatrixXd fixed = gather(panel, s.rows, fixed_cols);
    const Eigen::VectorXd control_scale = centered_norms(fixed.rightCols(fixed.cols() - 1));
    demean(fixed, s.unit, s.time, spec.demean_tolerance, spec.max_demean_sweeps);

    // Adoption time per unit group; NaN for never treated.
    const std::vector<double>& time = panel.column(spec.time_key);
    const std::vector<double>& treat = panel.column(spec.treatment);
    std::vector<double> adoption(static_cast<std::size_t>(s.unit.count), kNaN);
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
        const std::size_t r = s.rows[i];
        if (treat[r] != 1.0) continue;
        double& a = adoption[static_cast<std::size_t>(s.unit.index[i])];
        a = std::isnan(a) ? time[r] : std::min(a, time[r]);
    }

    std::vector<std::string> names{spec.treatment};
    names.insert(names.end(), spec.controls.begin(), spec.controls.end());
    PlaceboResult result;
    result.actual_beta = actual.beta_treatment;
    result.draws.assign(static_cast<std::size_t>(n_draws), kNaN);
    parallel_for(static_cast<std::size_t>(n_draws), threads, [&](std::size_t d) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                          static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(d)};
        std::mt19937_64 rng(seq);
        std::vector<double> shuffled = adoption;
        for (std::size_t i = shuffled.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(shuffled[i - 1], shuffled[pick(rng)]);
        }
        const auto n = static_cast<Eigen::Index>(s.rows.size());
        Eigen::MatrixXd x(n, static_cast<Eigen::Index>(names.size()));
        for (Eigen::Index i = 0; i < n; ++i) {
            const double a = shuffled[static_cast<std::size_t>(s.unit.index[static_cast<std::size_t>(i)])];
            x(i, 0) = !std::isnan(a) && time[s.rows[static_cast<std::size_t>(i)]] >= a ? 1.0 : 0.0;
        }
        Eigen::VectorXd scale(x.cols());
        scale(0) = centered_norms(x.leftCols(1))(0);
        scale.tail(control_scale.size()) = control_scale;
        try {
            Eigen::MatrixXd dcol = x.leftCols(1);
            demean(dcol, s.unit, s.time, spec.demean_tolerance, spec.max_demean_sweeps);
            x.col(0) = dcol.col(0);
            x.rightCols(fixed.cols() - 1) = fixed.rightCols(fixed.cols() - 1);
            const OlsResult ols = ols_cr1(fixed.col(0), x, s.cluster, names, scale);
            result.draws[d] = ols.beta(0);
        } catch (const NumericalError&) {
        } catch (const DataError&) {
        }
    });

    std::size_t extreme = 0, ok = 0;
    double sum = 0.0, sum_sq = 0.0;
    for (double b : result.draws) {
        if (std::isnan(b)) {
            ++result.n_failed;
            continue;
        }
        ++ok;
        sum += b;
        sum_sq += b * b;
        if (std::abs(b) >= std::abs(result.actual_beta)) ++extreme;
    }
    result.p_value = static_cast<double>(1 + extreme) / static_cast<double>(1 + ok);
    if (ok > 0) {
        result.mean = sum / static_cast<double>(ok);
        result.sd = ok > 1 ? std::sqrt(std::max(0.0, (sum_sq - sum * result.mean) / static_cast<double>(ok - 1)))
                           : 0.0;
    }
    return result;
}

Table make_planted_panel(const PlantedPanelSpec& spec) {
    if (spec.n_units < 2 || spec.n_periods < 2) throw InvalidArgument("planted panel needs >= 2 units and periods");
    if (!(spec.sigma >= 0.0)) throw InvalidArgument("planted panel sigma must be nonnegative");
    if (!(spec.never_treated_share >= 0.0 && spec.never_treated_share <= 1.0))
        throw InvalidArgument("never_treated_share must lie in [0, 1]");
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> unit_effect(static_cast<std::size_t>(spec.n_units));
    for (double& u : unit_effect) u = z(rng);
    std::vector<double> time_effect(static_cast<std::size_t>(spec.n_periods));
    for (int t = 0; t < spec.n_periods; ++t) time_effect[static_cast<std::size_t>(t)] = 0.05 * t + 0.1 * z(rng);
    const auto n_treated = static_cast<int>(std::lround((1.0 - spec.never_treated_share) * spec.n_units));

    std::vector<double> unit, time, treated, adopt, y;
    for (int u = 0; u < spec.n_units; ++u) {
        const int a = u < n_treated && !spec.adoption_periods.empty()
                          ? spec.adoption_periods[static_cast<std::size_t>(u) % spec.adoption_periods.size()]
                          : -1;
        for (int t = 0; t < spec.n_periods; ++t) {
            const double d = a >= 0 && t >= a ? 1.0 : 0.0;
            unit.push_back(u);
            time.push_back(t);
            treated.push_back(d);
            adopt.push_back(a);
            y.push_back(2.0 + 0.5 * unit_effect[static_cast<std::size_t>(u)] +
                        time_effect[static_cast<std::size_t>(t)] + spec.beta * d + spec.sigma * z(rng));
        }
    }
    Table table;
    table.add_column("unit", std::move(unit));
    table.add_column("time", std::move(time));
    table.add_column("treated", std::move(treated));
    table.add_column("adoption_period", std::move(adopt));
    table.add_column("y", std::move(y));
    return table;
}

double t_two_sided_p(double t, double dof) {
    if (!std::isfinite(t)) return std::isnan(t) ? kNaN : 0.0;
    const boost::math::students_t dist(dof);
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double t_quantile(double p, double dof) {
    const boost::math::students_t dist(dof);
    return boost::math::quantile(dist, p);
}

}  // namespace cogload::did
