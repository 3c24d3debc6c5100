#include "cogload/solver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cogload/error.hpp"

namespace cogload {

namespace {

constexpr int kFullEnumerationLimit = 6;
constexpr double kArmijo = 1e-4;
constexpr double kMinStep = 1e-10;
constexpr double kMaxStep = 1e10;

// Flat layout: x[0..M) attention, x[M..2M) memory.
class Problem {
public:
    Problem(const InvestorProfile& investor, std::span<const Disclosure> disclosures,
            const QualityTechnology& tech)
        : disclosures_(disclosures),
          tech_(tech),
          m_(disclosures.size()),
          budget_a_(investor.effective_attention()),
          budget_w_(investor.effective_memory()) {
        weight_.reserve(m_);
        for (const Disclosure& d : disclosures) weight_.push_back(std::abs(d.content));
    }

    std::size_t assets() const { return m_; }
    double budget_attention() const { return budget_a_; }
    double budget_memory() const { return budget_w_; }

    double utility(const std::vector<double>& x) const {
        double u = 0.0;
        for (std::size_t j = 0; j < m_; ++j)
            u += weight_[j] * processing_quality(x[j], x[m_ + j], disclosures_[j], tech_);
        return u;
    }

    void gradient(const std::vector<double>& x, std::vector<double>& g) const {
        for (std::size_t j = 0; j < m_; ++j) {
            const QualityGradient qg = quality_gradient(x[j], x[m_ + j], disclosures_[j], tech_);
            g[j] = weight_[j] * qg.attention;
            g[m_ + j] = weight_[j] * qg.memory;
        }
    }

    void project(std::vector<double>& x) const {
        project_half(x.data(), budget_a_);
        project_half(x.data() + m_, budget_w_);
    }

private:
    void project_half(double* v, double budget) const {
        const std::vector<double> p = project_onto_budget(std::span<const double>(v, m_), budget);
        std::copy(p.begin(), p.end(), v);
    }

    std::span<const Disclosure> disclosures_;
    const QualityTechnology& tech_;
    std::size_t m_;
    double budget_a_;
    double budget_w_;
    std::vector<double> weight_;
};

double shadow_for(std::span<const double> theta, std::span<const double> marginal, double budget,
                  double budget_tolerance) {
    const double used = std::accumulate(theta.begin(), theta.end(), 0.0);
    if (used < budget - budget_tolerance) return 0.0;
    const double interior = 10.0 * budget_tolerance;
    double sum = 0.0;
    int count = 0;
    double max_boundary = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        if (theta[j] > interior) {
            sum += marginal[j];
            ++count;
        } else {
            max_boundary = std::max(max_boundary, marginal[j]);
        }
    }
    // With nothing interior the binding budget admits any multiplier at least
    // as large as every boundary marginal value; report the smallest one.
    return count > 0 ? sum / count : max_boundary;
}

double residual_for(std::span<const double> theta, std::span<const double> marginal,
                    double lambda, double budget_tolerance) {
    const double interior = 10.0 * budget_tolerance;
    double r = 0.0;
    for (std::size_t j = 0; j < theta.size(); ++j) {
        const double gap = marginal[j] - lambda;
        r = std::max(r, theta[j] > interior ? std::abs(gap) : std::max(0.0, gap));
    }
    return r;
}

double flat_residual(const std::vector<double>& x, const std::vector<double>& g, std::size_t m,
                     double budget_a, double budget_w, double budget_tolerance) {
    std::span<const double> xa(x.data(), m), xw(x.data() + m, m);
    std::span<const double> ga(g.data(), m), gw(g.data() + m, m);
    const double la = shadow_for(xa, ga, budget_a, budget_tolerance);
    const double lw = shadow_for(xw, gw, budget_w, budget_tolerance);
    return std::max(residual_for(xa, ga, la, budget_tolerance),
                    residual_for(xw, gw, lw, budget_tolerance));
}

struct StartOutcome {
    std::vector<double> x;
    double utility = 0.0;
    double residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
};

// Spectral projected gradient ascent with an Armijo backtracking safeguard.
StartOutcome ascend(const Problem& problem, std::vector<double> x, const SolverConfig& cfg) {
    const std::size_t m = problem.assets();
    const std::size_t n = 2 * m;
    std::vector<double> g(n), g_new(n), trial(n), dir(n), x_new(n);

    problem.project(x);
    double u = problem.utility(x);
    problem.gradient(x, g);
    double step = cfg.step_size;

    StartOutcome out;
    for (int it = 0; it <= cfg.max_iterations; ++it) {
        out.iterations = it;
        out.residual = flat_residual(x, g, m, problem.budget_attention(), problem.budget_memory(),
                                     cfg.budget_tolerance);
        if (out.residual < cfg.kkt_tolerance) {
            out.converged = true;
            break;
        }
        if (it == cfg.max_iterations) break;

        for (std::size_t k = 0; k < n; ++k) trial[k] = x[k] + step * g[k];
        problem.project(trial);
        double slope = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            dir[k] = trial[k] - x[k];
            slope += g[k] * dir[k];
        }
        if (slope <= 0.0) {
            // Projection absorbed the whole step; enlarge it and retry.
            step = std::min(step * 10.0, kMaxStep);
            continue;
        }

        double t = 1.0;
        double u_new = 0.0;
        while (true) {
            for (std::size_t k = 0; k < n; ++k) x_new[k] = std::max(0.0, x[k] + t * dir[k]);
            u_new = problem.utility(x_new);
            if (u_new >= u + kArmijo * t * slope || t < 1e-14) break;
            t *= 0.5;
        }

        problem.gradient(x_new, g_new);
        double ss = 0.0;
        double sy = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double s = x_new[k] - x[k];
            ss += s * s;
            sy += s * (g_new[k] - g[k]);
        }
        step = sy < 0.0 ? std::clamp(ss / -sy, kMinStep, kMaxStep) : kMaxStep;
        x.swap(x_new);
        g.swap(g_new);
        u = u_new;
    }
    out.utility = u;
    out.x = std::move(x);
    return out;
}

std::vector<double> uniform_start(std::size_t m, const std::vector<std::size_t>& support,
                                  double budget_a, double budget_w) {
    std::vector<double> x(2 * m, 0.0);
    const double k = static_cast<double>(support.size());
    for (std::size_t j : support) {
        x[j] = budget_a / k;
        x[m + j] = budget_w / k;
    }
    return x;
}

// Full support first so that ties resolve to the uniform-start optimum.
std::vector<std::vector<std::size_t>> candidate_supports(std::span<const Disclosure> ds) {
    const std::size_t m = ds.size();
    std::vector<std::vector<std::size_t>> supports;
    std::vector<std::size_t> all(m);
    std::iota(all.begin(), all.end(), 0);
    supports.push_back(all);
    if (m == 1) return supports;

    if (m <= kFullEnumerationLimit) {
        const unsigned full = (1u << m) - 1u;
        for (std::size_t size = m - 1; size >= 1; --size) {
            for (unsigned mask = 1; mask < full; ++mask) {
                if (static_cast<std::size_t>(std::popcount(mask)) != size) continue;
                std::vector<std::size_t> s;
                for (std::size_t j = 0; j < m; ++j)
                    if (mask & (1u << j)) s.push_back(j);
                supports.push_back(std::move(s));
            }
        }
        return supports;
    }

    // Larger problems: nested prefixes by value per unit of load.
    std::vector<double> score(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double load = ds[j].load();
        score[j] = load > 0.0 ? std::abs(ds[j].content) / load
                              : std::numeric_limits<double>::infinity();
    }
    std::vector<std::size_t> order = all;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    for (std::size_t k = 1; k < m; ++k)
        supports.emplace_back(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    return supports;
}

}  // namespace

void SolverConfig::validate() const {
    if (max_iterations <= 0 || !(step_size > 0.0) || !(kkt_tolerance > 0.0) ||
        !(budget_tolerance > 0.0))
        throw InvalidArgument("solver configuration values must all be positive");
}

std::vector<double> project_onto_budget(std::span<const double> point, double budget) {
    std::vector<double> out(point.size());
    double clipped_sum = 0.0;
    for (std::size_t j = 0; j < point.size(); ++j) {
        out[j] = std::max(0.0, point[j]);
        clipped_sum += out[j];
    }
    if (clipped_sum <= budget) return out;

    // Sorting-based projection onto the scaled simplex {x >= 0, sum x = budget}.
    std::vector<double> sorted(point.begin(), point.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double tau = 0.0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        cumulative += sorted[j];
        const double candidate = (cumulative - budget) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) tau = candidate;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < point.size(); ++j) {
        out[j] = std::max(0.0, point[j] - tau);
        sum += out[j];
    }
    // Long spectral steps put huge entries into `point`; tau then carries
    // their rounding error, so pull the result back onto the budget.
    if (sum > budget)
        for (double& v : out) v *= budget / sum;
    return out;
}

std::vector<double> realized_quality(const AllocationRow& row,
                                     std::span<const Disclosure> disclosures,
                                     const QualityTechnology& tech) {
    std::vector<double> q(disclosures.size());
    for (std::size_t j = 0; j < disclosures.size(); ++j)
        q[j] = processing_quality(row.attention[j], row.memory[j], disclosures[j], tech);
    return q;
}

double allocation_utility(const AllocationRow& row, std::span<const Disclosure> disclosures,
                          const QualityTechnology& tech) {
    const std::vector<double> q = realized_quality(row, disclosures, tech);
    std::vector<double> values(disclosures.size());
    for (std::size_t j = 0; j < disclosures.size(); ++j) values[j] = disclosures[j].content;
    return investor_utility(q, values);
}

MarginalValues marginal_values(const AllocationRow& row, std::span<const Disclosure> disclosures,
                               const QualityTechnology& tech) {
    MarginalValues mv;
    mv.attention.resize(disclosures.size());
    mv.memory.resize(disclosures.size());
    for (std::size_t j = 0; j < disclosures.size(); ++j) {
        const QualityGradient g =
            quality_gradient(row.attention[j], row.memory[j], disclosures[j], tech);
        const double w = std::abs(disclosures[j].content);
        mv.attention[j] = w * g.attention;
        mv.memory[j] = w * g.memory;
    }
    return mv;
}

ShadowPrices estimate_shadow_prices(const AllocationRow& row, const InvestorProfile& investor,
                                    std::span<const Disclosure> disclosures,
                                    const QualityTechnology& tech, double budget_tolerance) {
    const MarginalValues mv = marginal_values(row, disclosures, tech);
    return {shadow_for(row.attention, mv.attention, investor.effective_attention(),
                       budget_tolerance),
            shadow_for(row.memory, mv.memory, investor.effective_memory(), budget_tolerance)};
}

double kkt_residual(const AllocationRow& row, const ShadowPrices& shadow,
                    const InvestorProfile& /*investor*/, std::span<const Disclosure> disclosures,
                    const QualityTechnology& tech, double budget_tolerance) {
    const MarginalValues mv = marginal_values(row, disclosures, tech);
    return std::max(residual_for(row.attention, mv.attention, shadow.attention, budget_tolerance),
                    residual_for(row.memory, mv.memory, shadow.memory, budget_tolerance));
}

AllocationResult solve_allocation(const InvestorProfile& investor,
                                  std::span<const Disclosure> disclosures,
                                  const QualityTechnology& tech, const SolverConfig& cfg) {
    if (disclosures.empty()) throw InvalidArgument("solve_allocation: need at least one disclosure");
    investor.validate();
    tech.validate();
    cfg.validate();
    for (const Disclosure& d : disclosures) d.validate();

    const Problem problem(investor, disclosures, tech);
    const std::size_t m = disclosures.size();

    StartOutcome best;
    bool have_best = false;
    double worst_residual = 0.0;
    int total_iterations = 0;
    for (const auto& support : candidate_supports(disclosures)) {
        StartOutcome run = ascend(
            problem, uniform_start(m, support, problem.budget_attention(), problem.budget_memory()),
            cfg);
        total_iterations += run.iterations;
        if (!run.converged) {
            worst_residual = std::max(worst_residual, run.residual);
            continue;
        }
        const double margin = 1e-12 * std::max(1.0, std::abs(best.utility));
        if (!have_best || run.utility > best.utility + margin) {
            best = std::move(run);
            have_best = true;
        }
    }
    if (!have_best)
        throw NonConvergence("solve_allocation: investor " + std::to_string(investor.investor_id) +
                                 " did not reach KKT tolerance within " +
                                 std::to_string(cfg.max_iterations) +
                                 " iterations (residual " + std::to_string(worst_residual) + ")",
                             worst_residual);

    AllocationResult result;
    result.allocation.attention.assign(best.x.begin(), best.x.begin() + static_cast<std::ptrdiff_t>(m));
    result.allocation.memory.assign(best.x.begin() + static_cast<std::ptrdiff_t>(m), best.x.end());
    result.shadow =
        estimate_shadow_prices(result.allocation, investor, disclosures, tech, cfg.budget_tolerance);
    result.quality = realized_quality(result.allocation, disclosures, tech);
    result.utility = best.utility;
    result.kkt_residual = kkt_residual(result.allocation, result.shadow, investor, disclosures, tech,
                                       cfg.budget_tolerance);
    result.iterations = total_iterations;
    return result;
}

}  // namespace cogload
