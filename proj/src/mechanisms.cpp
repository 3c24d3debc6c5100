#include "cogload/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cogload/error.hpp"

namespace cogload::mech {

namespace {

constexpr int kCoarseGridPoints = 601;
constexpr double kGoldenTolerance = 1e-9;

}  // namespace

void MechanismParams::validate() const {
    if (!(gamma >= 0.0) || !(error_scale >= 0.0) || !(complexity_benefit >= 0.0) ||
        !(complexity_cost >= 0.0))
        throw InvalidArgument("mechanism parameters must be nonnegative");
    if (!(max_structure > 0.0)) throw InvalidArgument("max_structure must be positive");
}

std::vector<double> attention_probabilities(std::span<const double> loads, double gamma) {
    if (loads.empty()) throw InvalidArgument("attention_probabilities: need at least one load");
    double lowest = loads[0];
    for (double l : loads) {
        if (!std::isfinite(l)) throw InvalidArgument("attention_probabilities: loads must be finite");
        lowest = std::min(lowest, l);
    }
    std::vector<double> p(loads.size());
    double total = 0.0;
    for (std::size_t j = 0; j < loads.size(); ++j) {
        p[j] = std::exp(-gamma * (loads[j] - lowest));
        total += p[j];
    }
    for (double& v : p) v /= total;
    return p;
}

std::vector<std::size_t> sample_without_replacement(std::span<const double> probabilities,
                                                    std::size_t count, Rng& rng) {
    if (count > probabilities.size())
        throw InvalidArgument("sample_without_replacement: cannot draw " + std::to_string(count) +
                              " of " + std::to_string(probabilities.size()) + " items");
    std::vector<double> weight(probabilities.begin(), probabilities.end());
    std::vector<bool> taken(weight.size(), false);
    std::vector<std::size_t> picked;
    picked.reserve(count);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t k = 0; k < count; ++k) {
        double total = 0.0;
        for (std::size_t j = 0; j < weight.size(); ++j)
            if (!taken[j]) total += weight[j];
        double u = unit(rng) * total;
        std::size_t chosen = weight.size();
        for (std::size_t j = 0; j < weight.size(); ++j) {
            if (taken[j]) continue;
            if (chosen == weight.size()) chosen = j;  // fallback when all weights vanish
            if (weight[j] <= 0.0) continue;
            chosen = j;
            if (u < weight[j]) break;
            u -= weight[j];
        }
        taken[chosen] = true;
        picked.push_back(chosen);
    }
    return picked;
}

Eigen::MatrixXd apply_selective_attention(const Eigen::MatrixXd& quality,
                                          std::span<const double> loads, double gamma,
                                          int processing_slots, Rng& rng) {
    const auto m = static_cast<std::size_t>(quality.cols());
    if (loads.size() != m) throw InvalidArgument("apply_selective_attention: one load per asset");
    if (processing_slots < 1) throw InvalidArgument("apply_selective_attention: slots must be >= 1");
    if (static_cast<std::size_t>(processing_slots) > m)
        throw InvalidArgument("apply_selective_attention: " + std::to_string(processing_slots) +
                              " slots exceed " + std::to_string(m) + " assets");
    const std::vector<double> probs = attention_probabilities(loads, gamma);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(quality.rows(), quality.cols());
    for (Eigen::Index i = 0; i < quality.rows(); ++i) {
        for (std::size_t j :
             sample_without_replacement(probs, static_cast<std::size_t>(processing_slots), rng))
            out(i, static_cast<Eigen::Index>(j)) = quality(i, static_cast<Eigen::Index>(j));
    }
    return out;
}

double error_multiplier(double load, const InvestorProfile& investor) {
    if (!(load >= 0.0)) throw InvalidArgument("error_multiplier: load must be nonnegative");
    if (load == 0.0) return 0.0;
    const double capacity = investor.total_capacity();
    if (!(capacity > 0.0)) throw InvalidArgument("error_multiplier: investor has no capacity");
    return load / capacity;
}

double processing_error(double content, double load, const InvestorProfile& investor,
                        const MechanismParams& params, Rng& rng) {
    std::normal_distribution<double> noise(0.0, 1.0);
    const double eps = params.error_scale * noise(rng);
    const double g = error_multiplier(load, investor);
    if (eps == 0.0 || g == 0.0) return content;
    return content + eps * g;
}

double strategic_objective(double structure, double content, const MechanismParams& params,
                           const QualityTechnology& tech, const InvestorProfile& representative,
                           const SolverConfig& cfg, const LoadMap& load_map) {
    const double cost = params.complexity_cost * structure * structure;
    const double bad_news = std::max(0.0, -content);
    if (bad_news == 0.0 || params.complexity_benefit == 0.0) return -cost;
    const Disclosure d = Disclosure::from_structure(0, content, structure, load_map);
    const AllocationResult alloc = solve_allocation(representative, std::span(&d, 1), tech, cfg);
    return params.complexity_benefit * bad_news * (1.0 - alloc.quality[0]) - cost;
}

StrategicChoice strategic_complexity(double content, const MechanismParams& params,
                                     const QualityTechnology& tech,
                                     const InvestorProfile& representative,
                                     const SolverConfig& cfg, const LoadMap& load_map) {
    params.validate();
    if (!std::isfinite(content)) throw InvalidArgument("strategic_complexity: content must be finite");
    auto objective = [&](double s) {
        return strategic_objective(s, content, params, tech, representative, cfg, load_map);
    };
    // No bad news to bury: any complexity is pure cost.
    if (content >= 0.0 || params.complexity_benefit == 0.0) return {0.0, objective(0.0)};

    const double upper = params.max_structure;
    const double h = upper / (kCoarseGridPoints - 1);
    int best = 0;
    double best_value = objective(0.0);
    for (int k = 1; k < kCoarseGridPoints; ++k) {
        const double v = objective(k * h);
        if (v > best_value) {
            best_value = v;
            best = k;
        }
    }

    double lo = std::max(0.0, (best - 1) * h);
    double hi = std::min(upper, (best + 1) * h);
    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - ratio * (hi - lo);
    double x2 = lo + ratio * (hi - lo);
    double f1 = objective(x1);
    double f2 = objective(x2);
    while (hi - lo > kGoldenTolerance) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = objective(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = objective(x1);
        }
    }
    const double refined = 0.5 * (lo + hi);
    const double refined_value = objective(refined);
    if (refined_value >= best_value) return {refined, refined_value};
    return {best * h, best_value};
}

}  // namespace cogload::mech
