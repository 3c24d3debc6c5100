#pragma once

// The three channels through which load acts on outcomes: selective
// attention, noisy processing, and firms choosing complexity.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cogload/model.hpp"
#include "cogload/solver.hpp"

namespace cogload::mech {

using Rng = std::mt19937_64;

struct MechanismParams {
    double gamma = 0.05;              // load sensitivity of attention
    double error_scale = 0.1;         // std. dev. of base processing noise
    double complexity_benefit = 1.0;  // gain per unit of unincorporated bad news
    double complexity_cost = 0.1;     // quadratic cost coefficient
    double max_structure = 30.0;      // upper end of the complexity search
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// softmax(-gamma * loads), computed with a max shift.
std::vector<double> attention_probabilities(std::span<const double> loads, double gamma);

/// Draws `count` distinct indices, each successive draw proportional to the
/// remaining probabilities.
std::vector<std::size_t> sample_without_replacement(std::span<const double> probabilities,
                                                    std::size_t count, Rng& rng);

/// Zeroes the quality of assets an investor does not get to. Each row keeps
/// `processing_slots` assets sampled by attention_probabilities.
Eigen::MatrixXd apply_selective_attention(const Eigen::MatrixXd& quality,
                                          std::span<const double> loads, double gamma,
                                          int processing_slots, Rng& rng);

/// g(L, capacity) = L / (attention + memory capacity), using effective
/// capacities.
double error_multiplier(double load, const InvestorProfile& investor);

/// content + eps * g with eps ~ N(0, error_scale^2). Always consumes one normal
/// draw so streams stay aligned across parameter values.
double processing_error(double content, double load, const InvestorProfile& investor,
                        const MechanismParams& params, Rng& rng);

/// Firm objective at structure S: benefit * max(0, -content) * (1 - Qbar(S))
/// - cost * S^2, where Qbar is the representative investor's quality on this
/// disclosure alone.
double strategic_objective(double structure, double content, const MechanismParams& params,
                           const QualityTechnology& tech, const InvestorProfile& representative,
                           const SolverConfig& cfg, const LoadMap& load_map = {});

struct StrategicChoice {
    double structure = 0.0;
    double objective = 0.0;
};

/// Maximizes strategic_objective over [0, max_structure]: coarse grid, then
/// golden-section refinement in the bracket around the best grid point.
StrategicChoice strategic_complexity(double content, const MechanismParams& params,
                                     const QualityTechnology& tech,
                                     const InvestorProfile& representative,
                                     const SolverConfig& cfg, const LoadMap& load_map = {});

}  // namespace cogload::mech
