#pragma once

// Per-investor allocation of attention and working memory across disclosures.
//
// The investor maximizes sum_j |C_j| * Q(theta_a_j, theta_w_j; L_j) subject to
// sum_j theta_a_j <= capacity_a, sum_j theta_w_j <= capacity_w, theta >= 0.
// Q is a product of two saturating factors; it is increasing in each resource
// but not jointly concave near the origin (an asset with no resources has a
// zero gradient in both coordinates), so the program has local maxima on the
// faces of the budget set. solve_allocation therefore runs spectral projected
// gradient ascent from several supports and keeps the best KKT point.

#include <span>
#include <vector>

#include "cogload/model.hpp"

namespace cogload {

struct SolverConfig {
    int max_iterations = 5000;
    double step_size = 0.05;  // initial spectral step
    double kkt_tolerance = 1e-6;
    double budget_tolerance = 1e-9;

    void validate() const;
};

struct ShadowPrices {
    double attention = 0.0;
    double memory = 0.0;
};

/// One investor's row of the allocation matrix.
struct AllocationRow {
    std::vector<double> attention;
    std::vector<double> memory;
};

struct AllocationResult {
    AllocationRow allocation;
    ShadowPrices shadow;
    std::vector<double> quality;
    double utility = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;  // summed over starts
};

/// Throws NonConvergence when no start reaches kkt_tolerance within
/// max_iterations.
AllocationResult solve_allocation(const InvestorProfile& investor,
                                  std::span<const Disclosure> disclosures,
                                  const QualityTechnology& tech, const SolverConfig& cfg = {});

/// Marginal utility of each resource at each asset, |C_j| * dQ_j/dtheta.
struct MarginalValues {
    std::vector<double> attention;
    std::vector<double> memory;
};

MarginalValues marginal_values(const AllocationRow& row, std::span<const Disclosure> disclosures,
                               const QualityTechnology& tech);

/// Mean marginal value over interior entries (theta > 10 * budget_tolerance);
/// zero when the budget is slack or nothing is interior.
ShadowPrices estimate_shadow_prices(const AllocationRow& row, const InvestorProfile& investor,
                                    std::span<const Disclosure> disclosures,
                                    const QualityTechnology& tech,
                                    double budget_tolerance = 1e-9);

/// Stationarity residual: |dU/dtheta - lambda| on interior entries and
/// max(0, dU/dtheta - lambda) on boundary entries, maximized over assets and
/// both resources.
double kkt_residual(const AllocationRow& row, const ShadowPrices& shadow,
                    const InvestorProfile& investor, std::span<const Disclosure> disclosures,
                    const QualityTechnology& tech, double budget_tolerance = 1e-9);

/// Euclidean projection onto {x >= 0, sum x <= budget}.
std::vector<double> project_onto_budget(std::span<const double> point, double budget);

std::vector<double> realized_quality(const AllocationRow& row,
                                     std::span<const Disclosure> disclosures,
                                     const QualityTechnology& tech);

double allocation_utility(const AllocationRow& row, std::span<const Disclosure> disclosures,
                          const QualityTechnology& tech);

}  // namespace cogload
