#pragma once

// Price formation from aggregated processing quality, mispricing, and the
// load sweep used to study complexity versus price discovery.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cogload/model.hpp"
#include "cogload/solver.hpp"

namespace cogload::market {

enum class PricingRule {
    /// P = P0 + (sum_i w_i Q_ij) (V - P0): partial adjustment from the anchor.
    anchored,
    /// P = sum_i w_i Q_ij V: prices proportional to processed value.
    literal,
};

struct MarketState {
    std::vector<InvestorProfile> investors;
    std::vector<Disclosure> disclosures;
    std::vector<double> fundamental_values;
    std::vector<double> anchor_prices;
    Eigen::MatrixXd quality;  // investors x assets, entries in [0, 1]

    std::size_t n_investors() const { return investors.size(); }
    std::size_t n_assets() const { return disclosures.size(); }

    /// Checks dimensions, quality range, and that market weights sum to one
    /// within 1e-12.
    void validate() const;
};

/// Column sums of the weight-scaled quality matrix, sum_i w_i Q_ij.
std::vector<double> aggregate_quality(const MarketState& state);

std::vector<double> equilibrium_prices(const MarketState& state,
                                       PricingRule rule = PricingRule::anchored);

/// Anchored price of one asset when investors act on their own perceived
/// values: P0 + sum_i w_i Q_i (perceived_i - P0). With perceived_i = V for all
/// i this equals the anchored equilibrium price.
double perceived_price(double anchor, std::span<const double> weights,
                       std::span<const double> quality, std::span<const double> perceived_values);

/// |P_j - V_j| per asset.
std::vector<double> mispricing(const MarketState& state, std::span<const double> prices);

/// Solves every investor's allocation problem against the state's disclosures
/// and returns the realized quality matrix. Investors with identical effective
/// capacities share one solve.
Eigen::MatrixXd solve_quality(std::span<const InvestorProfile> investors,
                              std::span<const Disclosure> disclosures,
                              const QualityTechnology& tech, const SolverConfig& cfg);

struct SweepRow {
    double load = 0.0;
    double mean_mispricing = 0.0;
};

/// For each load level, resets every disclosure's structure to produce that
/// load, re-solves all investors and records mean |P - V|. The grid must be
/// nondecreasing with at least three points.
std::vector<SweepRow> proposition2_sweep(const MarketState& base, std::span<const double> load_grid,
                                         const QualityTechnology& tech, const SolverConfig& cfg,
                                         const LoadMap& load_map = {},
                                         PricingRule rule = PricingRule::anchored);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

/// Recipe for a random static market: equal market weights, the first
/// round(high_capacity_share * n) investors fully sophisticated and the rest at
/// low_sophistication, contents drawn N(0, value_shock_std^2) around anchors.
struct MarketSpec {
    int n_investors = 50;
    int n_assets = 5;
    double high_capacity_share = 0.5;
    double high_sophistication = 1.0;
    double low_sophistication = 0.2;
    double attention_capacity = 1.0;
    double memory_capacity = 1.0;
    double anchor_price = 100.0;
    double value_shock_std = 1.0;
    double structure = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// The quality matrix of the returned state is zero; call solve_quality to
/// fill it.
MarketState make_market(const MarketSpec& spec, const LoadMap& load_map = {});

}  // namespace cogload::market
