#include "cogload/market.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <utility>

#include <fmt/format.h>

#include "cogload/error.hpp"

namespace cogload::market {

void MarketState::validate() const {
    const std::size_t n = investors.size();
    const std::size_t m = disclosures.size();
    if (fundamental_values.size() != m || anchor_prices.size() != m)
        throw InvalidArgument("market state: value vectors must have one entry per disclosure");
    if (static_cast<std::size_t>(quality.rows()) != n ||
        static_cast<std::size_t>(quality.cols()) != m)
        throw InvalidArgument("market state: quality matrix must be investors x disclosures");
    double weight_sum = 0.0;
    for (const InvestorProfile& inv : investors) {
        inv.validate();
        weight_sum += inv.market_weight;
    }
    if (std::abs(weight_sum - 1.0) > 1e-12)
        throw InvalidArgument(fmt::format("market weights sum to {}, expected 1", weight_sum));
    for (const Disclosure& d : disclosures) d.validate();
    if ((quality.array() < 0.0).any() || (quality.array() > 1.0).any())
        throw InvalidArgument("market state: quality entries must lie in [0, 1]");
}

std::vector<double> aggregate_quality(const MarketState& state) {
    std::vector<double> agg(state.n_assets(), 0.0);
    for (std::size_t i = 0; i < state.n_investors(); ++i) {
        const double w = state.investors[i].market_weight;
        for (std::size_t j = 0; j < state.n_assets(); ++j)
            agg[j] += w * state.quality(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    return agg;
}

std::vector<double> equilibrium_prices(const MarketState& state, PricingRule rule) {
    state.validate();
    const std::vector<double> agg = aggregate_quality(state);
    std::vector<double> prices(state.n_assets());
    for (std::size_t j = 0; j < prices.size(); ++j) {
        const double v = state.fundamental_values[j];
        const double p0 = state.anchor_prices[j];
        prices[j] = rule == PricingRule::anchored ? p0 + agg[j] * (v - p0) : agg[j] * v;
    }
    return prices;
}

double perceived_price(double anchor, std::span<const double> weights,
                       std::span<const double> quality, std::span<const double> perceived_values) {
    if (weights.size() != quality.size() || weights.size() != perceived_values.size())
        throw InvalidArgument("perceived_price: weights, quality and values must align");
    double shift = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i)
        shift += weights[i] * quality[i] * (perceived_values[i] - anchor);
    return anchor + shift;
}

std::vector<double> mispricing(const MarketState& state, std::span<const double> prices) {
    if (prices.size() != state.n_assets())
        throw InvalidArgument("mispricing: one price per asset required");
    std::vector<double> gap(prices.size());
    for (std::size_t j = 0; j < prices.size(); ++j)
        gap[j] = std::abs(prices[j] - state.fundamental_values[j]);
    return gap;
}

Eigen::MatrixXd solve_quality(std::span<const InvestorProfile> investors,
                              std::span<const Disclosure> disclosures,
                              const QualityTechnology& tech, const SolverConfig& cfg) {
    Eigen::MatrixXd q(static_cast<Eigen::Index>(investors.size()),
                      static_cast<Eigen::Index>(disclosures.size()));
    std::map<std::pair<double, double>, std::vector<double>> cache;
    for (std::size_t i = 0; i < investors.size(); ++i) {
        const InvestorProfile& inv = investors[i];
        const auto key = std::make_pair(inv.effective_attention(), inv.effective_memory());
        auto it = cache.find(key);
        if (it == cache.end())
            it = cache.emplace(key, solve_allocation(inv, disclosures, tech, cfg).quality).first;
        for (std::size_t j = 0; j < disclosures.size(); ++j)
            q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = it->second[j];
    }
    return q;
}

std::vector<SweepRow> proposition2_sweep(const MarketState& base, std::span<const double> load_grid,
                                         const QualityTechnology& tech, const SolverConfig& cfg,
                                         const LoadMap& load_map, PricingRule rule) {
    if (load_grid.size() < 3) throw InvalidArgument("proposition2_sweep: need at least 3 load levels");
    for (std::size_t k = 0; k < load_grid.size(); ++k) {
        if (!(load_grid[k] >= 0.0) || !std::isfinite(load_grid[k]))
            throw InvalidArgument("proposition2_sweep: loads must be finite and nonnegative");
        if (k > 0 && load_grid[k] < load_grid[k - 1])
            throw InvalidArgument("proposition2_sweep: load grid must be nondecreasing");
    }
    load_map.validate();

    std::vector<SweepRow> rows;
    rows.reserve(load_grid.size());
    MarketState state = base;
    for (double load : load_grid) {
        const double structure = load_map.structure_for_load(load);
        for (Disclosure& d : state.disclosures)
            d = Disclosure::from_structure(d.firm_id, d.content, structure, load_map);
        state.quality = solve_quality(state.investors, state.disclosures, tech, cfg);
        const std::vector<double> prices = equilibrium_prices(state, rule);
        const std::vector<double> gaps = mispricing(state, prices);
        double mean = 0.0;
        for (double g : gaps) mean += g;
        mean /= static_cast<double>(gaps.size());
        rows.push_back({load, mean});
    }
    return rows;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
    out << "load,mean_mispricing\n";
    for (const SweepRow& r : rows) out << fmt::format("{},{}\n", r.load, r.mean_mispricing);
}

void MarketSpec::validate() const {
    if (n_investors <= 0 || n_assets <= 0)
        throw InvalidArgument("market spec: investor and asset counts must be positive");
    if (!(high_capacity_share >= 0.0 && high_capacity_share <= 1.0))
        throw InvalidArgument("market spec: high_capacity_share must lie in [0, 1]");
    if (!(high_sophistication > 0.0 && high_sophistication <= 1.0) ||
        !(low_sophistication > 0.0 && low_sophistication <= 1.0))
        throw InvalidArgument("market spec: sophistication levels must lie in (0, 1]");
    if (!(attention_capacity > 0.0) || !(memory_capacity > 0.0))
        throw InvalidArgument("market spec: capacities must be positive");
    if (!(value_shock_std >= 0.0) || !(structure >= 0.0))
        throw InvalidArgument("market spec: value_shock_std and structure must be nonnegative");
}

MarketState make_market(const MarketSpec& spec, const LoadMap& load_map) {
    spec.validate();
    load_map.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> shock(0.0, 1.0);

    MarketState state;
    const int n_high =
        static_cast<int>(std::lround(spec.high_capacity_share * static_cast<double>(spec.n_investors)));
    const double weight = 1.0 / static_cast<double>(spec.n_investors);
    for (int i = 0; i < spec.n_investors; ++i) {
        InvestorProfile inv;
        inv.investor_id = i;
        inv.attention_capacity = spec.attention_capacity;
        inv.memory_capacity = spec.memory_capacity;
        inv.market_weight = weight;
        inv.sophistication = i < n_high ? spec.high_sophistication : spec.low_sophistication;
        state.investors.push_back(inv);
    }
    // Absorb rounding so the weights sum to one exactly enough for validate().
    double sum = 0.0;
    for (const InvestorProfile& inv : state.investors) sum += inv.market_weight;
    state.investors.back().market_weight += 1.0 - sum;

    for (int j = 0; j < spec.n_assets; ++j) {
        const double anchor = spec.anchor_price;
        const double value = anchor + spec.value_shock_std * shock(rng);
        state.anchor_prices.push_back(anchor);
        state.fundamental_values.push_back(value);
        state.disclosures.push_back(
            Disclosure::from_structure(j, value - anchor, spec.structure, load_map));
    }
    state.quality = Eigen::MatrixXd::Zero(spec.n_investors, spec.n_assets);
    return state;
}

}  // namespace cogload::market
