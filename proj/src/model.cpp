#include "cogload/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cogload/error.hpp"

namespace cogload {

namespace {

struct Factor {
    double value;
    double slope;
};

// One resource's contribution to quality. A zero load poses no barrier.
Factor resource_factor(double theta, double load, double saturation) {
    if (load == 0.0) return {1.0, 0.0};
    const double rate = saturation / load;
    return {-std::expm1(-rate * theta), rate * std::exp(-rate * theta)};
}

void require_allocations(double theta_a, double theta_w) {
    if (!(theta_a >= 0.0) || !(theta_w >= 0.0))
        throw InvalidArgument("processing_quality: allocations must be nonnegative (got " +
                              std::to_string(theta_a) + ", " + std::to_string(theta_w) + ")");
}

}  // namespace

void LoadMap::validate() const {
    if (!(attention_per_structure >= 0.0) || !(memory_per_structure >= 0.0))
        throw InvalidArgument("load map coefficients must be nonnegative");
    if (attention_per_structure == 0.0 && memory_per_structure == 0.0)
        throw InvalidArgument("load map must have at least one positive coefficient");
}

double LoadMap::structure_for_load(double load) const {
    return load / std::max(attention_per_structure, memory_per_structure);
}

Disclosure Disclosure::from_structure(int firm_id, double content, double structure,
                                      const LoadMap& map) {
    if (!(structure >= 0.0)) throw InvalidArgument("disclosure structure must be nonnegative");
    Disclosure d;
    d.firm_id = firm_id;
    d.content = content;
    d.structure = structure;
    d.attention_load = map.attention_per_structure * structure;
    d.memory_load = map.memory_per_structure * structure;
    return d;
}

double Disclosure::load() const { return cognitive_load(*this); }

void Disclosure::validate() const {
    if (!(attention_load >= 0.0) || !(memory_load >= 0.0))
        throw InvalidArgument("disclosure loads must be nonnegative");
    if (!(structure >= 0.0)) throw InvalidArgument("disclosure structure must be nonnegative");
    if (!std::isfinite(content)) throw InvalidArgument("disclosure content must be finite");
}

double cognitive_load(const Disclosure& d) { return std::max(d.attention_load, d.memory_load); }

void InvestorProfile::validate() const {
    if (!(attention_capacity > 0.0) || !(memory_capacity > 0.0))
        throw InvalidArgument("investor " + std::to_string(investor_id) +
                              ": capacities must be strictly positive");
    if (!(market_weight >= 0.0))
        throw InvalidArgument("investor " + std::to_string(investor_id) +
                              ": market weight must be nonnegative");
    if (!(sophistication >= 0.0 && sophistication <= 1.0))
        throw InvalidArgument("investor " + std::to_string(investor_id) +
                              ": sophistication must lie in [0, 1]");
}

bool AllocationMatrix::feasible(std::span<const InvestorProfile> investors,
                                double tolerance) const {
    if (attention.size() != investors.size() || memory.size() != investors.size()) return false;
    for (std::size_t i = 0; i < investors.size(); ++i) {
        double sum_a = 0.0;
        double sum_w = 0.0;
        for (double v : attention[i]) {
            if (v < 0.0) return false;
            sum_a += v;
        }
        for (double v : memory[i]) {
            if (v < 0.0) return false;
            sum_w += v;
        }
        if (sum_a > investors[i].effective_attention() + tolerance) return false;
        if (sum_w > investors[i].effective_memory() + tolerance) return false;
    }
    return true;
}

void QualityTechnology::validate() const {
    if (!(saturation_attention > 0.0) || !(saturation_memory > 0.0))
        throw InvalidArgument("quality technology saturation parameters must be positive");
}

double processing_quality(double theta_a, double theta_w, const Disclosure& d,
                          const QualityTechnology& tech) {
    require_allocations(theta_a, theta_w);
    const Factor fa = resource_factor(theta_a, d.attention_load, tech.saturation_attention);
    const Factor fw = resource_factor(theta_w, d.memory_load, tech.saturation_memory);
    return fa.value * fw.value;
}

QualityGradient quality_gradient(double theta_a, double theta_w, const Disclosure& d,
                                 const QualityTechnology& tech) {
    require_allocations(theta_a, theta_w);
    const Factor fa = resource_factor(theta_a, d.attention_load, tech.saturation_attention);
    const Factor fw = resource_factor(theta_w, d.memory_load, tech.saturation_memory);
    return {fa.slope * fw.value, fa.value * fw.slope};
}

double investor_utility(std::span<const double> q_row, std::span<const double> values) {
    if (q_row.size() != values.size())
        throw InvalidArgument("investor_utility: quality row has " + std::to_string(q_row.size()) +
                              " entries but " + std::to_string(values.size()) + " values");
    double total = 0.0;
    for (std::size_t j = 0; j < q_row.size(); ++j) total += std::abs(values[j]) * q_row[j];
    return total;
}

}  // namespace cogload
