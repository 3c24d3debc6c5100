#pragma once

// Primitive pieces of the cognitive-load market model: disclosures, investor
// capacities, the processing-quality technology and investor utility. Every
// function here is pure.

#include <span>
#include <vector>

namespace cogload {

/// Linear map from a disclosure's presentation complexity to the two load
/// components. The defaults make working memory the binding resource.
struct LoadMap {
    double attention_per_structure = 0.5;
    double memory_per_structure = 1.0;

    void validate() const;
    /// Structure level whose cognitive load equals `load`.
    double structure_for_load(double load) const;
};

struct Disclosure {
    int firm_id = 0;
    double content = 0.0;    // signed economic significance, value units
    double structure = 0.0;  // presentation complexity
    double attention_load = 0.0;
    double memory_load = 0.0;

    static Disclosure from_structure(int firm_id, double content, double structure,
                                     const LoadMap& map = {});

    double load() const;
    void validate() const;
};

/// The cognitive load of a disclosure: the larger of its attention and
/// working-memory requirements.
double cognitive_load(const Disclosure& d);

struct InvestorProfile {
    int investor_id = 0;
    double attention_capacity = 1.0;
    double memory_capacity = 1.0;
    double market_weight = 0.0;
    double sophistication = 1.0;  // in [0, 1], scales both capacities

    double effective_attention() const { return attention_capacity * sophistication; }
    double effective_memory() const { return memory_capacity * sophistication; }
    double total_capacity() const { return effective_attention() + effective_memory(); }

    void validate() const;
};

/// Per-asset resource allocations of N investors over M assets.
struct AllocationMatrix {
    std::vector<std::vector<double>> attention;
    std::vector<std::vector<double>> memory;

    /// True when entries are nonnegative and every row respects the investor's
    /// effective budgets up to `tolerance`.
    bool feasible(std::span<const InvestorProfile> investors, double tolerance) const;
};

/// Saturating-exponential processing technology
///   Q = (1 - exp(-a * theta_a / L_A)) * (1 - exp(-b * theta_w / L_W)).
/// A zero load component contributes a factor of one.
struct QualityTechnology {
    double saturation_attention = 1.0;
    double saturation_memory = 1.0;

    void validate() const;
};

double processing_quality(double theta_a, double theta_w, const Disclosure& d,
                          const QualityTechnology& tech);

struct QualityGradient {
    double attention = 0.0;
    double memory = 0.0;
};

/// Analytic partial derivatives of processing_quality.
QualityGradient quality_gradient(double theta_a, double theta_w, const Disclosure& d,
                                 const QualityTechnology& tech);

/// Sum of |value_j| * q_j.
double investor_utility(std::span<const double> q_row, std::span<const double> values);

}  // namespace cogload
