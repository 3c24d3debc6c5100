#pragma once

// Hand-rolled random case generators for property tests. Every property runs
// a fixed number of cases from a fixed seed; the case index is captured so a
// failure names the input that broke it.

#include <cstdint>
#include <random>
#include <vector>

#include "cogload/model.hpp"

namespace testgen {

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    double normal(double mean = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mean, sd)(rng_); }
    bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

    cogload::Disclosure disclosure(double max_load = 3.0) {
        cogload::Disclosure d;
        d.content = uniform(-3.0, 3.0);
        d.attention_load = uniform(0.05, max_load);
        d.memory_load = uniform(0.05, max_load);
        return d;
    }

    std::vector<cogload::Disclosure> disclosures(int m, double max_load = 3.0) {
        std::vector<cogload::Disclosure> out;
        for (int j = 0; j < m; ++j) out.push_back(disclosure(max_load));
        return out;
    }

    cogload::InvestorProfile investor() {
        cogload::InvestorProfile inv;
        inv.attention_capacity = uniform(0.2, 3.0);
        inv.memory_capacity = uniform(0.2, 3.0);
        inv.sophistication = coin(0.3) ? 1.0 : uniform(0.2, 1.0);
        inv.market_weight = 1.0;
        return inv;
    }

    cogload::QualityTechnology tech() {
        cogload::QualityTechnology t;
        t.saturation_attention = uniform(0.5, 2.0);
        t.saturation_memory = uniform(0.5, 2.0);
        return t;
    }

    std::mt19937_64& engine() { return rng_; }

private:
    std::mt19937_64 rng_;
};

}  // namespace testgen
