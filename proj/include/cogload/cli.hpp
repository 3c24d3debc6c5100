#pragma once

// Experiment configuration and the command-line entry point.
//
// A config is one JSON document. Every section is optional and falls back to
// library defaults; unknown keys anywhere are rejected. Each run writes the
// fully resolved config next to its outputs, and that file alone reproduces
// the run.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cogload/did.hpp"
#include "cogload/market.hpp"
#include "cogload/simulate.hpp"
#include "cogload/textmetrics.hpp"

namespace cogload::cli {

using Json = nlohmann::ordered_json;

struct EstimationJob {
    did::DidSpec spec;
    std::string panel;  // input CSV
    int event_pre = 5;
    int event_post = 6;
    int placebo_draws = 500;
};

struct SweepJob {
    market::MarketSpec market;
    std::vector<double> loads{0.5, 1.0, 2.0, 4.0, 8.0};
    std::vector<double> high_capacity_shares{0.2, 0.5, 0.8};
    market::PricingRule rule = market::PricingRule::anchored;
};

struct TextJob {
    std::string manifest;
    std::string corpus_dir;
    std::string stoplist;  // empty: built-in abbreviations
    std::size_t shingle_k = 8;
    bool strip_markup = true;
    text::ReferenceScope scope = text::ReferenceScope::same_period;
};

struct ExperimentConfig {
    std::uint64_t seed = 20240601;
    int threads = 1;
    std::string out_dir;
    sim::SimulationInputs simulation;
    EstimationJob estimation;
    SweepJob sweep;
    TextJob text;

    /// Copies the master seed into every seeded component.
    void apply_seed();
    void validate() const;
};

/// Strict parse; throws ConfigError naming the offending key.
ExperimentConfig parse_config(const Json& doc);
ExperimentConfig load_config(const std::string& path);
Json to_json(const ExperimentConfig& cfg);

/// Runs the command line and returns the process exit code: 0 success,
/// 2 configuration error, 3 numerical failure, 4 data error. Failures are
/// reported on `err` as one JSON line.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace cogload::cli
