#pragma once

// Multi-period, multi-firm disclosure simulation under staggered,
// complexity-reducing treatment.
//
// Each firm-period is one disclosure event. The firm's disclosure competes for
// attention with a handful of concurrent disclosures. Over the trading days of
// the period every investor who has not finished the firm's disclosure picks
// assets to work on (selective attention), splits that day's capacity across
// them (attention solver), accumulates processing quality, and forms a noisy
// reading of the content the first time it touches the disclosure. The
// anchored pricing rule turns the cumulative quality and readings into a daily
// price path, from which speed, accuracy and mispricing duration are read.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "cogload/mechanisms.hpp"
#include "cogload/model.hpp"
#include "cogload/solver.hpp"
#include "cogload/table.hpp"

namespace cogload::sim {

using Rng = mech::Rng;

struct SimConfig {
    int n_firms = 200;
    int n_investors = 50;
    int n_periods = 40;
    int trading_days_per_period = 30;

    /// Adoption period of each treated firm group. Firms are ranked by initial
    /// size; the largest (1 - never_treated_share) are split evenly across the
    /// groups in order of adoption, the rest never adopt.
    std::map<int, int> treatment_start_periods{{1, 10}, {2, 16}, {3, 22}};
    double never_treated_share = 0.25;
    double treatment_load_multiplier = 0.7;
    /// Periods over which the multiplier phases in linearly; 1 applies it in
    /// full from the adoption period.
    int treatment_phase_in_periods = 3;

    // Investor base. Firm-level high-capacity share is drawn uniformly in
    // [min, max] and drifts period to period.
    double sophistication_mix_min = 0.2;
    double sophistication_mix_max = 0.8;
    double sophistication_mix_drift_std = 0.05;
    double high_sophistication = 1.0;
    double low_sophistication = 0.2;
    double attention_capacity = 300.0;  // per trading day
    double memory_capacity = 300.0;

    // Event protocol.
    int concurrent_disclosures = 3;
    int processing_slots = 2;
    double completion_quality = 0.95;

    // Disclosure complexity on a readability-like scale.
    double structure_mean = 18.7;
    double structure_std = 3.4;
    double structure_min = 12.1;
    double structure_max = 28.9;
    double structure_period_std = 0.05;  // log-scale period noise

    double initial_price = 100.0;
    double value_shock_std = 2.0;

    // Control covariates.
    double log_market_cap_mean = 6.0;
    double log_market_cap_std = 1.5;
    double log_market_cap_drift_std = 0.1;
    double analyst_coverage_base = 6.2;
    double analyst_coverage_per_log_cap = 2.0;
    double analyst_coverage_noise_std = 1.0;

    std::uint64_t rng_seed = 20240601;
    std::vector<int> price_path_firms;

    void validate() const;
    int adoption_period(int group) const;  // -1 when never treated
    /// Load multiplier in effect `periods_since_adoption` periods after adoption.
    double treatment_multiplier(int periods_since_adoption) const;
};

struct EventOutcome {
    double speed_days = 0.0;
    double accuracy = 0.0;
    double duration_days = 0.0;
    bool speed_censored = false;
    bool duration_censored = false;

    double log_speed() const;
    double log_duration() const;  // log(1 + days)
};

/// Reads the three outcomes off a daily price path. path[0] is the anchor on
/// the release day, path[d] the close of trading day d.
///   speed:    first day cumulative adjustment reaches 90% of the final one;
///   accuracy: day-1 adjustment over final adjustment, clamped to [0, 1];
///   duration: last day |P - V| exceeds 10% of |V - P0| (0 if only day 0).
/// A path with no net adjustment is speed-censored at the day cap.
EventOutcome extract_outcome(std::span<const double> path, double fundamental);

struct EventSetup {
    double anchor_price = 0.0;
    double fundamental_value = 0.0;
    Disclosure focal;
    std::vector<Disclosure> competing;
};

struct EventProtocol {
    int trading_days = 30;
    int processing_slots = 2;
    double completion_quality = 0.95;
};

struct EventResult {
    std::vector<double> price_path;
    EventOutcome outcome;
    bool degenerate = false;  // |V - P0| < 1e-9; no outcome
};

EventResult simulate_event(const EventSetup& setup, std::span<const InvestorProfile> investors,
                           const EventProtocol& protocol, const mech::MechanismParams& mechanisms,
                           const QualityTechnology& tech, const SolverConfig& solver, Rng& rng);

struct Controls {
    double log_market_cap = 0.0;
    double institutional_ownership = 0.0;
    double analyst_coverage = 0.0;
};

struct PanelObservation {
    int firm_id = 0;
    int period = 0;
    int group = 0;  // 0 = never treated
    int cluster_id = 0;
    int treated = 0;
    int adoption_period = -1;
    EventOutcome outcome;
    Controls controls;
    double structure = 0.0;
    double content = 0.0;
};

struct PricePath {
    int firm_id = 0;
    int period = 0;
    double fundamental = 0.0;
    std::vector<double> prices;
};

struct SimulationResult {
    std::vector<PanelObservation> panel;  // ordered by (firm, period)
    std::vector<std::pair<int, int>> excluded;  // degenerate (firm, period) events
    std::vector<PricePath> price_paths;
};

struct SimulationInputs {
    SimConfig sim;
    mech::MechanismParams mechanisms;
    QualityTechnology tech;
    LoadMap load_map;
    SolverConfig solver;
};

/// Deterministic in (inputs, replication) regardless of `threads`.
SimulationResult run_simulation(const SimulationInputs& inputs, int threads = 1,
                                int replication = 0);

/// Independent stream for one (replication, firm) pair.
Rng firm_stream(std::uint64_t master_seed, int replication, int firm);

extern const std::vector<const char*> kPanelColumns;

void write_panel_csv(std::ostream& out, std::span<const PanelObservation> panel);
/// Same columns as the CSV, in memory.
Table panel_table(std::span<const PanelObservation> panel);
void write_price_path_csv(std::ostream& out, const PricePath& path);

}  // namespace cogload::sim
