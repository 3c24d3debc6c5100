#include "cogload/simulate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include <fmt/format.h>

#include "cogload/error.hpp"
#include "cogload/market.hpp"
#include "cogload/parallel.hpp"

namespace cogload::sim {

namespace {

constexpr double kSpeedThreshold = 0.9;
constexpr double kResidualGapThreshold = 0.1;
constexpr double kDegenerateGap = 1e-9;
constexpr std::size_t kMaxEventAssets = 16;

// Per-event cache of daily quality, keyed by investor capacity type and the
// bitmask of assets worked on that day.
class QualityCache {
public:
    QualityCache(std::span<const Disclosure> assets, const QualityTechnology& tech,
                 const SolverConfig& solver)
        : assets_(assets), tech_(tech), solver_(solver), m_(assets.size()) {}

    int type_of(const InvestorProfile& inv) {
        for (std::size_t t = 0; t < types_.size(); ++t)
            if (types_[t].effective_attention() == inv.effective_attention() &&
                types_[t].effective_memory() == inv.effective_memory())
                return static_cast<int>(t);
        types_.push_back(inv);
        const std::size_t slots = std::size_t{1} << m_;
        quality_.resize(types_.size() * slots * m_, 0.0);
        known_.resize(types_.size() * slots, 0);
        return static_cast<int>(types_.size() - 1);
    }

    const double* quality(int type, unsigned mask) {
        const std::size_t slot = static_cast<std::size_t>(type) * (std::size_t{1} << m_) + mask;
        double* q = &quality_[slot * m_];
        if (!known_[slot]) {
            std::vector<Disclosure> chosen;
            std::vector<std::size_t> index;
            for (std::size_t j = 0; j < m_; ++j)
                if (mask & (1u << j)) {
                    chosen.push_back(assets_[j]);
                    index.push_back(j);
                }
            const AllocationResult r = solve_allocation(types_[static_cast<std::size_t>(type)],
                                                        chosen, tech_, solver_);
            for (std::size_t k = 0; k < index.size(); ++k) q[index[k]] = r.quality[k];
            known_[slot] = 1;
        }
        return q;
    }

private:
    std::span<const Disclosure> assets_;
    const QualityTechnology& tech_;
    const SolverConfig& solver_;
    std::size_t m_;
    std::vector<InvestorProfile> types_;
    std::vector<double> quality_;
    std::vector<char> known_;
};

// Weighted draw of `count` distinct assets from `available`.
unsigned draw_assets(unsigned available, int count, std::span<const double> weight,
                     std::uniform_real_distribution<double>& unit, Rng& rng) {
    unsigned chosen = 0;
    for (int k = 0; k < count; ++k) {
        const unsigned open = available & ~chosen;
        double total = 0.0;
        for (std::size_t j = 0; j < weight.size(); ++j)
            if (open & (1u << j)) total += weight[j];
        double u = unit(rng) * total;
        std::size_t pick = weight.size();
        for (std::size_t j = 0; j < weight.size(); ++j) {
            if (!(open & (1u << j))) continue;
            if (pick == weight.size()) pick = j;
            if (weight[j] <= 0.0) continue;
            pick = j;
            if (u < weight[j]) break;
            u -= weight[j];
        }
        chosen |= 1u << pick;
    }
    return chosen;
}

double truncated_normal(double mean, double sd, double lo, double hi, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const double x = mean + sd * z(rng);
        if (x >= lo && x <= hi) return x;
    }
    return std::clamp(mean, lo, hi);
}

struct FirmTraits {
    double log_market_cap = 0.0;
    double sophistication_mix = 0.0;
    double base_structure = 0.0;
    int group = 0;
};

std::vector<InvestorProfile> investor_base(const SimConfig& cfg, double high_share) {
    std::vector<InvestorProfile> investors(static_cast<std::size_t>(cfg.n_investors));
    const int n_high = static_cast<int>(std::lround(high_share * cfg.n_investors));
    const double weight = 1.0 / static_cast<double>(cfg.n_investors);
    for (int i = 0; i < cfg.n_investors; ++i) {
        InvestorProfile& inv = investors[static_cast<std::size_t>(i)];
        inv.investor_id = i;
        inv.attention_capacity = cfg.attention_capacity;
        inv.memory_capacity = cfg.memory_capacity;
        inv.market_weight = weight;
        inv.sophistication = i < n_high ? cfg.high_sophistication : cfg.low_sophistication;
    }
    return investors;
}

struct FirmRun {
    std::vector<PanelObservation> rows;
    std::vector<std::pair<int, int>> excluded;
    std::vector<PricePath> paths;
};

FirmRun simulate_firm(const SimulationInputs& in, int firm, const FirmTraits& traits, Rng& rng) {
    const SimConfig& cfg = in.sim;
    std::normal_distribution<double> z(0.0, 1.0);
    const bool keep_paths = std::find(cfg.price_path_firms.begin(), cfg.price_path_firms.end(),
                                      firm) != cfg.price_path_firms.end();
    const int adoption = cfg.adoption_period(traits.group);
    const EventProtocol protocol{cfg.trading_days_per_period, cfg.processing_slots,
                                 cfg.completion_quality};

    FirmRun run;
    double log_cap = traits.log_market_cap;
    double value = cfg.initial_price;
    double price = cfg.initial_price;
    for (int t = 0; t < cfg.n_periods; ++t) {
        log_cap += cfg.log_market_cap_drift_std * z(rng);
        const double mix = std::clamp(
            traits.sophistication_mix + cfg.sophistication_mix_drift_std * z(rng), 0.0, 1.0);
        const double coverage = std::max(
            0.0, std::round(cfg.analyst_coverage_base +
                            cfg.analyst_coverage_per_log_cap * (log_cap - cfg.log_market_cap_mean) +
                            cfg.analyst_coverage_noise_std * z(rng)));

        const bool treated = adoption >= 0 && t >= adoption;
        const double multiplier = treated ? cfg.treatment_multiplier(t - adoption) : 1.0;
        const double structure =
            traits.base_structure * std::exp(cfg.structure_period_std * z(rng)) * multiplier;
        value += cfg.value_shock_std * z(rng);

        EventSetup setup;
        setup.anchor_price = price;
        setup.fundamental_value = value;
        setup.focal = Disclosure::from_structure(firm, value - price, structure, in.load_map);
        for (int k = 0; k < cfg.concurrent_disclosures; ++k) {
            const double s = truncated_normal(cfg.structure_mean, cfg.structure_std,
                                              cfg.structure_min, cfg.structure_max, rng);
            setup.competing.push_back(
                Disclosure::from_structure(-1 - k, cfg.value_shock_std * z(rng), s, in.load_map));
        }

        const std::vector<InvestorProfile> investors = investor_base(cfg, mix);
        EventResult event;
        try {
            event = simulate_event(setup, investors, protocol, in.mechanisms, in.tech, in.solver, rng);
        } catch (const NonConvergence& e) {
            throw NonConvergence(fmt::format("firm {} period {}: {}", firm, t, e.what()),
                                 e.residual());
        }
        if (event.degenerate) {
            run.excluded.emplace_back(firm, t);
            continue;
        }
        price = event.price_path.back();

        PanelObservation obs;
        obs.firm_id = firm;
        obs.period = t;
        obs.group = traits.group;
        obs.cluster_id = traits.group;
        obs.treated = treated ? 1 : 0;
        obs.adoption_period = adoption;
        obs.outcome = event.outcome;
        obs.controls = {log_cap, mix, coverage};
        obs.structure = structure;
        obs.content = setup.focal.content;
        run.rows.push_back(obs);
        if (keep_paths) run.paths.push_back({firm, t, value, std::move(event.price_path)});
    }
    return run;
}

}  // namespace

void SimConfig::validate() const {
    if (n_firms <= 0 || n_investors <= 0 || n_periods <= 0 || trading_days_per_period <= 0)
        throw InvalidArgument("simulation counts must be positive");
    if (!(treatment_load_multiplier > 0.0 && treatment_load_multiplier <= 1.0))
        throw InvalidArgument("treatment_load_multiplier must lie in (0, 1]");
    if (treatment_phase_in_periods < 1)
        throw InvalidArgument("treatment_phase_in_periods must be at least 1");
    for (const auto& [group, period] : treatment_start_periods) {
        if (group <= 0) throw InvalidArgument("treated group ids must be positive (0 is never treated)");
        if (period < 0 || period > n_periods)
            throw InvalidArgument(fmt::format("adoption period {} of group {} outside [0, {}]",
                                              period, group, n_periods));
    }
    if (!(never_treated_share >= 0.0 && never_treated_share <= 1.0))
        throw InvalidArgument("never_treated_share must lie in [0, 1]");
    if (!(sophistication_mix_min >= 0.0 && sophistication_mix_min <= sophistication_mix_max &&
          sophistication_mix_max <= 1.0))
        throw InvalidArgument("sophistication mix range must satisfy 0 <= min <= max <= 1");
    if (!(high_sophistication >= 0.0 && high_sophistication <= 1.0) ||
        !(low_sophistication >= 0.0 && low_sophistication <= 1.0))
        throw InvalidArgument("sophistication levels must lie in [0, 1]");
    if (!(attention_capacity > 0.0) || !(memory_capacity > 0.0))
        throw InvalidArgument("investor capacities must be positive");
    if (concurrent_disclosures < 0 ||
        static_cast<std::size_t>(concurrent_disclosures) + 1 > kMaxEventAssets)
        throw InvalidArgument("concurrent_disclosures must lie in [0, 15]");
    if (processing_slots < 1) throw InvalidArgument("processing_slots must be at least 1");
    if (!(completion_quality > 0.0 && completion_quality <= 1.0))
        throw InvalidArgument("completion_quality must lie in (0, 1]");
    if (!(structure_min >= 0.0 && structure_min <= structure_max) || !(structure_std >= 0.0) ||
        !(structure_period_std >= 0.0))
        throw InvalidArgument("structure distribution parameters are inconsistent");
    if (!(value_shock_std >= 0.0) || !(log_market_cap_std >= 0.0) ||
        !(log_market_cap_drift_std >= 0.0) || !(sophistication_mix_drift_std >= 0.0) ||
        !(analyst_coverage_noise_std >= 0.0))
        throw InvalidArgument("standard deviations must be nonnegative");
}

int SimConfig::adoption_period(int group) const {
    const auto it = treatment_start_periods.find(group);
    return it == treatment_start_periods.end() ? -1 : it->second;
}

double SimConfig::treatment_multiplier(int periods_since_adoption) const {
    if (periods_since_adoption < 0) return 1.0;
    const double phase = std::min(1.0, static_cast<double>(periods_since_adoption + 1) /
                                           static_cast<double>(treatment_phase_in_periods));
    return 1.0 - (1.0 - treatment_load_multiplier) * phase;
}

double EventOutcome::log_speed() const { return std::log(speed_days); }
double EventOutcome::log_duration() const { return std::log1p(duration_days); }

EventOutcome extract_outcome(std::span<const double> path, double fundamental) {
    if (path.size() < 2) throw InvalidArgument("extract_outcome: path needs at least one trading day");
    const std::size_t days = path.size() - 1;
    const double anchor = path[0];
    const double initial_gap = std::abs(fundamental - anchor);
    const double total = path[days] - anchor;

    EventOutcome out;
    if (std::abs(total) <= kDegenerateGap * std::max(1.0, initial_gap)) {
        out.speed_days = static_cast<double>(days);
        out.speed_censored = true;
        out.accuracy = 0.0;
    } else {
        std::size_t speed = days;
        for (std::size_t d = 1; d <= days; ++d) {
            if ((path[d] - anchor) / total >= kSpeedThreshold - 1e-12) {
                speed = d;
                break;
            }
        }
        out.speed_days = static_cast<double>(speed);
        out.accuracy = std::clamp((path[1] - anchor) / total, 0.0, 1.0);
    }

    std::size_t last = 0;
    for (std::size_t d = 0; d <= days; ++d)
        if (std::abs(path[d] - fundamental) > kResidualGapThreshold * initial_gap) last = d;
    out.duration_days = static_cast<double>(last);
    out.duration_censored = last == days;
    return out;
}

EventResult simulate_event(const EventSetup& setup, std::span<const InvestorProfile> investors,
                           const EventProtocol& protocol, const mech::MechanismParams& mechanisms,
                           const QualityTechnology& tech, const SolverConfig& solver, Rng& rng) {
    EventResult result;
    const double anchor = setup.anchor_price;
    const double content = setup.fundamental_value - anchor;
    if (std::abs(content) < kDegenerateGap) {
        result.degenerate = true;
        return result;
    }
    if (protocol.trading_days < 1 || protocol.processing_slots < 1)
        throw InvalidArgument("simulate_event: need at least one trading day and one slot");

    std::vector<Disclosure> assets;
    assets.reserve(1 + setup.competing.size());
    assets.push_back(setup.focal);
    assets.front().content = content;
    assets.insert(assets.end(), setup.competing.begin(), setup.competing.end());
    const std::size_t m = assets.size();
    if (m > kMaxEventAssets) throw InvalidArgument("simulate_event: too many concurrent disclosures");

    std::vector<double> loads(m);
    for (std::size_t j = 0; j < m; ++j) loads[j] = assets[j].load();
    const std::vector<double> attention = mech::attention_probabilities(loads, mechanisms.gamma);

    QualityCache cache(assets, tech, solver);
    const std::size_t n = investors.size();
    const unsigned all_assets = static_cast<unsigned>((std::size_t{1} << m) - 1);
    std::vector<int> type(n);
    std::vector<unsigned> remaining(n, all_assets);
    std::vector<double> cumulative(n * m, 0.0);
    std::vector<double> weights(n), focal_quality(n, 0.0), perceived(n, anchor);
    std::vector<char> has_read(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        type[i] = cache.type_of(investors[i]);
        weights[i] = investors[i].market_weight;
    }

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    result.price_path.assign(static_cast<std::size_t>(protocol.trading_days) + 1, anchor);
    for (int day = 1; day <= protocol.trading_days; ++day) {
        bool anyone_working = false;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(remaining[i] & 1u)) continue;  // done with the focal disclosure
            anyone_working = true;
            const int count =
                std::min(protocol.processing_slots, std::popcount(remaining[i]));
            const unsigned chosen = draw_assets(remaining[i], count, attention, unit, rng);
            const double* q = cache.quality(type[i], chosen);
            double* qc = &cumulative[i * m];
            for (std::size_t j = 0; j < m; ++j) {
                if (!(chosen & (1u << j))) continue;
                qc[j] = 1.0 - (1.0 - qc[j]) * (1.0 - q[j]);
                if (qc[j] >= protocol.completion_quality) remaining[i] &= ~(1u << j);
            }
            if (chosen & 1u) {
                focal_quality[i] = qc[0];
                // An investor with no capacity extracts nothing; its reading never
                // carries weight in the price.
                if (!has_read[i] && investors[i].total_capacity() > 0.0) {
                    perceived[i] = anchor + mech::processing_error(content, loads[0], investors[i],
                                                                   mechanisms, rng);
                    has_read[i] = 1;
                }
            }
        }
        result.price_path[static_cast<std::size_t>(day)] =
            market::perceived_price(anchor, weights, focal_quality, perceived);
        if (!anyone_working) {
            std::fill(result.price_path.begin() + day + 1, result.price_path.end(),
                      result.price_path[static_cast<std::size_t>(day)]);
            break;
        }
    }
    result.outcome = extract_outcome(result.price_path, setup.fundamental_value);
    return result;
}

Rng firm_stream(std::uint64_t master_seed, int replication, int firm) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(replication), static_cast<std::uint32_t>(firm),
                      0x5eedu};
    return Rng(seq);
}

SimulationResult run_simulation(const SimulationInputs& in, int threads, int replication) {
    const SimConfig& cfg = in.sim;
    cfg.validate();
    in.mechanisms.validate();
    in.tech.validate();
    in.load_map.validate();
    in.solver.validate();

    const auto n_firms = static_cast<std::size_t>(cfg.n_firms);
    std::vector<Rng> streams;
    std::vector<FirmTraits> traits(n_firms);
    streams.reserve(n_firms);
    for (std::size_t f = 0; f < n_firms; ++f) {
        streams.push_back(firm_stream(cfg.rng_seed, replication, static_cast<int>(f)));
        Rng& rng = streams.back();
        std::normal_distribution<double> z(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        FirmTraits& tr = traits[f];
        tr.log_market_cap = cfg.log_market_cap_mean + cfg.log_market_cap_std * z(rng);
        tr.sophistication_mix = cfg.sophistication_mix_min +
                                (cfg.sophistication_mix_max - cfg.sophistication_mix_min) * unit(rng);
        tr.base_structure = truncated_normal(cfg.structure_mean, cfg.structure_std,
                                             cfg.structure_min, cfg.structure_max, rng);
    }

    // Size-phased rollout: largest firms adopt first.
    std::vector<std::size_t> by_size(n_firms);
    std::iota(by_size.begin(), by_size.end(), 0);
    std::stable_sort(by_size.begin(), by_size.end(), [&](std::size_t a, std::size_t b) {
        return traits[a].log_market_cap > traits[b].log_market_cap;
    });
    std::vector<std::pair<int, int>> groups;  // (adoption period, group id)
    for (const auto& [group, period] : cfg.treatment_start_periods) groups.emplace_back(period, group);
    std::stable_sort(groups.begin(), groups.end());
    const auto n_treated = static_cast<std::size_t>(
        std::lround((1.0 - cfg.never_treated_share) * static_cast<double>(n_firms)));
    for (std::size_t rank = 0; rank < n_firms; ++rank) {
        int group = 0;
        if (rank < n_treated && !groups.empty())
            group = groups[rank * groups.size() / n_treated].second;
        traits[by_size[rank]].group = group;
    }

    std::vector<FirmRun> runs(n_firms);
    parallel_for(n_firms, threads, [&](std::size_t f) {
        runs[f] = simulate_firm(in, static_cast<int>(f), traits[f], streams[f]);
    });

    SimulationResult result;
    for (FirmRun& run : runs) {
        result.panel.insert(result.panel.end(), run.rows.begin(), run.rows.end());
        result.excluded.insert(result.excluded.end(), run.excluded.begin(), run.excluded.end());
        for (PricePath& p : run.paths) result.price_paths.push_back(std::move(p));
    }
    return result;
}

const std::vector<const char*> kPanelColumns = {
    "firm_id",        "period",         "group",          "cluster_id",
    "treated",        "adoption_period", "log_speed",     "accuracy",
    "log_duration",   "speed_days",     "duration_days",  "speed_censored",
    "duration_censored", "log_market_cap", "institutional_ownership", "analyst_coverage",
    "structure",      "content"};

void write_panel_csv(std::ostream& out, std::span<const PanelObservation> panel) {
    for (std::size_t c = 0; c < kPanelColumns.size(); ++c)
        out << (c ? "," : "") << kPanelColumns[c];
    out << '\n';
    for (const PanelObservation& o : panel) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},"
                           "{},{},{},{},{}\n",
                           o.firm_id, o.period, o.group, o.cluster_id, o.treated,
                           o.adoption_period, o.outcome.log_speed(), o.outcome.accuracy,
                           o.outcome.log_duration(), o.outcome.speed_days,
                           o.outcome.duration_days, o.outcome.speed_censored ? 1 : 0,
                           o.outcome.duration_censored ? 1 : 0, o.controls.log_market_cap,
                           o.controls.institutional_ownership, o.controls.analyst_coverage,
                           o.structure, o.content);
    }
}

Table panel_table(std::span<const PanelObservation> panel) {
    std::vector<std::vector<double>> cols(kPanelColumns.size());
    for (auto& c : cols) c.reserve(panel.size());
    for (const PanelObservation& o : panel) {
        const double row[] = {static_cast<double>(o.firm_id), static_cast<double>(o.period),
                              static_cast<double>(o.group), static_cast<double>(o.cluster_id),
                              static_cast<double>(o.treated), static_cast<double>(o.adoption_period),
                              o.outcome.log_speed(), o.outcome.accuracy, o.outcome.log_duration(),
                              o.outcome.speed_days, o.outcome.duration_days,
                              o.outcome.speed_censored ? 1.0 : 0.0,
                              o.outcome.duration_censored ? 1.0 : 0.0, o.controls.log_market_cap,
                              o.controls.institutional_ownership, o.controls.analyst_coverage,
                              o.structure, o.content};
        for (std::size_t c = 0; c < cols.size(); ++c) cols[c].push_back(row[c]);
    }
    Table t;
    for (std::size_t c = 0; c < cols.size(); ++c) t.add_column(kPanelColumns[c], std::move(cols[c]));
    return t;
}

void write_price_path_csv(std::ostream& out, const PricePath& path) {
    out << "day,price,fundamental\n";
    for (std::size_t d = 0; d < path.prices.size(); ++d)
        out << fmt::format("{},{},{}\n", d, path.prices[d], path.fundamental);
}

}  // namespace cogload::sim
