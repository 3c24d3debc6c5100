#include <fstream>
#include <set>
#include <string>
#include <type_traits>

#include <fmt/format.h>

#include "cogload/cli.hpp"
#include "cogload/error.hpp"

namespace cogload::cli {

namespace {

// Reads keys from one JSON object and remembers which were consumed, so that
// anything left over can be reported as unknown.
class Section {
public:
    Section(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(fmt::format("'{}' must be a JSON object", label()));
    }

    template <typename T>
    void read(const char* key, T& out) {
        if (!node_.contains(key)) return;
        seen_.insert(key);
        const Json& v = node_.at(key);
        if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!v.is_number_integer() || (std::is_unsigned_v<T> && v.get<std::int64_t>() < 0))
                throw ConfigError(fmt::format("'{}' must be {} integer", name(key),
                                              std::is_unsigned_v<T> ? "a nonnegative" : "an"));
        }
        try {
            out = v.template get<T>();
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(fmt::format("'{}' has the wrong type", name(key)));
        }
    }

    bool has(const char* key) const { return node_.contains(key); }

    Section child(const char* key) {
        seen_.insert(key);
        return Section(node_.at(key), name(key));
    }

    const Json& raw(const char* key) {
        seen_.insert(key);
        return node_.at(key);
    }

    std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const {
        for (const auto& item : node_.items())
            if (!seen_.count(item.key())) throw ConfigError(fmt::format("unknown key '{}'", name(item.key())));
    }

private:
    std::string label() const { return path_.empty() ? "<root>" : path_; }

    const Json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_simulation(Section s, sim::SimConfig& c) {
    s.read("n_firms", c.n_firms);
    s.read("n_investors", c.n_investors);
    s.read("n_periods", c.n_periods);
    s.read("trading_days_per_period", c.trading_days_per_period);
    if (s.has("treatment_start_periods")) {
        const Json& node = s.raw("treatment_start_periods");
        if (!node.is_object())
            throw ConfigError("'simulation.treatment_start_periods' must map group ids to periods");
        c.treatment_start_periods.clear();
        for (const auto& item : node.items()) {
            int group = 0;
            try {
                std::size_t used = 0;
                group = std::stoi(item.key(), &used);
                if (used != item.key().size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ConfigError(fmt::format("'simulation.treatment_start_periods.{}': group id must be an integer",
                                              item.key()));
            }
            if (!item.value().is_number_integer())
                throw ConfigError(fmt::format("'simulation.treatment_start_periods.{}' must be an integer period",
                                              item.key()));
            c.treatment_start_periods[group] = item.value().get<int>();
        }
    }
    s.read("never_treated_share", c.never_treated_share);
    s.read("treatment_load_multiplier", c.treatment_load_multiplier);
    s.read("treatment_phase_in_periods", c.treatment_phase_in_periods);
    s.read("sophistication_mix_min", c.sophistication_mix_min);
    s.read("sophistication_mix_max", c.sophistication_mix_max);
    s.read("sophistication_mix_drift_std", c.sophistication_mix_drift_std);
    s.read("high_sophistication", c.high_sophistication);
    s.read("low_sophistication", c.low_sophistication);
    s.read("attention_capacity", c.attention_capacity);
    s.read("memory_capacity", c.memory_capacity);
    s.read("concurrent_disclosures", c.concurrent_disclosures);
    s.read("processing_slots", c.processing_slots);
    s.read("completion_quality", c.completion_quality);
    s.read("structure_mean", c.structure_mean);
    s.read("structure_std", c.structure_std);
    s.read("structure_min", c.structure_min);
    s.read("structure_max", c.structure_max);
    s.read("structure_period_std", c.structure_period_std);
    s.read("initial_price", c.initial_price);
    s.read("value_shock_std", c.value_shock_std);
    s.read("log_market_cap_mean", c.log_market_cap_mean);
    s.read("log_market_cap_std", c.log_market_cap_std);
    s.read("log_market_cap_drift_std", c.log_market_cap_drift_std);
    s.read("analyst_coverage_base", c.analyst_coverage_base);
    s.read("analyst_coverage_per_log_cap", c.analyst_coverage_per_log_cap);
    s.read("analyst_coverage_noise_std", c.analyst_coverage_noise_std);
    s.read("price_path_firms", c.price_path_firms);
    s.finish();
}

void read_mechanisms(Section s, mech::MechanismParams& m) {
    s.read("gamma", m.gamma);
    s.read("error_scale", m.error_scale);
    s.read("complexity_benefit", m.complexity_benefit);
    s.read("complexity_cost", m.complexity_cost);
    s.read("max_structure", m.max_structure);
    s.finish();
}

void read_technology(Section s, QualityTechnology& t) {
    s.read("saturation_attention", t.saturation_attention);
    s.read("saturation_memory", t.saturation_memory);
    s.finish();
}

void read_load_map(Section s, LoadMap& m) {
    s.read("attention_per_structure", m.attention_per_structure);
    s.read("memory_per_structure", m.memory_per_structure);
    s.finish();
}

void read_solver(Section s, SolverConfig& c) {
    s.read("max_iterations", c.max_iterations);
    s.read("step_size", c.step_size);
    s.read("kkt_tolerance", c.kkt_tolerance);
    s.read("budget_tolerance", c.budget_tolerance);
    s.finish();
}

void read_estimation(Section s, EstimationJob& e) {
    s.read("panel", e.panel);
    s.read("outcome", e.spec.outcome);
    s.read("treatment", e.spec.treatment);
    s.read("controls", e.spec.controls);
    s.read("unit_key", e.spec.unit_key);
    s.read("time_key", e.spec.time_key);
    s.read("cluster_key", e.spec.cluster_key);
    s.read("demean_tolerance", e.spec.demean_tolerance);
    s.read("max_demean_sweeps", e.spec.max_demean_sweeps);
    if (s.has("event_window")) {
        std::vector<int> window;
        s.read("event_window", window);
        if (window.size() != 2) throw ConfigError("'estimation.event_window' must be [pre, post]");
        e.event_pre = window[0];
        e.event_post = window[1];
    }
    s.read("placebo_draws", e.placebo_draws);
    s.finish();
}

market::PricingRule parse_rule(const std::string& name) {
    if (name == "anchored") return market::PricingRule::anchored;
    if (name == "literal") return market::PricingRule::literal;
    throw ConfigError(fmt::format("unknown pricing rule '{}' (anchored, literal)", name));
}

const char* rule_name(market::PricingRule rule) {
    return rule == market::PricingRule::literal ? "literal" : "anchored";
}

void read_sweep(Section s, SweepJob& j) {
    s.read("n_investors", j.market.n_investors);
    s.read("n_assets", j.market.n_assets);
    s.read("high_sophistication", j.market.high_sophistication);
    s.read("low_sophistication", j.market.low_sophistication);
    s.read("attention_capacity", j.market.attention_capacity);
    s.read("memory_capacity", j.market.memory_capacity);
    s.read("anchor_price", j.market.anchor_price);
    s.read("value_shock_std", j.market.value_shock_std);
    s.read("loads", j.loads);
    s.read("high_capacity_shares", j.high_capacity_shares);
    if (s.has("pricing_rule")) {
        std::string rule;
        s.read("pricing_rule", rule);
        j.rule = parse_rule(rule);
    }
    s.finish();
}

void read_text(Section s, TextJob& t) {
    s.read("manifest", t.manifest);
    s.read("corpus_dir", t.corpus_dir);
    s.read("stoplist", t.stoplist);
    s.read("shingle_k", t.shingle_k);
    s.read("strip_markup", t.strip_markup);
    if (s.has("reference_scope")) {
        std::string scope;
        s.read("reference_scope", scope);
        t.scope = text::parse_reference_scope(scope);
    }
    s.finish();
}

}  // namespace

void ExperimentConfig::apply_seed() {
    simulation.sim.rng_seed = seed;
    simulation.mechanisms.rng_seed = seed;
    sweep.market.seed = seed;
}

void ExperimentConfig::validate() const {
    if (threads < 1) throw ConfigError("threads must be at least 1");
    simulation.sim.validate();
    simulation.mechanisms.validate();
    simulation.tech.validate();
    simulation.load_map.validate();
    simulation.solver.validate();
    if (estimation.event_pre < 1 || estimation.event_post < 0)
        throw ConfigError("estimation.event_window needs pre >= 1 and post >= 0");
    if (estimation.placebo_draws < 100) throw ConfigError("estimation.placebo_draws must be at least 100");
    if (estimation.spec.outcome == estimation.spec.treatment)
        throw ConfigError("estimation.outcome and estimation.treatment must differ");
    if (sweep.high_capacity_shares.empty()) throw ConfigError("sweep.high_capacity_shares must not be empty");
    for (double share : sweep.high_capacity_shares)
        if (!(share >= 0.0 && share <= 1.0)) throw ConfigError("sweep.high_capacity_shares must lie in [0, 1]");
    market::MarketSpec m = sweep.market;
    m.validate();
    if (text.shingle_k < 1) throw ConfigError("textmetrics.shingle_k must be at least 1");
}

ExperimentConfig parse_config(const Json& doc) {
    ExperimentConfig cfg;
    Section root(doc, "");
    root.read("seed", cfg.seed);
    root.read("threads", cfg.threads);
    root.read("out_dir", cfg.out_dir);
    if (root.has("simulation")) read_simulation(root.child("simulation"), cfg.simulation.sim);
    if (root.has("mechanisms")) read_mechanisms(root.child("mechanisms"), cfg.simulation.mechanisms);
    if (root.has("technology")) read_technology(root.child("technology"), cfg.simulation.tech);
    if (root.has("load_map")) read_load_map(root.child("load_map"), cfg.simulation.load_map);
    if (root.has("solver")) read_solver(root.child("solver"), cfg.simulation.solver);
    if (root.has("estimation")) read_estimation(root.child("estimation"), cfg.estimation);
    if (root.has("sweep")) read_sweep(root.child("sweep"), cfg.sweep);
    if (root.has("textmetrics")) read_text(root.child("textmetrics"), cfg.text);
    root.finish();
    cfg.apply_seed();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config '{}'", path));
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(fmt::format("config '{}' is not valid JSON: {}", path, e.what()));
    }
    return parse_config(doc);
}

Json to_json(const ExperimentConfig& cfg) {
    const sim::SimConfig& s = cfg.simulation.sim;
    Json groups = Json::object();
    for (const auto& [group, period] : s.treatment_start_periods) groups[std::to_string(group)] = period;

    Json j;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["out_dir"] = cfg.out_dir;
    j["simulation"] = {
        {"n_firms", s.n_firms},
        {"n_investors", s.n_investors},
        {"n_periods", s.n_periods},
        {"trading_days_per_period", s.trading_days_per_period},
        {"treatment_start_periods", groups},
        {"never_treated_share", s.never_treated_share},
        {"treatment_load_multiplier", s.treatment_load_multiplier},
        {"treatment_phase_in_periods", s.treatment_phase_in_periods},
        {"sophistication_mix_min", s.sophistication_mix_min},
        {"sophistication_mix_max", s.sophistication_mix_max},
        {"sophistication_mix_drift_std", s.sophistication_mix_drift_std},
        {"high_sophistication", s.high_sophistication},
        {"low_sophistication", s.low_sophistication},
        {"attention_capacity", s.attention_capacity},
        {"memory_capacity", s.memory_capacity},
        {"concurrent_disclosures", s.concurrent_disclosures},
        {"processing_slots", s.processing_slots},
        {"completion_quality", s.completion_quality},
        {"structure_mean", s.structure_mean},
        {"structure_std", s.structure_std},
        {"structure_min", s.structure_min},
        {"structure_max", s.structure_max},
        {"structure_period_std", s.structure_period_std},
        {"initial_price", s.initial_price},
        {"value_shock_std", s.value_shock_std},
        {"log_market_cap_mean", s.log_market_cap_mean},
        {"log_market_cap_std", s.log_market_cap_std},
        {"log_market_cap_drift_std", s.log_market_cap_drift_std},
        {"analyst_coverage_base", s.analyst_coverage_base},
        {"analyst_coverage_per_log_cap", s.analyst_coverage_per_log_cap},
        {"analyst_coverage_noise_std", s.analyst_coverage_noise_std},
        {"price_path_firms", s.price_path_firms},
    };
    const mech::MechanismParams& m = cfg.simulation.mechanisms;
    j["mechanisms"] = {{"gamma", m.gamma},
                       {"error_scale", m.error_scale},
                       {"complexity_benefit", m.complexity_benefit},
                       {"complexity_cost", m.complexity_cost},
                       {"max_structure", m.max_structure}};
    j["technology"] = {{"saturation_attention", cfg.simulation.tech.saturation_attention},
                       {"saturation_memory", cfg.simulation.tech.saturation_memory}};
    j["load_map"] = {{"attention_per_structure", cfg.simulation.load_map.attention_per_structure},
                     {"memory_per_structure", cfg.simulation.load_map.memory_per_structure}};
    const SolverConfig& sc = cfg.simulation.solver;
    j["solver"] = {{"max_iterations", sc.max_iterations},
                   {"step_size", sc.step_size},
                   {"kkt_tolerance", sc.kkt_tolerance},
                   {"budget_tolerance", sc.budget_tolerance}};
    const EstimationJob& e = cfg.estimation;
    j["estimation"] = {{"panel", e.panel},
                       {"outcome", e.spec.outcome},
                       {"treatment", e.spec.treatment},
                       {"controls", e.spec.controls},
                       {"unit_key", e.spec.unit_key},
                       {"time_key", e.spec.time_key},
                       {"cluster_key", e.spec.cluster_key},
                       {"demean_tolerance", e.spec.demean_tolerance},
                       {"max_demean_sweeps", e.spec.max_demean_sweeps},
                       {"event_window", {e.event_pre, e.event_post}},
                       {"placebo_draws", e.placebo_draws}};
    const SweepJob& w = cfg.sweep;
    j["sweep"] = {{"n_investors", w.market.n_investors},
                  {"n_assets", w.market.n_assets},
                  {"high_sophistication", w.market.high_sophistication},
                  {"low_sophistication", w.market.low_sophistication},
                  {"attention_capacity", w.market.attention_capacity},
                  {"memory_capacity", w.market.memory_capacity},
                  {"anchor_price", w.market.anchor_price},
                  {"value_shock_std", w.market.value_shock_std},
                  {"loads", w.loads},
                  {"high_capacity_shares", w.high_capacity_shares},
                  {"pricing_rule", rule_name(w.rule)}};
    const TextJob& t = cfg.text;
    j["textmetrics"] = {{"manifest", t.manifest},
                        {"corpus_dir", t.corpus_dir},
                        {"stoplist", t.stoplist},
                        {"shingle_k", t.shingle_k},
                        {"strip_markup", t.strip_markup},
                        {"reference_scope", text::to_string(t.scope)}};
    return j;
}

}  // namespace cogload::cli
