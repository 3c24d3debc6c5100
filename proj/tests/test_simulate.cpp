#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>
#include <vector>

#include "cogload/did.hpp"
#include "cogload/error.hpp"
#include "cogload/simulate.hpp"

using namespace cogload;
using namespace cogload::sim;

namespace {

SimulationInputs small_inputs(std::uint64_t seed) {
    SimulationInputs in;
    in.sim.n_firms = 40;
    in.sim.n_investors = 20;
    in.sim.n_periods = 12;
    in.sim.treatment_start_periods = {{1, 4}, {2, 6}};
    in.sim.rng_seed = seed;
    return in;
}

std::string panel_csv(const SimulationResult& r) {
    std::ostringstream out;
    write_panel_csv(out, r.panel);
    return out.str();
}

InvestorProfile investor(double capacity, double sophistication, double weight) {
    InvestorProfile inv;
    inv.attention_capacity = capacity;
    inv.memory_capacity = capacity;
    inv.sophistication = sophistication;
    inv.market_weight = weight;
    return inv;
}

EventSetup one_event(double anchor, double value) {
    EventSetup s;
    s.anchor_price = anchor;
    s.fundamental_value = value;
    s.focal = Disclosure::from_structure(0, value - anchor, 2.0);
    s.competing.push_back(Disclosure::from_structure(-1, 1.0, 2.0));
    return s;
}

struct Welch {
    double t;
    double p;
};

Welch welch(const std::vector<double>& a, const std::vector<double>& b) {
    auto moments = [](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v) m += x;
        m /= static_cast<double>(v.size());
        double s = 0.0;
        for (double x : v) s += (x - m) * (x - m);
        return std::pair{m, s / static_cast<double>(v.size() - 1)};
    };
    const auto [ma, va] = moments(a);
    const auto [mb, vb] = moments(b);
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double se2 = va / na + vb / nb;
    const double dof = se2 * se2 / (va * va / (na * na * (na - 1)) + vb * vb / (nb * nb * (nb - 1)));
    const double t = (ma - mb) / std::sqrt(se2);
    return {t, did::t_two_sided_p(t, dof)};
}

// Firm-level mean log speed over periods from `from` on, split by ever-treated.
std::pair<std::vector<double>, std::vector<double>> firm_means(const SimulationResult& r, int from) {
    std::map<int, std::pair<double, int>> acc;
    std::map<int, bool> ever;
    for (const PanelObservation& o : r.panel) {
        ever[o.firm_id] = o.adoption_period >= 0;
        if (o.period < from) continue;
        acc[o.firm_id].first += o.outcome.log_speed();
        acc[o.firm_id].second += 1;
    }
    std::vector<double> treated, control;
    for (const auto& [firm, s] : acc) (ever[firm] ? treated : control).push_back(s.first / s.second);
    return {treated, control};
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("hand-traced outcome path") {
    // 50% of the move on day 1, 45% on day 3, the last 5% on day 5.
    const std::vector<double> path{100, 105, 105, 109.5, 109.5, 110};
    const EventOutcome o = extract_outcome(path, 110);
    CHECK(o.speed_days == 3);
    CHECK(o.accuracy == 0.5);
    // Gaps 10, 5, 5, 0.5, 0.5, 0 against a threshold of 1: last exceeded on day 2.
    CHECK(o.duration_days == 2);
    CHECK_FALSE(o.speed_censored);
    CHECK_FALSE(o.duration_censored);
    CHECK(o.log_speed() == doctest::Approx(std::log(3.0)));
    CHECK(o.log_duration() == doctest::Approx(std::log(3.0)));
}

TEST_CASE("outcome edge cases") {
    const std::vector<double> flat{100, 100, 100, 100};
    const EventOutcome none = extract_outcome(flat, 90);
    CHECK(none.speed_days == 3);
    CHECK(none.speed_censored);
    CHECK(none.accuracy == 0.0);
    CHECK(none.duration_days == 3);
    CHECK(none.duration_censored);

    const std::vector<double> overshoot{100, 95, 92, 90};
    const EventOutcome o = extract_outcome(overshoot, 90);
    CHECK(o.accuracy == 0.5);
    CHECK(o.speed_days == 3);

    const std::vector<double> reversal{100, 112, 110};
    CHECK(extract_outcome(reversal, 110).accuracy == 1.0);
    CHECK_THROWS_AS(extract_outcome(std::vector<double>{100}, 110), InvalidArgument);
}

TEST_CASE("frictionless market adjusts on day one") {
    const std::vector<InvestorProfile> investors{investor(1e6, 1, 0.5), investor(1e6, 1, 0.5)};
    mech::MechanismParams mp;
    mp.error_scale = 0.0;
    Rng rng(1);
    const EventResult r = simulate_event(one_event(100, 104), investors, {10, 2, 0.95}, mp, {}, {}, rng);
    REQUIRE_FALSE(r.degenerate);
    CHECK(r.outcome.speed_days == 1);
    CHECK(r.outcome.accuracy == doctest::Approx(1.0));
    CHECK(r.outcome.duration_days <= 1);
    CHECK(r.price_path[1] == doctest::Approx(104));
}

TEST_CASE("zero-quality market never converges") {
    const std::vector<InvestorProfile> investors{investor(1, 0, 1.0)};
    Rng rng(2);
    const EventResult r = simulate_event(one_event(100, 96), investors, {30, 2, 0.95}, {}, {}, {}, rng);
    CHECK(r.outcome.speed_days == 30);
    CHECK(r.outcome.speed_censored);
    CHECK(r.outcome.duration_censored);
    for (double p : r.price_path) CHECK(p == 100);
}

TEST_CASE("degenerate events are flagged") {
    const std::vector<InvestorProfile> investors{investor(1, 1, 1.0)};
    Rng rng(3);
    CHECK(simulate_event(one_event(100, 100), investors, {}, {}, {}, {}, rng).degenerate);
}

TEST_CASE("treatment phase-in") {
    SimConfig cfg;
    cfg.treatment_load_multiplier = 0.7;
    cfg.treatment_phase_in_periods = 3;
    CHECK(cfg.treatment_multiplier(-1) == 1.0);
    CHECK(cfg.treatment_multiplier(0) == doctest::Approx(0.9));
    CHECK(cfg.treatment_multiplier(1) == doctest::Approx(0.8));
    CHECK(cfg.treatment_multiplier(2) == doctest::Approx(0.7));
    CHECK(cfg.treatment_multiplier(10) == doctest::Approx(0.7));
    cfg.treatment_phase_in_periods = 1;
    CHECK(cfg.treatment_multiplier(0) == doctest::Approx(0.7));
    CHECK(cfg.adoption_period(1) == 10);
    CHECK(cfg.adoption_period(0) == -1);
}

TEST_CASE("config validation") {
    SimConfig cfg;
    cfg.treatment_load_multiplier = 0.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.treatment_start_periods[1] = 41;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.n_firms = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.concurrent_disclosures = 16;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
}

TEST_CASE("runs are deterministic and thread-count independent") {
    SimulationInputs in = small_inputs(7);
    in.sim.price_path_firms = {0, 3};
    const SimulationResult a = run_simulation(in, 1);
    const SimulationResult b = run_simulation(in, 3);
    CHECK(panel_csv(a) == panel_csv(b));
    REQUIRE(a.price_paths.size() == b.price_paths.size());
    CHECK(a.price_paths.size() == 2 * static_cast<std::size_t>(in.sim.n_periods));
    for (std::size_t k = 0; k < a.price_paths.size(); ++k) CHECK(a.price_paths[k].prices == b.price_paths[k].prices);
    CHECK(panel_csv(run_simulation(in, 1, 1)) != panel_csv(a));
}

TEST_CASE("minimal panel") {
    SimulationInputs in;
    in.sim.n_firms = 1;
    in.sim.n_periods = 1;
    in.sim.treatment_start_periods = {{1, 0}};
    const SimulationResult r = run_simulation(in);
    CHECK(r.panel.size() + r.excluded.size() == 1);
    CHECK(r.panel.size() <= 1);
}

TEST_CASE("panel invariants") {
    const SimConfig cfg = small_inputs(8).sim;
    const SimulationResult r = run_simulation(small_inputs(8));
    REQUIRE(r.panel.size() + r.excluded.size() == static_cast<std::size_t>(cfg.n_firms * cfg.n_periods));
    std::map<int, int> last_treated;
    int prev_firm = -1, prev_period = -1;
    for (const PanelObservation& o : r.panel) {
        CAPTURE(o.firm_id);
        CAPTURE(o.period);
        // Ordered by (firm, period).
        CHECK((o.firm_id > prev_firm || (o.firm_id == prev_firm && o.period > prev_period)));
        prev_firm = o.firm_id;
        prev_period = o.period;
        // Absorbing treatment.
        if (last_treated.count(o.firm_id)) CHECK(o.treated >= last_treated[o.firm_id]);
        last_treated[o.firm_id] = o.treated;
        CHECK(o.treated == (o.adoption_period >= 0 && o.period >= o.adoption_period));
        // Outcome coherence and censoring.
        const EventOutcome& e = o.outcome;
        CHECK(e.accuracy >= 0.0);
        CHECK(e.accuracy <= 1.0);
        if (e.accuracy == 1.0) CHECK(e.speed_days == 1);
        CHECK(e.speed_days >= 1);
        CHECK(e.speed_days <= cfg.trading_days_per_period);
        CHECK(e.duration_days <= cfg.trading_days_per_period);
        if (e.speed_days == cfg.trading_days_per_period && e.speed_censored) CHECK(e.accuracy == 0.0);
        CHECK(e.duration_censored == (e.duration_days == cfg.trading_days_per_period));
        CHECK(o.controls.institutional_ownership >= 0.0);
        CHECK(o.controls.institutional_ownership <= 1.0);
        CHECK(o.controls.analyst_coverage >= 0.0);
    }
}

TEST_CASE("size-ranked group assignment") {
    const SimulationResult r = run_simulation(small_inputs(9));
    std::map<int, int> group_size;
    std::map<int, double> cap;
    for (const PanelObservation& o : r.panel)
        if (o.period == 0) {
            group_size[o.group]++;
            cap[o.firm_id] = o.controls.log_market_cap;
        }
    CHECK(group_size[0] == 10);
    CHECK(group_size[1] == 15);
    CHECK(group_size[2] == 15);
}

TEST_CASE("null treatment leaves outcomes indistinguishable") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        CAPTURE(seed);
        SimulationInputs in = small_inputs(seed);
        in.sim.treatment_load_multiplier = 1.0;
        const auto [treated, control] = firm_means(run_simulation(in), 4);
        CHECK(welch(treated, control).p > 0.01);
    }
}

TEST_CASE("treatment speeds incorporation") {
    const SimulationInputs in = small_inputs(10);
    const SimulationResult r = run_simulation(in);
    double treated = 0.0, control = 0.0;
    int nt = 0, nc = 0;
    for (const PanelObservation& o : r.panel) {
        if (o.period < 6) continue;
        if (o.treated) {
            treated += o.outcome.log_speed();
            ++nt;
        } else {
            control += o.outcome.log_speed();
            ++nc;
        }
    }
    CHECK(treated / nt < control / nc);
}

TEST_CASE("panel table and csv agree") {
    const SimulationResult r = run_simulation(small_inputs(11));
    const Table t = panel_table(r.panel);
    CHECK(t.rows() == r.panel.size());
    CHECK(t.cols() == kPanelColumns.size());
    std::istringstream in(panel_csv(r));
    const Table back = Table::read_csv(in);
    REQUIRE(back.names() == t.names());
    for (const std::string& name : t.names()) CHECK(back.column(name) == t.column(name));
    CHECK(t.column("log_speed")[0] == doctest::Approx(r.panel[0].outcome.log_speed()));

    std::ostringstream path;
    write_price_path_csv(path, PricePath{0, 0, 101.5, {100, 101, 101.5}});
    CHECK(path.str() == "day,price,fundamental\n0,100,101.5\n1,101,101.5\n2,101.5,101.5\n");
}

}
