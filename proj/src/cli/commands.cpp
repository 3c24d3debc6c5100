#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cogload/cli.hpp"
#include "cogload/error.hpp"

namespace fs = std::filesystem;

namespace cogload::cli {

namespace {

struct Overrides {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string panel;
    std::vector<int> window;
    std::optional<int> draws;
    std::string manifest;
    std::string corpus;
    std::string stoplist;
    std::optional<std::size_t> k;
    bool no_strip = false;
    std::string scope;
};

std::string number(double v) { return std::isnan(v) ? std::string("NA") : fmt::format("{}", v); }

Json json_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// Creates the output directory, refusing to touch one that already has files.
fs::path prepare_out_dir(const std::string& dir) {
    if (dir.empty()) throw ConfigError("no output directory: pass --out or set out_dir in the config");
    const fs::path path(dir);
    if (fs::exists(path)) {
        if (!fs::is_directory(path)) throw ConfigError(fmt::format("output path '{}' is not a directory", dir));
        if (!fs::is_empty(path))
            throw ConfigError(fmt::format("output directory '{}' is not empty; refusing to overwrite", dir));
    }
    fs::create_directories(path);
    return path;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    return out;
}

void write_json(const fs::path& path, const Json& j) {
    std::ofstream out = open_output(path);
    out << j.dump(2) << '\n';
}

// Config content that determines results: everything but where outputs go
// and how many threads computed them.
Json result_config(const ExperimentConfig& cfg) {
    Json j = to_json(cfg);
    j.erase("out_dir");
    j.erase("threads");
    return j;
}

ExperimentConfig resolve(const Overrides& o, const std::string& command) {
    ExperimentConfig cfg = o.config.empty() ? parse_config(Json::object()) : load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.threads) cfg.threads = *o.threads;
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (!o.panel.empty()) cfg.estimation.panel = o.panel;
    if (!o.window.empty()) {
        if (o.window.size() != 2) throw ConfigError("--window takes two values: pre post");
        cfg.estimation.event_pre = o.window[0];
        cfg.estimation.event_post = o.window[1];
    }
    if (o.draws) cfg.estimation.placebo_draws = *o.draws;
    if (!o.manifest.empty()) cfg.text.manifest = o.manifest;
    if (!o.corpus.empty()) cfg.text.corpus_dir = o.corpus;
    if (!o.stoplist.empty()) cfg.text.stoplist = o.stoplist;
    if (o.k) cfg.text.shingle_k = *o.k;
    if (o.no_strip) cfg.text.strip_markup = false;
    if (!o.scope.empty()) cfg.text.scope = text::parse_reference_scope(o.scope);
    if (command == "textmetrics" && cfg.text.corpus_dir.empty() && !cfg.text.manifest.empty())
        cfg.text.corpus_dir = fs::path(cfg.text.manifest).parent_path().string();
    cfg.apply_seed();
    cfg.validate();
    return cfg;
}

Json cmd_simulate(const ExperimentConfig& cfg, const fs::path& dir) {
    const sim::SimulationResult res = sim::run_simulation(cfg.simulation, cfg.threads);
    {
        std::ofstream out = open_output(dir / "panel.csv");
        sim::write_panel_csv(out, res.panel);
    }
    Json excluded = Json::array();
    for (const auto& [firm, period] : res.excluded) excluded.push_back({firm, period});
    Json meta;
    meta["columns"] = sim::kPanelColumns;
    meta["rows"] = res.panel.size();
    meta["excluded_events"] = excluded;
    meta["config"] = result_config(cfg);
    write_json(dir / "panel_meta.json", meta);
    if (!res.price_paths.empty()) {
        fs::create_directories(dir / "paths");
        for (const sim::PricePath& p : res.price_paths) {
            std::ofstream out = open_output(dir / "paths" / fmt::format("firm_{}_period_{}.csv", p.firm_id, p.period));
            sim::write_price_path_csv(out, p);
        }
    }
    return {{"rows", res.panel.size()}, {"excluded", res.excluded.size()}};
}

Table read_panel(const ExperimentConfig& cfg) {
    if (cfg.estimation.panel.empty()) throw ConfigError("no panel: pass --panel or set estimation.panel");
    return Table::read_csv_file(cfg.estimation.panel);
}

Json cmd_estimate(const ExperimentConfig& cfg, const fs::path& dir) {
    const Table panel = read_panel(cfg);
    const did::DidSpec& spec = cfg.estimation.spec;
    const did::DidFit fit = did::estimate(panel, spec);
    const did::DidFit es = did::event_study(panel, spec, cfg.estimation.event_pre, cfg.estimation.event_post);

    Json coefs = Json::array();
    for (std::size_t c = 0; c < fit.names.size(); ++c)
        coefs.push_back({{"name", fit.names[c]},
                         {"estimate", fit.coefficients(static_cast<Eigen::Index>(c))},
                         {"se", fit.se(static_cast<Eigen::Index>(c))}});
    Json report;
    report["outcome"] = spec.outcome;
    report["treatment"] = spec.treatment;
    report["cluster_key"] = spec.effective_cluster_key();
    report["beta_treatment"] = fit.beta_treatment;
    report["se_treatment"] = fit.se_treatment;
    report["t_stat"] = json_number(fit.t_stat);
    report["p_value"] = json_number(fit.p_value);
    report["ci95"] = {json_number(fit.ci_low), json_number(fit.ci_high)};
    report["n_obs"] = fit.n_obs;
    report["n_clusters"] = fit.n_clusters;
    report["r_squared_within"] = fit.r_squared_within;
    report["demean_sweeps"] = fit.demean_sweeps;
    report["coefficients"] = coefs;
    write_json(dir / "fit.json", report);

    std::ofstream out = open_output(dir / "event_study.csv");
    out << "relative_period,coefficient,se,n_obs,reference,empty\n";
    for (const did::EventStudyRow& r : es.event_study)
        out << fmt::format("{},{},{},{},{},{}\n", r.relative_period, number(r.coefficient), number(r.se), r.n_obs,
                           r.reference ? 1 : 0, r.empty ? 1 : 0);
    return {{"beta_treatment", fit.beta_treatment}, {"se_treatment", fit.se_treatment}};
}

Json cmd_sweep(const ExperimentConfig& cfg, const fs::path& dir) {
    std::ofstream out = open_output(dir / "sweep.csv");
    out << "high_capacity_share,load,mean_mispricing\n";
    std::size_t rows = 0;
    for (double share : cfg.sweep.high_capacity_shares) {
        market::MarketSpec spec = cfg.sweep.market;
        spec.high_capacity_share = share;
        const market::MarketState base = market::make_market(spec, cfg.simulation.load_map);
        const auto table = market::proposition2_sweep(base, cfg.sweep.loads, cfg.simulation.tech,
                                                      cfg.simulation.solver, cfg.simulation.load_map,
                                                      cfg.sweep.rule);
        for (const market::SweepRow& r : table) {
            out << fmt::format("{},{},{}\n", share, r.load, r.mean_mispricing);
            ++rows;
        }
    }
    return {{"rows", rows}};
}

Json cmd_textmetrics(const ExperimentConfig& cfg, const fs::path& dir, std::ostream& err) {
    if (cfg.text.manifest.empty()) throw ConfigError("no manifest: pass --manifest or set textmetrics.manifest");
    std::ifstream manifest_in(cfg.text.manifest);
    if (!manifest_in) throw DataError(fmt::format("cannot open manifest '{}'", cfg.text.manifest));
    const std::vector<text::ManifestEntry> manifest = text::read_manifest(manifest_in);

    text::TextOptions options;
    options.shingle_k = cfg.text.shingle_k;
    options.strip_markup = cfg.text.strip_markup;
    options.scope = cfg.text.scope;
    if (!cfg.text.stoplist.empty()) {
        std::ifstream in(cfg.text.stoplist);
        if (!in) throw DataError(fmt::format("cannot open stop-list '{}'", cfg.text.stoplist));
        options.abbreviations = text::read_abbreviations(in);
    }
    const auto rows = text::corpus_metrics(manifest, cfg.text.corpus_dir, options, cfg.threads);
    std::size_t failed = 0;
    for (const text::DocumentMetrics& r : rows) {
        if (!r.fog || !r.log_size_kb || !r.boilerplate) ++failed;
        for (const std::string& m : r.messages)
            err << Json{{"warning", m}, {"document_id", r.document_id}}.dump() << '\n';
    }
    std::ofstream out = open_output(dir / "metrics.csv");
    text::write_metrics_csv(out, rows);
    return {{"documents", rows.size()}, {"incomplete", failed}};
}

Json cmd_placebo(const ExperimentConfig& cfg, const fs::path& dir) {
    const Table panel = read_panel(cfg);
    const did::PlaceboResult res =
        did::placebo_test(panel, cfg.estimation.spec, cfg.estimation.placebo_draws, cfg.seed, cfg.threads);
    Json report;
    report["actual_beta"] = res.actual_beta;
    report["p_value"] = res.p_value;
    report["n_draws"] = res.draws.size();
    report["n_failed"] = res.n_failed;
    report["placebo_mean"] = res.mean;
    report["placebo_sd"] = res.sd;
    write_json(dir / "placebo.json", report);
    std::ofstream out = open_output(dir / "placebo_draws.csv");
    out << "draw,beta\n";
    for (std::size_t d = 0; d < res.draws.size(); ++d) out << fmt::format("{},{}\n", d, number(res.draws[d]));
    return {{"p_value", res.p_value}, {"n_failed", res.n_failed}};
}

int report_error(std::ostream& err, const char* kind, const std::string& message, int code) {
    err << Json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << '\n';
    return code;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cognitive-load price discovery simulator and estimators", "cogload"};
    app.require_subcommand(1);
    app.fallthrough();
    Overrides o;
    app.add_option("--config", o.config, "Experiment config (JSON)");
    app.add_option("--out", o.out, "Output directory (must be new or empty)");
    app.add_option("--seed", o.seed, "Master seed");
    app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);

    CLI::App* simulate = app.add_subcommand("simulate", "Run the panel simulation");
    CLI::App* estimate = app.add_subcommand("estimate", "Two-way fixed effects DiD and event study");
    estimate->add_option("--panel", o.panel, "Panel CSV");
    estimate->add_option("--window", o.window, "Event-study window: pre post")->expected(2);
    CLI::App* sweep = app.add_subcommand("sweep", "Mean mispricing across load levels");
    CLI::App* textmetrics = app.add_subcommand("textmetrics", "Fog, file size and boilerplate for a corpus");
    textmetrics->add_option("--manifest", o.manifest, "Manifest CSV: document_id,firm_id,period,path");
    textmetrics->add_option("--corpus", o.corpus, "Directory the manifest paths are relative to");
    textmetrics->add_option("--stoplist", o.stoplist, "Abbreviation stop-list, one per line");
    textmetrics->add_option("--k", o.k, "Shingle length in tokens")->check(CLI::PositiveNumber);
    textmetrics->add_flag("--no-strip", o.no_strip, "Do not strip markup");
    textmetrics->add_option("--scope", o.scope, "Boilerplate reference: same_period, firm_history, all");
    CLI::App* placebo = app.add_subcommand("placebo", "Placebo adoption dates");
    placebo->add_option("--panel", o.panel, "Panel CSV");
    placebo->add_option("--draws", o.draws, "Number of placebo draws");
    CLI::App* show = app.add_subcommand("config", "Print the resolved config and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        return report_error(err, "ConfigError", e.what(), 2);
    }

    const CLI::App* chosen = app.get_subcommands().front();
    const std::string command = chosen->get_name();
    try {
        const ExperimentConfig cfg = resolve(o, command);
        if (chosen == show) {
            out << to_json(cfg).dump(2) << '\n';
            return 0;
        }
        const fs::path dir = prepare_out_dir(cfg.out_dir);
        write_json(dir / "resolved_config.json", to_json(cfg));
        Json summary;
        if (chosen == simulate) summary = cmd_simulate(cfg, dir);
        else if (chosen == estimate) summary = cmd_estimate(cfg, dir);
        else if (chosen == sweep) summary = cmd_sweep(cfg, dir);
        else if (chosen == textmetrics) summary = cmd_textmetrics(cfg, dir, err);
        else summary = cmd_placebo(cfg, dir);
        summary["command"] = command;
        summary["out_dir"] = dir.string();
        out << summary.dump() << '\n';
        return 0;
    } catch (const ConfigError& e) {
        return report_error(err, "ConfigError", e.what(), 2);
    } catch (const NumericalError& e) {
        return report_error(err, "NumericalError", e.what(), 3);
    } catch (const DataError& e) {
        return report_error(err, "DataError", e.what(), 4);
    } catch (const fs::filesystem_error& e) {
        return report_error(err, "DataError", e.what(), 4);
    }
}

}  // namespace cogload::cli
