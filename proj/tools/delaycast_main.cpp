#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include "delaycast/chain_ladder.hpp"
#include "delaycast/direct.hpp"
#include "delaycast/em.hpp"
#include "delaycast/evaluation.hpp"
#include "delaycast/inference.hpp"
#include "delaycast/io.hpp"
#include "delaycast/simulate.hpp"

namespace dc = delaycast;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitConfig = 2;
constexpr int kExitFit = 3;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    // Either file inputs or a simulation block.
    std::string events_path, exposure_path, holidays_path;
    bool simulate = false;
    long sim_tau_full = 0;
    std::string sim_kind = "week_matrix";

    long eval_date = 0;
    std::string spec = "em_matrix";
    bool censoring = false;
    int w_max = 104;
    double level = 0.95;
    std::uint64_t seed = 1;
    int workers = 1;
    std::string out_dir = ".";
    std::string config_text;  // raw config file contents, for the manifest

    // backtest range
    long from = 0, to = 0, step = 1;
    std::string specs = "all";

    std::string group = "occurrence";
    bool simultaneous = false;
};

const std::vector<std::string> kSpecNames = {
    "em_matrix",   "em_reverse_time",  "chain_ladder",
    "yearly_cl",   "direct_structured", "direct_per_day"};

void check_spec_name(const std::string& spec) {
    for (const auto& s : kSpecNames)
        if (s == spec) return;
    throw ConfigError("spec: unknown value '" + spec + "'");
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(key) + ": invalid value");
    }
}

void load_config_file(const std::string& path, RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    cfg.config_text = buf.str();
    json j;
    try {
        j = json::parse(cfg.config_text);
    } catch (const json::exception& e) {
        throw ConfigError("config: malformed JSON: " + std::string(e.what()));
    }
    bool has_inputs = j.contains("inputs");
    bool has_sim = j.contains("simulation");
    if (has_inputs == has_sim)
        throw ConfigError(
            "config: exactly one of 'inputs' and 'simulation' required");
    if (has_inputs) {
        const json& in_block = j.at("inputs");
        read_key(in_block, "events", cfg.events_path);
        read_key(in_block, "exposure", cfg.exposure_path);
        read_key(in_block, "holidays", cfg.holidays_path);
        if (cfg.events_path.empty() || cfg.exposure_path.empty())
            throw ConfigError("inputs: events and exposure paths required");
    } else {
        cfg.simulate = true;
        const json& sim = j.at("simulation");
        read_key(sim, "tau_full", cfg.sim_tau_full);
        read_key(sim, "kind", cfg.sim_kind);
        read_key(sim, "seed", cfg.seed);
        if (cfg.sim_tau_full < 1)
            throw ConfigError("simulation.tau_full: must be >= 1");
    }
    read_key(j, "eval_date", cfg.eval_date);
    read_key(j, "spec", cfg.spec);
    if (j.contains("options")) {
        const json& opt = j.at("options");
        read_key(opt, "censoring", cfg.censoring);
        read_key(opt, "w_max", cfg.w_max);
        read_key(opt, "level", cfg.level);
        read_key(opt, "seed", cfg.seed);
        read_key(opt, "workers", cfg.workers);
    }
    read_key(j, "out_dir", cfg.out_dir);
    if (j.contains("backtest")) {
        const json& bt = j.at("backtest");
        read_key(bt, "from", cfg.from);
        read_key(bt, "to", cfg.to);
        read_key(bt, "step", cfg.step);
        read_key(bt, "specs", cfg.specs);
    }
    check_spec_name(cfg.spec);
}

struct Dataset {
    std::vector<dc::EventRecord> events;
    std::vector<double> exposure;
    dc::CalendarConfig calendar;
};

Dataset load_dataset(const RunConfig& cfg, long needed_tau) {
    Dataset ds;
    if (cfg.simulate) {
        dc::SimulationConfig sim = dc::make_default_scenario(
            cfg.sim_tau_full, cfg.seed,
            cfg.sim_kind == "week_reverse"
                ? dc::ReportingSpec::Kind::week_reverse
                : dc::ReportingSpec::Kind::week_matrix);
        dc::SimulationResult res = dc::simulate_portfolio(sim);
        for (const auto& e : res.events) ds.events.push_back({e.t, e.d});
        ds.exposure = sim.exposure;
        ds.calendar = sim.calendar;
    } else {
        // The epoch is the first exposure month's first day; holidays are
        // attached before events so delays resolve against the same calendar.
        std::ifstream in(cfg.exposure_path);
        if (!in) throw ConfigError("exposure: cannot open " + cfg.exposure_path);
        std::string header, first;
        std::getline(in, header);
        if (!std::getline(in, first) || first.find(',') == std::string::npos)
            throw ConfigError("exposure: no data rows");
        ds.calendar.epoch =
            dc::parse_iso_date(first.substr(0, first.find(',')) + "-01");
        if (!cfg.holidays_path.empty())
            dc::read_holidays_csv(cfg.holidays_path, ds.calendar);
        ds.events = dc::read_events_csv(cfg.events_path, ds.calendar);
        long horizon = needed_tau;
        for (const auto& e : ds.events)
            horizon = std::max(horizon, e.t);
        ds.exposure =
            dc::read_exposure_csv(cfg.exposure_path, ds.calendar, horizon);
    }
    if (needed_tau > static_cast<long>(ds.exposure.size()))
        throw ConfigError("eval_date: beyond the available exposure range");
    return ds;
}

dc::RunoffTriangle make_triangle(const Dataset& ds, long tau) {
    std::vector<dc::EventRecord> kept;
    for (const auto& e : ds.events)
        if (e.t <= tau && e.t + e.d <= tau) kept.push_back(e);
    std::vector<double> expo(ds.exposure.begin(), ds.exposure.begin() + tau);
    return dc::aggregate_events(kept, tau, std::move(expo), ds.calendar);
}

dc::ReportingSpec reporting_spec_for(const RunConfig& cfg) {
    dc::ReportingSpec spec;
    spec.kind = cfg.spec == "em_reverse_time"
                    ? dc::ReportingSpec::Kind::week_reverse
                    : dc::ReportingSpec::Kind::week_matrix;
    spec.week_cutoff = cfg.w_max;
    spec.week_toggles.month = false;
    spec.week_toggles.dom = false;
    spec.week_toggles.jan1 = false;
    spec.week_toggles.dec31 = false;
    return spec;
}

dc::OccurrenceSpec occurrence_spec_for(const RunConfig&) {
    dc::OccurrenceSpec spec;
    spec.toggles.jan1 = false;
    spec.toggles.dec31 = false;
    return spec;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

void write_manifest(const RunConfig& cfg) {
    dc::write_manifest_json(out_path(cfg, "manifest.json"), cfg.config_text,
                            cfg.seed, kVersion);
}

int cmd_simulate(const RunConfig& cfg) {
    if (!cfg.simulate) throw ConfigError("simulation: block required");
    dc::SimulationConfig sim = dc::make_default_scenario(
        cfg.sim_tau_full, cfg.seed,
        cfg.sim_kind == "week_reverse" ? dc::ReportingSpec::Kind::week_reverse
                                       : dc::ReportingSpec::Kind::week_matrix);
    dc::SimulationResult res = dc::simulate_portfolio(sim);
    std::vector<dc::EventRecord> events;
    for (const auto& e : res.events) events.push_back({e.t, e.d});
    dc::write_events_csv(out_path(cfg, "events.csv"), events, sim.calendar);

    // Monthly exposure that recovers the daily series on re-ingestion:
    // ingestion divides by the full month length, so earned = daily level
    // times that length (the default scenario's daily exposure is constant
    // within each month).
    std::map<std::string, double> monthly;
    for (long t = 1; t <= cfg.sim_tau_full; ++t) {
        std::chrono::year_month_day ymd(sim.calendar.date(t));
        char key[16];
        std::snprintf(key, sizeof key, "%04d-%02u", int(ymd.year()),
                      unsigned(ymd.month()));
        auto last = std::chrono::year_month_day_last(
            ymd.year(), std::chrono::month_day_last(ymd.month()));
        monthly[key] =
            sim.exposure[t - 1] * static_cast<double>(unsigned(last.day()));
    }
    std::ostringstream expo;
    expo.precision(17);
    expo << "month,earned_exposure\n";
    for (const auto& [m, earned] : monthly) expo << m << ',' << earned << '\n';
    dc::atomic_write(out_path(cfg, "exposure.csv"), expo.str());

    dc::JointModel truth{sim.occurrence, sim.reporting, cfg.sim_tau_full};
    dc::write_model_json(out_path(cfg, "truth.json"), truth);
    write_manifest(cfg);
    std::cout << "simulate: " << events.size() << " events over "
              << cfg.sim_tau_full << " days -> " << cfg.out_dir << "\n";
    return 0;
}

dc::EmFit fit_em_spec(const RunConfig& cfg, const dc::RunoffTriangle& tri) {
    dc::EmOptions opts;
    opts.include_censoring = cfg.censoring;
    return dc::fit_em(tri, occurrence_spec_for(cfg), reporting_spec_for(cfg),
                      opts);
}

int cmd_fit(const RunConfig& cfg) {
    if (cfg.eval_date < 1) throw ConfigError("eval_date: required");
    Dataset ds = load_dataset(cfg, cfg.eval_date);
    dc::RunoffTriangle tri = make_triangle(ds, cfg.eval_date);

    if (cfg.spec == "em_matrix" || cfg.spec == "em_reverse_time") {
        dc::EmFit fit = fit_em_spec(cfg, tri);
        dc::write_model_json(out_path(cfg, "model.json"), fit.model);
        dc::write_trace_csv(out_path(cfg, "trace.csv"), fit.trace);
        write_manifest(cfg);
        std::cout << "fit: " << cfg.spec << " converged="
                  << (fit.converged ? "yes" : "no") << " iterations="
                  << fit.iterations << " loglik=" << fit.trace.back().loglik
                  << "\n";
        return 0;
    }
    if (cfg.spec == "chain_ladder") {
        dc::ChainLadderFit fit = dc::fit_cl_em(tri);
        json j{{"kind", "chain_ladder"}, {"lambda", fit.lambda}, {"p", fit.p}};
        dc::atomic_write(out_path(cfg, "model.json"), j.dump(2) + "\n");
        write_manifest(cfg);
        std::cout << "fit: chain_ladder tau=" << tri.tau() << "\n";
        return 0;
    }
    if (cfg.spec == "yearly_cl") {
        dc::YearlyClFit fit = dc::fit_yearly_cl(tri);
        json j{{"kind", "yearly_cl"},
               {"years", fit.years},
               {"lambda_year", fit.lambda_year},
               {"p_lag", fit.p_lag}};
        dc::atomic_write(out_path(cfg, "model.json"), j.dump(2) + "\n");
        write_manifest(cfg);
        std::cout << "fit: yearly_cl years=" << fit.years.size() << "\n";
        return 0;
    }
    // direct variants
    dc::DirectSpec spec;
    spec.variant = cfg.spec == "direct_per_day"
                       ? dc::DirectSpec::Variant::per_day_alpha
                       : dc::DirectSpec::Variant::structured;
    dc::DirectFit fit = dc::fit_direct(tri, spec);
    json j{{"kind", cfg.spec},
           {"converged", fit.fit.converged},
           {"loglik", fit.fit.loglik},
           {"flagged_days", fit.flagged_days}};
    json coef = json::object();
    for (Eigen::Index i = 0; i < fit.fit.coefficients.size(); ++i)
        coef["b" + std::to_string(i)] = fit.fit.coefficients[i];
    j["coefficients"] = coef;
    dc::atomic_write(out_path(cfg, "model.json"), j.dump(2) + "\n");
    write_manifest(cfg);
    std::cout << "fit: " << cfg.spec << " converged="
              << (fit.fit.converged ? "yes" : "no") << "\n";
    return 0;
}

int cmd_nowcast(const RunConfig& cfg) {
    if (cfg.eval_date < 1) throw ConfigError("eval_date: required");
    Dataset ds = load_dataset(cfg, cfg.eval_date);
    dc::RunoffTriangle tri = make_triangle(ds, cfg.eval_date);

    std::map<long, double> groups;
    double total = 0.0;
    if (cfg.spec == "em_matrix" || cfg.spec == "em_reverse_time") {
        dc::EmFit fit = fit_em_spec(cfg, tri);
        dc::NowcastResult res = dc::nowcast(fit.model, tri);
        total = res.total;
        dc::NowcastGrouping g = dc::NowcastGrouping::occurrence;
        if (cfg.group == "reporting_date")
            g = dc::NowcastGrouping::reporting_date;
        else if (cfg.group == "week")
            g = dc::NowcastGrouping::week;
        else if (cfg.group == "month")
            g = dc::NowcastGrouping::month;
        else if (cfg.group != "occurrence" && cfg.group != "total")
            throw ConfigError("group: unknown value '" + cfg.group + "'");
        if (cfg.group == "total")
            groups[0] = res.total;
        else
            groups = dc::nowcast_groups(res, g, tri.calendar());
    } else if (cfg.spec == "chain_ladder") {
        dc::ChainLadderFit fit = dc::fit_cl_em(tri);
        for (long t = 1; t <= tri.tau(); ++t) {
            double ibnr = 0.0;
            for (long d = tri.tau() - t + 1; d <= tri.tau() - 1; ++d)
                ibnr += fit.lambda[t - 1] * fit.p[d];
            groups[t] = ibnr;
            total += ibnr;
        }
    } else if (cfg.spec == "yearly_cl") {
        dc::YearlyClFit fit = dc::fit_yearly_cl(tri);
        for (const auto& [cell, v] : fit.daily_nowcast) {
            groups[cell.first] += v;
            total += v;
        }
    } else {
        dc::DirectSpec spec;
        spec.variant = cfg.spec == "direct_per_day"
                           ? dc::DirectSpec::Variant::per_day_alpha
                           : dc::DirectSpec::Variant::structured;
        dc::DirectFit fit = dc::fit_direct(tri, spec);
        dc::DirectNowcast res = dc::nowcast_direct(fit, tri);
        for (const auto& [cell, v] : res.cell_means) groups[cell.first] += v;
        total = res.total;
    }
    auto intervals =
        dc::prediction_intervals(groups, cfg.level, cfg.simultaneous);
    dc::write_nowcast_csv(out_path(cfg, "nowcast.csv"), groups, intervals);
    write_manifest(cfg);
    std::cout << "nowcast: spec=" << cfg.spec << " total=" << total << " ("
              << groups.size() << " groups)\n";
    return 0;
}

int cmd_diagnose(const RunConfig& cfg) {
    if (cfg.eval_date < 1) throw ConfigError("eval_date: required");
    Dataset ds = load_dataset(cfg, cfg.eval_date);
    dc::RunoffTriangle tri = make_triangle(ds, cfg.eval_date);
    if (cfg.spec != "em_matrix" && cfg.spec != "em_reverse_time")
        throw ConfigError("spec: diagnose requires an EM spec");

    dc::EmFit fit = fit_em_spec(cfg, tri);
    dc::ParameterPacker packer(fit.model, tri);
    dc::InformationPair info =
        dc::observed_information(fit.model, tri, packer);
    dc::CompleteCounts counts = dc::e_step(fit.model, tri);
    double q = dc::q_objective(fit.model, counts, tri);
    double penalty =
        (info.I_c * info.I_o.fullPivLu().inverse()).trace();
    double aiccd_value = -2.0 * q + 2.0 * penalty;

    auto gd = dc::cooks_distances(fit.model, tri, packer, info.I_c);
    std::vector<std::pair<dc::Cell, double>> top(gd.begin(), gd.end());
    std::sort(top.begin(), top.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    std::size_t k = std::min<std::size_t>(20, top.size());

    std::ostringstream out;
    out.precision(17);
    out << "t,d,cooks_distance\n";
    for (std::size_t i = 0; i < k; ++i)
        out << top[i].first.first << ',' << top[i].first.second << ','
            << top[i].second << '\n';
    dc::atomic_write(out_path(cfg, "cooks_top.csv"), out.str());

    json j{{"spec", cfg.spec},
           {"aiccd", aiccd_value},
           {"q_at_fit", q},
           {"penalty", 2.0 * penalty},
           {"dim", packer.dim()}};
    dc::atomic_write(out_path(cfg, "diagnostics.json"), j.dump(2) + "\n");
    write_manifest(cfg);
    std::cout << "diagnose: aiccd=" << aiccd_value << " dim=" << packer.dim()
              << " top_gd=" << (top.empty() ? 0.0 : top[0].second) << "\n";
    return 0;
}

int cmd_backtest(const RunConfig& cfg) {
    if (cfg.from < 1 || cfg.to < cfg.from)
        throw ConfigError("backtest: valid from/to range required");
    Dataset ds = load_dataset(cfg, cfg.to);

    std::vector<dc::BacktestSpec> specs;
    auto add_spec = [&](const std::string& name) {
        dc::BacktestSpec s;
        s.name = name;
        if (name == "chain_ladder") {
            s.kind = dc::BacktestSpec::Kind::chain_ladder;
        } else if (name == "yearly_cl") {
            s.kind = dc::BacktestSpec::Kind::yearly_cl;
        } else if (name == "em_matrix" || name == "em_reverse_time") {
            s.kind = dc::BacktestSpec::Kind::em;
            RunConfig c = cfg;
            c.spec = name;
            s.occurrence = occurrence_spec_for(c);
            s.reporting = reporting_spec_for(c);
            s.em_options.include_censoring = cfg.censoring;
        } else {
            throw ConfigError("specs: unsupported backtest spec '" + name +
                              "'");
        }
        specs.push_back(std::move(s));
    };
    if (cfg.specs == "all") {
        add_spec("em_matrix");
        add_spec("em_reverse_time");
        add_spec("chain_ladder");
    } else {
        std::stringstream ss(cfg.specs);
        std::string name;
        while (std::getline(ss, name, ',')) add_spec(name);
    }

    dc::BacktestOptions opts;
    opts.start = cfg.from;
    opts.stop = cfg.to;
    opts.step = cfg.step;
    opts.level = cfg.level;
    opts.workers = cfg.workers;
    auto rows = dc::moving_window(ds.events, ds.exposure, ds.calendar, specs,
                                  opts);
    dc::write_backtest_csv(out_path(cfg, "backtest.csv"), rows);
    auto summary = dc::summarize_backtest(rows);
    dc::write_backtest_summary_json(out_path(cfg, "backtest_summary.json"),
                                    summary);
    write_manifest(cfg);
    long failures = 0;
    for (const auto& s : summary) failures += s.failures;
    std::cout << "backtest: " << rows.size() << " rows over "
              << (cfg.to - cfg.from) / cfg.step + 1 << " dates, " << failures
              << " failures\n";
    return failures == 0 ? 0 : kExitFit;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"delaycast: nowcasting right-truncated daily count triangles"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;

    // Shared flags; CLI values override config-file keys.
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration file");
        sub->add_option("--eval-date", cfg.eval_date,
                        "evaluation day index tau");
        sub->add_option("--spec", cfg.spec, "model spec name");
        sub->add_option("--level", cfg.level, "interval level");
        sub->add_option("--group", cfg.group,
                        "nowcast grouping: occurrence, reporting_date, week, "
                        "month, total");
        sub->add_flag("--censoring", cfg.censoring,
                      "include the right-censoring term in the M-step");
        sub->add_flag("--simultaneous", cfg.simultaneous,
                      "Bonferroni-simultaneous intervals");
        sub->add_option("--seed", cfg.seed, "simulation seed");
        sub->add_option("--workers", cfg.workers, "backtest worker count");
        sub->add_option("--out", cfg.out_dir, "output directory");
        sub->add_option("--tau-full", cfg.sim_tau_full,
                        "simulation horizon (simulate without config)");
        sub->add_option("--kind", cfg.sim_kind,
                        "simulated reporting kind: week_matrix, week_reverse");
    };
    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset");
    auto* fit = app.add_subcommand("fit", "fit one model spec");
    auto* now = app.add_subcommand("nowcast", "fit and nowcast IBNR counts");
    auto* diag = app.add_subcommand("diagnose",
                                    "AICcd and top Cook's distances");
    auto* back = app.add_subcommand("backtest", "moving-window evaluation");
    for (CLI::App* sub : {sim, fit, now, diag, back}) add_common(sub);
    back->add_option("--from", cfg.from, "first evaluation day index");
    back->add_option("--to", cfg.to, "last evaluation day index");
    back->add_option("--step", cfg.step, "day step between evaluations");
    back->add_option("--specs", cfg.specs,
                     "comma-separated backtest specs or 'all'");

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig file_cfg;
        if (!config_path.empty()) {
            load_config_file(config_path, file_cfg);
            // Config supplies defaults; explicit CLI flags win.
            auto keep = [&](auto& flag_value, const auto& file_value,
                            const char* flag_name) {
                if (app.get_subcommands()[0]->count(flag_name) == 0)
                    flag_value = file_value;
            };
            keep(cfg.eval_date, file_cfg.eval_date, "--eval-date");
            keep(cfg.spec, file_cfg.spec, "--spec");
            keep(cfg.level, file_cfg.level, "--level");
            keep(cfg.censoring, file_cfg.censoring, "--censoring");
            keep(cfg.seed, file_cfg.seed, "--seed");
            keep(cfg.workers, file_cfg.workers, "--workers");
            keep(cfg.out_dir, file_cfg.out_dir, "--out");
            keep(cfg.sim_tau_full, file_cfg.sim_tau_full, "--tau-full");
            keep(cfg.sim_kind, file_cfg.sim_kind, "--kind");
            cfg.events_path = file_cfg.events_path;
            cfg.exposure_path = file_cfg.exposure_path;
            cfg.holidays_path = file_cfg.holidays_path;
            cfg.simulate = file_cfg.simulate;
            cfg.w_max = file_cfg.w_max;
            cfg.config_text = file_cfg.config_text;
            if (app.get_subcommands()[0]->count("--from") == 0)
                cfg.from = file_cfg.from;
            if (app.get_subcommands()[0]->count("--to") == 0)
                cfg.to = file_cfg.to;
            if (app.get_subcommands()[0]->count("--step") == 0)
                cfg.step = file_cfg.step;
            if (cfg.specs == "all") cfg.specs = file_cfg.specs;
        } else if (cfg.sim_tau_full > 0) {
            cfg.simulate = true;
        }
        check_spec_name(cfg.spec);
        if (cfg.config_text.empty()) {
            // Synthesize a manifest payload from the effective flags.
            json j{{"spec", cfg.spec},       {"eval_date", cfg.eval_date},
                   {"seed", cfg.seed},       {"level", cfg.level},
                   {"simulate", cfg.simulate}, {"tau_full", cfg.sim_tau_full}};
            cfg.config_text = j.dump();
        }

        if (sim->parsed()) return cmd_simulate(cfg);
        if (fit->parsed()) return cmd_fit(cfg);
        if (now->parsed()) return cmd_nowcast(cfg);
        if (diag->parsed()) return cmd_diagnose(cfg);
        if (back->parsed()) return cmd_backtest(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFit;
    }
    return 1;
}
