#include "delaycast/evaluation.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

#include "delaycast/chain_ladder.hpp"
#include "delaycast/inference.hpp"

namespace delaycast {

long actual_ibnr(std::span<const EventRecord> events, long tau_star,
                 long horizon) {
    long n = 0;
    for (const auto& e : events) {
        if (e.t > tau_star || e.t + e.d <= tau_star) continue;
        if (horizon >= 0 && e.t + e.d > horizon) continue;
        ++n;
    }
    return n;
}

namespace {

std::vector<BacktestRow> evaluate_date(std::span<const EventRecord> events,
                                       const std::vector<double>& exposure,
                                       const CalendarConfig& calendar,
                                       const std::vector<BacktestSpec>& specs,
                                       long tau_star, long horizon,
                                       double level) {
    std::vector<EventRecord> window;
    for (const auto& e : events)
        if (e.t <= tau_star && e.t + e.d <= tau_star) window.push_back(e);
    std::vector<double> expo(exposure.begin(), exposure.begin() + tau_star);
    RunoffTriangle tri =
        aggregate_events(window, tau_star, std::move(expo), calendar);
    long actual = actual_ibnr(events, tau_star, horizon);

    std::vector<BacktestRow> rows;
    for (const auto& spec : specs) {
        BacktestRow row;
        row.eval_date = tau_star;
        row.spec_name = spec.name;
        row.horizon = horizon;
        row.actual = actual;
        auto started = std::chrono::steady_clock::now();
        try {
            // Ground truth is bounded by the horizon, so predictions count
            // only the mass reporting at or before it.
            double predicted = 0.0;
            switch (spec.kind) {
                case BacktestSpec::Kind::em: {
                    EmFit fit = fit_em(tri, spec.occurrence, spec.reporting,
                                       spec.em_options);
                    DelayTable table(fit.model.reporting, tri.calendar(),
                                     tau_star);
                    for (long t = 1; t <= tau_star; ++t) {
                        double lambda = fit.model.lambda(t, tri);
                        long dmax = std::min(horizon - t, table.max_delay());
                        for (long d = tau_star - t + 1; d <= dmax; ++d)
                            predicted += lambda * table.cell(t, d);
                    }
                    break;
                }
                case BacktestSpec::Kind::chain_ladder: {
                    ChainLadderFit fit = fit_cl_em(tri);
                    for (long t = 1; t <= tau_star; ++t) {
                        long dmax = std::min(horizon - t, tau_star - 1);
                        for (long d = tau_star - t + 1; d <= dmax; ++d)
                            predicted += fit.lambda[t - 1] * fit.p[d];
                    }
                    break;
                }
                case BacktestSpec::Kind::yearly_cl: {
                    YearlyClFit fit = fit_yearly_cl(tri);
                    for (const auto& [cell, v] : fit.daily_nowcast)
                        if (cell.first + cell.second <= horizon) predicted += v;
                    break;
                }
            }
            row.predicted = predicted;
            NowcastInterval iv = poisson_interval(predicted, level);
            row.lower = iv.lower;
            row.upper = iv.upper;
            row.covered = actual >= iv.lower && actual <= iv.upper;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        row.fit_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          started)
                .count();
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

std::vector<BacktestRow> moving_window(std::span<const EventRecord> events,
                                       const std::vector<double>& exposure,
                                       const CalendarConfig& calendar,
                                       const std::vector<BacktestSpec>& specs,
                                       const BacktestOptions& opts) {
    if (opts.start < 1 || opts.stop < opts.start || opts.step < 1)
        throw std::invalid_argument("invalid backtest date range");
    if (static_cast<long>(exposure.size()) < opts.stop)
        throw std::invalid_argument("exposure does not cover the date range");
    long horizon = opts.horizon >= 0
                       ? opts.horizon
                       : static_cast<long>(exposure.size());

    std::vector<long> dates;
    for (long d = opts.start; d <= opts.stop; d += opts.step)
        dates.push_back(d);

    std::vector<std::vector<BacktestRow>> per_date(dates.size());
    int workers = std::max(1, opts.workers);
    if (workers == 1) {
        for (std::size_t i = 0; i < dates.size(); ++i)
            per_date[i] = evaluate_date(events, exposure, calendar, specs,
                                        dates[i], horizon, opts.level);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < dates.size(); i = next++)
                per_date[i] = evaluate_date(events, exposure, calendar, specs,
                                            dates[i], horizon, opts.level);
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::vector<BacktestRow> rows;
    for (auto& batch : per_date)
        for (auto& row : batch) rows.push_back(std::move(row));
    return rows;
}

std::vector<BacktestSummary> summarize_backtest(
    const std::vector<BacktestRow>& rows) {
    std::vector<BacktestSummary> out;
    auto find = [&](const std::string& name) -> BacktestSummary& {
        for (auto& s : out)
            if (s.spec_name == name) return s;
        out.push_back({name, 0.0, 0.0, 0, 0});
        return out.back();
    };
    std::map<std::string, std::pair<double, long>> ape;  // sum, count
    std::map<std::string, std::pair<long, long>> cov;    // covered, total
    for (const auto& row : rows) {
        BacktestSummary& s = find(row.spec_name);
        ++s.rows;
        if (row.failed) {
            ++s.failures;
            continue;
        }
        if (row.actual > 0) {
            ape[row.spec_name].first +=
                std::abs(row.predicted - row.actual) / row.actual;
            ape[row.spec_name].second += 1;
        }
        cov[row.spec_name].first += row.covered ? 1 : 0;
        cov[row.spec_name].second += 1;
    }
    for (auto& s : out) {
        auto a = ape[s.spec_name];
        if (a.second > 0) s.mape = a.first / a.second;
        auto c = cov[s.spec_name];
        if (c.second > 0)
            s.coverage_rate = static_cast<double>(c.first) / c.second;
    }
    return out;
}

}  // namespace delaycast
