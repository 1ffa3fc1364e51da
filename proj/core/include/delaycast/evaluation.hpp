#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "delaycast/em.hpp"
#include "delaycast/triangle.hpp"

namespace delaycast {

// Events with t <= tau_star reported after tau_star (and, when a horizon is
// given, at or before it). This is the backtest ground truth.
long actual_ibnr(std::span<const EventRecord> events, long tau_star,
                 long horizon = -1);

// One estimation strategy entered into the moving-window comparison.
struct BacktestSpec {
    std::string name;
    enum class Kind {
        em,             // fit_em with the attached specs
        chain_ladder,   // daily stationary chain ladder
        yearly_cl,      // yearly chain ladder
    } kind = Kind::em;
    OccurrenceSpec occurrence;
    ReportingSpec reporting;
    EmOptions em_options;
};

struct BacktestRow {
    long eval_date = 0;  // tau*
    std::string spec_name;
    long horizon = 0;
    long actual = 0;
    double predicted = 0.0;
    long lower = 0;
    long upper = 0;
    bool covered = false;
    bool failed = false;      // per-date fit failure, evaluation continued
    std::string error;
    double fit_seconds = 0.0;
};

struct BacktestOptions {
    long start = 0;          // first tau*
    long stop = 0;           // last tau* (inclusive)
    long step = 1;
    long horizon = -1;       // default: full-data end
    double level = 0.95;
    int workers = 1;         // evaluation dates are independent
};

// Rebuilds the triangle at each tau* strictly from events with t+d <= tau*,
// refits each spec from scratch and records predicted vs actual IBNR.
std::vector<BacktestRow> moving_window(std::span<const EventRecord> events,
                                       const std::vector<double>& exposure,
                                       const CalendarConfig& calendar,
                                       const std::vector<BacktestSpec>& specs,
                                       const BacktestOptions& opts);

struct BacktestSummary {
    std::string spec_name;
    double mape = 0.0;           // over non-failed rows with actual > 0
    double coverage_rate = 0.0;  // fraction of non-failed rows covered
    long failures = 0;
    long rows = 0;
};

std::vector<BacktestSummary> summarize_backtest(
    const std::vector<BacktestRow>& rows);

}  // namespace delaycast
