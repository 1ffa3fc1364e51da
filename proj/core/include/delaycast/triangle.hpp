#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "delaycast/calendar.hpp"

namespace delaycast {

// One event: occurrence day index and reporting delay in days.
struct EventRecord {
    long t;  // occurrence day, >= 1
    long d;  // delay in days, >= 0
};

using Cell = std::pair<long, long>;  // (t, d)

// Daily run-off triangle: sparse counts N_td for t + d <= tau, positive
// daily exposure e_t and the calendar the day grid refers to.
// Immutable after construction; read-shareable across threads.
class RunoffTriangle {
  public:
    RunoffTriangle(long tau, std::map<Cell, std::int64_t> counts,
                   std::vector<double> exposure, CalendarConfig calendar);

    long tau() const { return tau_; }
    const std::map<Cell, std::int64_t>& counts() const { return counts_; }
    const std::vector<double>& exposure() const { return exposure_; }
    double exposure_at(long t) const { return exposure_[t - 1]; }
    const CalendarConfig& calendar() const { return calendar_; }

    std::int64_t count(long t, long d) const {
        auto it = counts_.find({t, d});
        return it == counts_.end() ? 0 : it->second;
    }
    // N_t^r: total reported events with occurrence day t.
    std::int64_t reported_total(long t) const { return row_totals_[t - 1]; }
    std::int64_t total_reported() const { return total_; }

  private:
    long tau_;
    std::map<Cell, std::int64_t> counts_;
    std::vector<double> exposure_;
    CalendarConfig calendar_;
    std::vector<std::int64_t> row_totals_;
    std::int64_t total_ = 0;
};

// Tally events into the triangle; events reported after tau are dropped
// (they form the held-out IBNR set). Throws on t > tau, t < 1, d < 0 or
// nonpositive exposure.
RunoffTriangle aggregate_events(std::span<const EventRecord> events, long tau,
                                std::vector<double> exposure,
                                CalendarConfig calendar);

// Cumulative counts C_td = sum_{j<=d} N_tj for every observed cell.
std::map<Cell, std::int64_t> cumulative_counts(const RunoffTriangle& tri);

struct CellSplit {
    std::vector<Cell> observed;    // t + d <= tau
    std::vector<Cell> unreported;  // t + d > tau, d <= horizon
};

// Enumerate observed and unreported cell index sets up to delay horizon D.
CellSplit observed_ibnr_split(const RunoffTriangle& tri, long horizon);

}  // namespace delaycast
