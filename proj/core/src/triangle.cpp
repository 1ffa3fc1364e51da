#include "delaycast/triangle.hpp"

#include <stdexcept>
#include <string>

namespace delaycast {

RunoffTriangle::RunoffTriangle(long tau, std::map<Cell, std::int64_t> counts,
                               std::vector<double> exposure,
                               CalendarConfig calendar)
    : tau_(tau),
      counts_(std::move(counts)),
      exposure_(std::move(exposure)),
      calendar_(std::move(calendar)),
      row_totals_(static_cast<std::size_t>(tau), 0) {
    if (tau_ < 1) throw std::invalid_argument("tau must be >= 1");
    if (static_cast<long>(exposure_.size()) != tau_)
        throw std::invalid_argument("exposure length must equal tau");
    for (long t = 1; t <= tau_; ++t) {
        if (!(exposure_[t - 1] > 0.0))
            throw std::invalid_argument("exposure must be strictly positive on day " +
                                        std::to_string(t));
    }
    for (const auto& [cell, n] : counts_) {
        auto [t, d] = cell;
        if (t < 1 || d < 0 || t + d > tau_ || n < 0)
            throw std::invalid_argument("invalid triangle cell (" +
                                        std::to_string(t) + "," +
                                        std::to_string(d) + ")");
        row_totals_[t - 1] += n;
        total_ += n;
    }
}

RunoffTriangle aggregate_events(std::span<const EventRecord> events, long tau,
                                std::vector<double> exposure,
                                CalendarConfig calendar) {
    std::map<Cell, std::int64_t> counts;
    for (const auto& ev : events) {
        if (ev.t < 1 || ev.t > tau)
            throw std::invalid_argument("event occurrence day " +
                                        std::to_string(ev.t) +
                                        " outside 1..tau");
        if (ev.d < 0) throw std::invalid_argument("negative reporting delay");
        if (ev.t + ev.d > tau) continue;  // not yet reported at tau
        ++counts[{ev.t, ev.d}];
    }
    return RunoffTriangle(tau, std::move(counts), std::move(exposure),
                          std::move(calendar));
}

std::map<Cell, std::int64_t> cumulative_counts(const RunoffTriangle& tri) {
    std::map<Cell, std::int64_t> cum;
    for (long t = 1; t <= tri.tau(); ++t) {
        std::int64_t running = 0;
        for (long d = 0; d <= tri.tau() - t; ++d) {
            running += tri.count(t, d);
            cum[{t, d}] = running;
        }
    }
    return cum;
}

CellSplit observed_ibnr_split(const RunoffTriangle& tri, long horizon) {
    if (horizon < tri.tau() - 1)
        throw std::invalid_argument("delay horizon must be >= tau - 1");
    CellSplit split;
    for (long t = 1; t <= tri.tau(); ++t) {
        for (long d = 0; d <= tri.tau() - t; ++d) split.observed.push_back({t, d});
        for (long d = tri.tau() - t + 1; d <= horizon; ++d)
            split.unreported.push_back({t, d});
    }
    return split;
}

}  // namespace delaycast
