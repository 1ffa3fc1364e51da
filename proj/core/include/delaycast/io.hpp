#pragma once

#include <string>
#include <vector>

#include "delaycast/em.hpp"
#include "delaycast/evaluation.hpp"
#include "delaycast/inference.hpp"
#include "delaycast/triangle.hpp"

namespace delaycast {

// Events file: CSV columns occurrence_date, report_date (ISO-8601).
// Day indices and delays are computed against the calendar's epoch; rows
// with an occurrence before the epoch are rejected.
std::vector<EventRecord> read_events_csv(const std::string& path,
                                         const CalendarConfig& cal);
void write_events_csv(const std::string& path,
                      const std::vector<EventRecord>& events,
                      const CalendarConfig& cal);

// Exposure file: CSV columns month (YYYY-MM), earned_exposure. Monthly
// exposure becomes daily by dividing by the month length; returns values
// for day indices 1..tau and throws when a covered day has no month row.
std::vector<double> read_exposure_csv(const std::string& path,
                                      const CalendarConfig& cal, long tau);

// Holiday file: CSV columns date (ISO-8601), class in {national, unofficial}.
void read_holidays_csv(const std::string& path, CalendarConfig& cal);

void write_trace_csv(const std::string& path,
                     const std::vector<EmTraceRow>& trace);

void write_nowcast_csv(const std::string& path,
                       const std::map<long, double>& groups,
                       const std::map<long, NowcastInterval>& intervals);

void write_backtest_csv(const std::string& path,
                        const std::vector<BacktestRow>& rows);
void write_backtest_summary_json(const std::string& path,
                                 const std::vector<BacktestSummary>& summary);

// Model serialization: coefficient name -> value maps, the intra-week
// matrix as a 7x7 array, phi and the week cutoff; round-trips exactly at
// double precision (values stored as shortest-roundtrip decimals).
std::string model_to_json(const JointModel& model);
JointModel model_from_json(const std::string& json_text);
void write_model_json(const std::string& path, const JointModel& model);
JointModel read_model_json(const std::string& path);

// Run manifest: config hash (FNV-1a of the config text), seed, version.
void write_manifest_json(const std::string& path,
                         const std::string& config_text, std::uint64_t seed,
                         const std::string& version);

// Write-to-temp-then-rename, so readers never observe partial files.
void atomic_write(const std::string& path, const std::string& contents);

}  // namespace delaycast
