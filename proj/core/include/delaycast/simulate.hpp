#pragma once

#include <cstdint>
#include <vector>

#include "delaycast/em.hpp"

namespace delaycast {

// Generative setup: Poisson occurrences N_t ~ Poisson(e_t exp(x_t' alpha)),
// delays drawn independently from the reporting model's p_td.
struct SimulationConfig {
    long tau_full = 0;
    OccurrenceModel occurrence;
    ReportingModel reporting;
    std::vector<double> exposure;  // length tau_full
    CalendarConfig calendar;
    std::uint64_t seed = 1;
};

struct SimulatedEvent {
    long t;
    long d;
    bool beyond_horizon;  // t + d > tau_full
};

struct SimulationResult {
    std::vector<SimulatedEvent> events;
    std::vector<double> lambda;                  // generative intensities
    std::vector<std::vector<double>> delay_pmf;  // generative p_td per t
};

// Deterministic under (seed, config); per-day streams are independent so
// generation can run day-parallel without changing the draw sequence.
SimulationResult simulate_portfolio(const SimulationConfig& cfg);

// The simulated events restricted to t + d <= tau, aggregated.
RunoffTriangle simulated_triangle(const SimulationResult& sim,
                                  const SimulationConfig& cfg, long tau);

// Artifact default scenario: mid-year occurrence peak, weekend reporting
// suppression, month-day rounding spikes. Runs on a holiday-free calendar
// starting Monday 2018-01-01.
SimulationConfig make_default_scenario(long tau_full, std::uint64_t seed,
                                       ReportingSpec::Kind kind =
                                           ReportingSpec::Kind::week_matrix);

}  // namespace delaycast
