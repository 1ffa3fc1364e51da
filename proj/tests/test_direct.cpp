#include "doctest.h"

#include <cmath>

#include "delaycast/direct.hpp"
#include "delaycast/simulate.hpp"

using namespace delaycast;

namespace {

RunoffTriangle scenario_triangle(long tau, std::uint64_t seed) {
    auto cfg = make_default_scenario(tau + 30, seed);
    auto sim = simulate_portfolio(cfg);
    return simulated_triangle(sim, cfg, tau);
}

}  // namespace

TEST_CASE("delay levels are identity then weekly pools") {
    CHECK(direct_delay_level(0, 28) == 0);
    CHECK(direct_delay_level(28, 28) == 28);
    CHECK(direct_delay_level(29, 28) == direct_delay_level(35, 28));
    CHECK(direct_delay_level(29, 28) != direct_delay_level(36, 28));
    CHECK(direct_delay_level(3, 0) == direct_delay_level(6, 0));
    CHECK(direct_delay_level(7, 0) == direct_delay_level(6, 0));
    CHECK(direct_delay_level(8, 0) != direct_delay_level(7, 0));
}

TEST_CASE("direct design enumerates every observed cell") {
    auto tri = scenario_triangle(40, 3);
    DirectSpec spec;
    auto dd = build_direct_design(tri, spec);
    CHECK(dd.cells.size() == static_cast<std::size_t>(40 * 41 / 2));
    CHECK(dd.design.X.rows() == static_cast<Eigen::Index>(dd.cells.size()));
    CHECK(dd.design.X.cols() == dd.layout.dim);
    // Responses live outside the design; rows are cells in a fixed order.
    for (std::size_t i = 1; i < dd.cells.size(); ++i)
        CHECK(dd.cells[i - 1] < dd.cells[i]);
}

TEST_CASE("structured direct fit nowcasts the scenario sensibly") {
    auto tri = scenario_triangle(120, 7);
    DirectSpec spec;
    spec.occurrence_toggles = {false, true, false, false, false};
    auto fit = fit_direct(tri, spec);
    CHECK(fit.fit.converged);
    auto nc = nowcast_direct(fit, tri);
    CHECK(nc.total > 0.0);
    for (const auto& [cell, v] : nc.cell_means) {
        CHECK(cell.first + cell.second > 120);
        CHECK(v >= 0.0);
    }
    // With daily data and weekly pooling no level is unobserved.
    CHECK(nc.skipped.empty());
}

TEST_CASE("per-day variant flags days resting on one positive cell") {
    auto tri = scenario_triangle(60, 9);
    DirectSpec spec;
    spec.variant = DirectSpec::Variant::per_day_alpha;
    auto fit = fit_direct(tri, spec);
    CHECK(fit.fit.converged);
    // The last day has a single observed cell; if positive it is fragile.
    if (tri.count(60, 0) > 0)
        CHECK(std::find(fit.flagged_days.begin(), fit.flagged_days.end(), 60) !=
              fit.flagged_days.end());
    auto nc = nowcast_direct(fit, tri);
    CHECK(std::isfinite(nc.total));
}

TEST_CASE("structured fit recovers a stationary intensity") {
    // Intercept-only data: 6 events per day at delay 0 or 1, no calendar
    // structure. The direct fit reduces to the two-way margins.
    std::vector<EventRecord> events;
    for (long t = 1; t <= 50; ++t)
        for (int i = 0; i < 6; ++i) events.push_back({t, i % 2});
    CalendarConfig cal;
    cal.epoch = parse_iso_date("2018-01-01");
    auto tri = aggregate_events(events, 50, std::vector<double>(50, 1.0), cal);
    DirectSpec spec;
    spec.occurrence_toggles = {false, false, false, false, false};
    spec.rep_dow = spec.rep_holiday = spec.rep_next_holiday = false;
    auto fit = fit_direct(tri, spec);
    REQUIRE(fit.fit.converged);
    // Cell mean at delay 0 is 3 events/day.
    double mu0 = std::exp(fit.fit.coefficients[0]);
    CHECK(mu0 == doctest::Approx(3.0).epsilon(0.05));
}
