#include "doctest.h"

#include <cmath>

#include "delaycast/inference.hpp"
#include "delaycast/simulate.hpp"

using namespace delaycast;

namespace {

struct Fitted {
    RunoffTriangle tri;
    EmFit fit;
};

Fitted fitted_scenario(long tau, std::uint64_t seed) {
    auto cfg = make_default_scenario(tau + 30, seed);
    auto sim = simulate_portfolio(cfg);
    auto tri = simulated_triangle(sim, cfg, tau);
    OccurrenceSpec occ;
    occ.toggles = {false, true, false, false, false};
    ReportingSpec rep;
    rep.week_toggles = {false, true, false, false, false};
    return {tri, fit_em(tri, occ, rep)};
}

// Poisson CDF by direct summation, for checking quantile intervals.
double poisson_cdf(long k, double mean) {
    double logp = -mean, cdf = 0.0;
    for (long i = 0; i <= k; ++i) {
        cdf += std::exp(logp);
        logp += std::log(mean) - std::log(static_cast<double>(i + 1));
    }
    return cdf;
}

}  // namespace

TEST_CASE("packer roundtrip preserves the model") {
    auto [tri, fit] = fitted_scenario(80, 3);
    ParameterPacker packer(fit.model, tri);
    auto x = packer.pack(fit.model);
    CHECK(x.size() == packer.dim());
    CHECK(packer.names().size() == static_cast<std::size_t>(packer.dim()));
    auto back = packer.unpack(x);
    CHECK(observed_loglik(back, tri) ==
          doctest::Approx(observed_loglik(fit.model, tri)).epsilon(1e-12));
    auto& c = tri.calendar();
    for (long t : {1L, 11L, 42L})
        for (long d : {0L, 3L, 10L})
            CHECK(back.reporting.cell_probability(t, d, c) ==
                  doctest::Approx(fit.model.reporting.cell_probability(t, d, c))
                      .epsilon(1e-10));
    CHECK_THROWS(packer.unpack(Eigen::VectorXd::Zero(packer.dim() + 1)));
}

TEST_CASE("packer rejects stationary models") {
    auto [tri, fit] = fitted_scenario(30, 5);
    JointModel model = fit.model;
    model.reporting = ReportingModel(StationaryDelayModel{{1.0}});
    CHECK_THROWS(ParameterPacker(model, tri));
}

TEST_CASE("the EM fit is a stationary point of the packed objectives") {
    auto [tri, first] = fitted_scenario(90, 7);
    // Polish well past the default stopping rule so the comparison against
    // coordinate steps is about the maximizer, not the stopping tolerance.
    OccurrenceSpec occ;
    occ.toggles = {false, true, false, false, false};
    ReportingSpec rep;
    rep.week_toggles = {false, true, false, false, false};
    EmOptions opts;
    opts.max_iter = 5000;
    opts.rel_tol = 1e-13;
    opts.abs_tol = 1e-12;
    // At tau = 90 the remainder bucket carries real mass, so the M-step
    // needs the censoring term for the fixed point to be the MLE.
    opts.include_censoring = true;
    auto fit = fit_em(tri, occ, rep, opts);
    ParameterPacker packer(fit.model, tri);
    auto x = packer.pack(fit.model);
    auto counts = e_step(fit.model, tri);
    // Baseline through the same pack/unpack path as the perturbed points.
    double l0 = observed_loglik(packer.unpack(x), tri);
    // No single-coordinate step of 1e-4 improves the observed likelihood
    // by more than the curvature allows at a stationary point.
    for (int i = 0; i < packer.dim(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += 1e-4;
        xm[i] -= 1e-4;
        double lp = observed_loglik(packer.unpack(xp), tri);
        double lm = observed_loglik(packer.unpack(xm), tri);
        CHECK(lp <= l0 + 1e-3);
        CHECK(lm <= l0 + 1e-3);
    }
    CHECK(std::isfinite(q_objective(fit.model, counts, tri)));
}

TEST_CASE("observed information and AICcd on a well-identified fit") {
    auto [tri, fit] = fitted_scenario(120, 9);
    ParameterPacker packer(fit.model, tri);
    auto info = observed_information(fit.model, tri, packer);
    CHECK(info.I_c.rows() == packer.dim());
    CHECK(info.I_o.rows() == packer.dim());
    // Both are symmetric with positive diagonals at an interior maximum.
    for (int i = 0; i < packer.dim(); ++i) {
        CHECK(info.I_c(i, i) > 0.0);
        for (int j = 0; j < packer.dim(); ++j) {
            CHECK(info.I_c(i, j) == doctest::Approx(info.I_c(j, i)).epsilon(1e-8));
        }
    }
    // Missing information is nonnegative: penalty >= 2 dim.
    double a = aiccd(fit.model, tri);
    auto counts = e_step(fit.model, tri);
    double penalty = a + 2.0 * q_objective(fit.model, counts, tri);
    CHECK(penalty >= 2.0 * packer.dim() * 0.8);
    CHECK(std::isfinite(a));
}

TEST_CASE("cooks distance flags a corrupted cell") {
    auto [tri, fit] = fitted_scenario(100, 11);
    // Corrupt one mid-triangle cell by a factor of 10 and refit.
    std::map<Cell, std::int64_t> counts = tri.counts();
    Cell target{0, 0};
    std::int64_t biggest = 0;
    for (const auto& [cell, n] : counts) {
        if (cell.first >= 30 && cell.first <= 60 && n > biggest) {
            biggest = n;
            target = cell;
        }
    }
    REQUIRE(biggest > 0);
    counts[target] *= 10;
    RunoffTriangle bad(100, counts, tri.exposure(), tri.calendar());
    OccurrenceSpec occ;
    occ.toggles = {false, true, false, false, false};
    ReportingSpec rep;
    rep.week_toggles = {false, true, false, false, false};
    auto bad_fit = fit_em(bad, occ, rep);
    ParameterPacker packer(bad_fit.model, bad);
    auto info = observed_information(bad_fit.model, bad, packer);
    auto all = cooks_distances(bad_fit.model, bad, packer, info.I_c);
    Cell argmax{0, 0};
    double best = -1.0;
    for (const auto& [cell, gd] : all) {
        CHECK(gd >= 0.0);
        if (gd > best) {
            best = gd;
            argmax = cell;
        }
    }
    CHECK(argmax == target);
    // The single-cell entry point agrees with the bulk computation.
    CHECK(cooks_distance(bad_fit.model, bad, packer, info.I_c, target.first,
                         target.second) == doctest::Approx(best).epsilon(1e-6));
}

TEST_CASE("nowcast decomposes consistently") {
    auto [tri, fit] = fitted_scenario(100, 13);
    auto nc = nowcast(fit.model, tri);
    double occ_sum = 0.0;
    for (const auto& [t, v] : nc.by_occurrence) occ_sum += v;
    CHECK(nc.total == doctest::Approx(occ_sum).epsilon(1e-10));
    double rep_sum = 0.0;
    for (const auto& [rho, v] : nc.by_reporting) {
        CHECK(rho > 100);
        rep_sum += v;
    }
    CHECK(rep_sum == doctest::Approx(nc.total - nc.remainder).epsilon(1e-8));
    double cell_sum = 0.0;
    for (const auto& [cell, v] : nc.cell_means) {
        CHECK(cell.first + cell.second > 100);
        cell_sum += v;
    }
    CHECK(cell_sum == doctest::Approx(rep_sum).epsilon(1e-8));
    // Grouping by week/month partitions the reporting-date masses.
    for (auto g : {NowcastGrouping::week, NowcastGrouping::month}) {
        auto groups = nowcast_groups(nc, g, tri.calendar());
        double s = 0.0;
        for (const auto& [key, v] : groups) s += v;
        CHECK(s == doctest::Approx(rep_sum).epsilon(1e-8));
    }
}

TEST_CASE("poisson intervals are equal-tail quantile intervals") {
    for (double mean : {0.3, 3.0, 47.5}) {
        auto iv = poisson_interval(mean, 0.95);
        // lower = min{k: F(k) >= 0.025}, upper = min{k: F(k) >= 0.975}
        if (iv.lower > 0) CHECK(poisson_cdf(iv.lower - 1, mean) < 0.025);
        CHECK(poisson_cdf(iv.lower, mean) >= 0.025);
        CHECK(poisson_cdf(iv.upper - 1, mean) < 0.975);
        CHECK(poisson_cdf(iv.upper, mean) >= 0.975);
        CHECK(iv.mean == doctest::Approx(mean));
    }
    // Large means switch to the normal approximation but stay near the
    // exact quantiles.
    auto big = poisson_interval(2e6, 0.95);
    CHECK(big.lower == doctest::Approx(2e6 - 1.959964 * std::sqrt(2e6)).epsilon(1e-3));
    CHECK(big.upper == doctest::Approx(2e6 + 1.959964 * std::sqrt(2e6)).epsilon(1e-3));
}

TEST_CASE("simultaneous intervals widen with the group count") {
    std::map<long, double> groups{{1, 10.0}, {2, 20.0}, {3, 5.0}, {4, 12.0}};
    auto plain = prediction_intervals(groups, 0.95, false);
    auto simul = prediction_intervals(groups, 0.95, true);
    REQUIRE(plain.size() == 4);
    for (const auto& [key, iv] : plain) {
        CHECK(simul.at(key).lower <= iv.lower);
        CHECK(simul.at(key).upper >= iv.upper);
    }
}
