#include "delaycast/simulate.hpp"

#include <cmath>
#include <stdexcept>

namespace delaycast {

namespace {

// Counter-based splitmix64 stream; one independent stream per (seed, t).
struct DayStream {
    std::uint64_t state;

    DayStream(std::uint64_t seed, long t) {
        // Mix the key so that adjacent (seed, t) pairs decorrelate.
        state = seed ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(t));
        next();
    }
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    // Uniform on (0, 1); never exactly 0 or 1.
    double uniform() {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }
};

// Knuth's method, chunked so exp(-lambda) never underflows. Chunks are
// independent Poissons, so the sum has the right law.
long poisson_draw(DayStream& rng, double lambda) {
    long n = 0;
    while (lambda > 30.0) {
        double limit = std::exp(-30.0);
        double prod = rng.uniform();
        while (prod > limit) {
            ++n;
            prod *= rng.uniform();
        }
        lambda -= 30.0;
    }
    double limit = std::exp(-lambda);
    double prod = rng.uniform();
    while (prod > limit) {
        ++n;
        prod *= rng.uniform();
    }
    return n;
}

long inverse_cdf_draw(DayStream& rng, const std::vector<double>& pmf) {
    double u = rng.uniform();
    double cum = 0.0;
    for (std::size_t d = 0; d < pmf.size(); ++d) {
        cum += pmf[d];
        if (u <= cum) return static_cast<long>(d);
    }
    return static_cast<long>(pmf.size()) - 1;  // guard against rounding
}

}  // namespace

SimulationResult simulate_portfolio(const SimulationConfig& cfg) {
    if (cfg.tau_full < 1) throw std::invalid_argument("tau_full must be >= 1");
    if (static_cast<long>(cfg.exposure.size()) != cfg.tau_full)
        throw std::invalid_argument("exposure length must equal tau_full");

    SimulationResult out;
    out.lambda.resize(cfg.tau_full);
    out.delay_pmf.resize(cfg.tau_full);
    for (long t = 1; t <= cfg.tau_full; ++t) {
        double lambda = cfg.occurrence.lambda(t, cfg.calendar,
                                              cfg.exposure[t - 1]);
        out.lambda[t - 1] = lambda;
        out.delay_pmf[t - 1] = cfg.reporting.delay_distribution(t, cfg.calendar);

        DayStream rng(cfg.seed, t);
        long n = poisson_draw(rng, lambda);
        for (long i = 0; i < n; ++i) {
            long d = inverse_cdf_draw(rng, out.delay_pmf[t - 1]);
            out.events.push_back({t, d, t + d > cfg.tau_full});
        }
    }
    return out;
}

RunoffTriangle simulated_triangle(const SimulationResult& sim,
                                  const SimulationConfig& cfg, long tau) {
    std::vector<EventRecord> kept;
    for (const auto& e : sim.events)
        if (e.t <= tau) kept.push_back({e.t, e.d});
    std::vector<double> exposure(cfg.exposure.begin(),
                                 cfg.exposure.begin() + tau);
    return aggregate_events(kept, tau, std::move(exposure), cfg.calendar);
}

SimulationConfig make_default_scenario(long tau_full, std::uint64_t seed,
                                       ReportingSpec::Kind kind) {
    SimulationConfig cfg;
    cfg.tau_full = tau_full;
    cfg.seed = seed;
    cfg.exposure.assign(tau_full, 1.0);
    cfg.calendar.epoch = parse_iso_date("2018-01-01");  // a Monday

    // Occurrence: mid-year peak over months, mild weekday pattern, and a
    // month-day rounding spike on the 15th (the 1st is the dom reference).
    CovariateToggles occ_tog;
    occ_tog.jan1 = false;
    occ_tog.dec31 = false;
    DayDesign occ_design(occ_tog);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(occ_design.dim());
    alpha[0] = std::log(20.0);
    for (int m = 2; m <= 12; ++m)  // ref January; peak around July
        alpha[m - 1] = 0.35 * std::sin((m - 1) * 3.14159265358979 / 11.0);
    double dow_eff[6] = {0.05, 0.02, 0.0, 0.08, -0.25, -0.35};  // Tue..Sun
    for (int j = 0; j < 6; ++j) alpha[12 + j] = dow_eff[j];
    for (int dom = 2; dom <= 31; ++dom)
        alpha[18 + dom - 2] = dom == 15 ? 0.25 : -0.05;
    cfg.occurrence = OccurrenceModel{occ_design, alpha};

    // Reporting week model: dow-of-occurrence effects only.
    CovariateToggles week_tog;
    week_tog.month = false;
    week_tog.dom = false;
    week_tog.jan1 = false;
    week_tog.dec31 = false;
    DayDesign week_design(week_tog);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(week_design.dim());
    theta[0] = std::log(1.5);
    double wdow[6] = {0.05, 0.1, 0.15, 0.2, 0.3, 0.35};  // Tue..Sun
    for (int j = 0; j < 6; ++j) theta[1 + j] = wdow[j];
    WeekDelayModel week{week_design, theta, 0.5, 104};

    IntraWeekModel intra;
    if (kind == ReportingSpec::Kind::week_reverse) {
        ReverseTimeModel rev;
        rev.gamma.setZero();
        rev.gamma[0] = -0.4;
        double wk[5] = {0.3, 0.5, 0.6, 0.7, 0.8};  // workdays 1..5
        for (int j = 0; j < 5; ++j) rev.gamma[1 + j] = wk[j];
        double rdow[6] = {0.1, 0.05, 0.0, -0.1, -2.0, -4.5};  // Tue..Sun
        for (int j = 0; j < 6; ++j) rev.gamma[6 + j] = rdow[j];
        intra = rev;
    } else {
        // Weekend reporting suppression: levels wday1..5, Sat, Sun.
        IntraWeekMatrix mat;
        Eigen::Matrix<double, 1, 7> base;
        base << 0.30, 0.25, 0.20, 0.13, 0.09, 0.025, 0.005;
        for (int r = 0; r < 7; ++r) mat.P.row(r) = base;
        intra = mat;
    }
    cfg.reporting =
        ReportingModel(ReportingModel::WeekIntra{std::move(week), intra});
    return cfg;
}

}  // namespace delaycast
