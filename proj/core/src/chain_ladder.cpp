#include "delaycast/chain_ladder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "delaycast/log.hpp"

namespace delaycast {

DevelopmentFactors development_factors(const RunoffTriangle& tri) {
    long tau = tri.tau();
    auto cum = cumulative_counts(tri);
    DevelopmentFactors out;
    out.f.resize(tau - 1, 1.0);
    for (long d = 1; d <= tau - 1; ++d) {
        double num = 0.0, den = 0.0;
        for (long t = 1; t <= tau - d; ++t) {
            num += static_cast<double>(cum[{t, d}]);
            den += static_cast<double>(cum[{t, d - 1}]);
        }
        if (den <= 0.0) {
            log_warn("development factor f_" + std::to_string(d) +
                     " has zero denominator; set to 1");
            out.f[d - 1] = 1.0;
        } else {
            out.f[d - 1] = num / den;
        }
    }
    return out;
}

std::map<Cell, double> cl_forecast(const RunoffTriangle& tri,
                                   const DevelopmentFactors& f) {
    long tau = tri.tau();
    std::map<Cell, double> out;
    for (long t = 2; t <= tau; ++t) {
        double cum = 0.0;
        for (long d = 0; d <= tau - t; ++d)
            cum += static_cast<double>(tri.count(t, d));
        double prev = cum;
        for (long d = tau - t + 1; d <= tau - 1; ++d) {
            double next = prev * f.f[d - 1];
            out[{t, d}] = next - prev;
            prev = next;
        }
    }
    return out;
}

namespace {

// One round of the stationary M-step marginal equations on complete
// expected counts.
void stationary_margins(const std::vector<std::vector<double>>& n,
                        std::vector<double>& lambda, std::vector<double>& p) {
    std::size_t rows = n.size(), cols = n[0].size();
    double grand = 0.0;
    for (std::size_t t = 0; t < rows; ++t) {
        double rt = 0.0;
        for (std::size_t d = 0; d < cols; ++d) rt += n[t][d];
        lambda[t] = rt;
        grand += rt;
    }
    for (std::size_t d = 0; d < cols; ++d) {
        double ct = 0.0;
        for (std::size_t t = 0; t < rows; ++t) ct += n[t][d];
        p[d] = grand > 0.0 ? ct / grand : (d == 0 ? 1.0 : 0.0);
    }
}

}  // namespace

ChainLadderFit fit_cl_em(const RunoffTriangle& tri) {
    long tau = tri.tau();
    // Complete counts: observed upper triangle plus development-factor
    // forecasts for the lower triangle. One M-step from this start already
    // solves the marginal equations; the loop below only polishes.
    std::vector<std::vector<double>> n(tau, std::vector<double>(tau, 0.0));
    for (const auto& [cell, c] : tri.counts())
        n[cell.first - 1][cell.second] = static_cast<double>(c);
    auto fc = cl_forecast(tri, development_factors(tri));
    for (const auto& [cell, v] : fc) n[cell.first - 1][cell.second] = v;

    ChainLadderFit fit;
    fit.lambda.resize(tau);
    fit.p.resize(tau);
    for (int iter = 0; iter < 200; ++iter) {
        stationary_margins(n, fit.lambda, fit.p);
        double max_change = 0.0;
        for (long t = 1; t <= tau; ++t) {
            for (long d = tau - t + 1; d <= tau - 1; ++d) {
                double v = fit.lambda[t - 1] * fit.p[d];
                max_change = std::max(max_change, std::abs(v - n[t - 1][d]));
                n[t - 1][d] = v;
            }
        }
        if (max_change < 1e-12) break;
    }
    return fit;
}

YearlyClFit fit_yearly_cl(const RunoffTriangle& tri) {
    long tau = tri.tau();
    const CalendarConfig& cal = tri.calendar();
    auto year_of = [&](long t) {
        return int(std::chrono::year_month_day(cal.date(t)).year());
    };
    int y0 = year_of(1), y1 = year_of(tau);
    int ny = y1 - y0 + 1;
    if (ny < 1) throw std::runtime_error("triangle spans no full year");

    // Days per occurrence year within [1, tau], and flagged short years.
    std::vector<long> year_start(ny + 1);
    {
        long t = 1;
        for (int y = 0; y < ny; ++y) {
            year_start[y] = t;
            while (t <= tau && year_of(t) == y0 + y) ++t;
        }
        year_start[ny] = tau + 1;
    }

    YearlyClFit out;
    out.years.resize(ny);
    out.short_year.resize(ny);
    for (int y = 0; y < ny; ++y) {
        out.years[y] = y0 + y;
        long days = year_start[y + 1] - year_start[y];
        Date jan1 = parse_iso_date(std::to_string(y0 + y) + "-01-01");
        Date next_jan1 = parse_iso_date(std::to_string(y0 + y + 1) + "-01-01");
        long full = (next_jan1 - jan1).count();
        out.short_year[y] = days != full;
        if (out.short_year[y])
            log_warn("year " + std::to_string(y0 + y) +
                     " covers only " + std::to_string(days) +
                     " days; treated as a short exposure period");
    }

    // Daily cells grouped by (occurrence year, reporting-year lag). Lags are
    // bounded by the data span; the yearly chain ladder does not extrapolate
    // past that. A cell's reporting year is year(t + d).
    std::vector<std::vector<double>> obs(ny, std::vector<double>(ny, 0.0));
    std::vector<std::vector<long>> cells_total(ny, std::vector<long>(ny, 0));
    std::vector<std::vector<long>> cells_unobs(ny, std::vector<long>(ny, 0));
    for (const auto& [cell, c] : tri.counts()) {
        int y = year_of(cell.first) - y0;
        int l = year_of(cell.first + cell.second) - y0 - y;
        if (l < ny) obs[y][l] += static_cast<double>(c);
    }
    for (long t = 1; t <= tau; ++t) {
        int y = year_of(t) - y0;
        // Days of reporting year y+l reachable from t: bounded per lag.
        // Reporting years past the data span are not extrapolated.
        for (int l = 0; y + l < ny; ++l) {
            int ry = y0 + y + l;
            Date lo = parse_iso_date(std::to_string(ry) + "-01-01");
            Date hi = parse_iso_date(std::to_string(ry + 1) + "-01-01");
            long dlo = std::max<long>(0, cal.day_index(lo) - t);
            long dhi = cal.day_index(hi) - 1 - t;
            if (dhi < dlo) continue;
            long total = dhi - dlo + 1;
            long observed = std::max<long>(
                0, std::min<long>(dhi, tau - t) - dlo + 1);
            cells_total[y][l] += total;
            cells_unobs[y][l] += total - observed;
        }
    }

    // Stationary EM on the yearly grid. Partially observed year-lag cells
    // are completed with their unobserved-fraction expectation; cells whose
    // reporting year lies past the data span are entirely unobserved and
    // completed in full, which reproduces the truncated marginal equations.
    out.lambda_year.assign(ny, 0.0);
    out.p_lag.assign(ny, 0.0);
    std::vector<std::vector<double>> n = obs;
    for (int iter = 0; iter < 2000; ++iter) {
        stationary_margins(n, out.lambda_year, out.p_lag);
        double max_change = 0.0;
        for (int y = 0; y < ny; ++y) {
            for (int l = 0; l < ny; ++l) {
                double frac;
                if (y + l >= ny) {
                    frac = 1.0;
                } else if (cells_unobs[y][l] == 0 || cells_total[y][l] == 0) {
                    continue;
                } else {
                    frac = static_cast<double>(cells_unobs[y][l]) /
                           static_cast<double>(cells_total[y][l]);
                }
                double v = obs[y][l] + out.lambda_year[y] * out.p_lag[l] * frac;
                max_change = std::max(max_change, std::abs(v - n[y][l]));
                n[y][l] = v;
            }
        }
        if (max_change < 1e-12) break;
    }

    // Uniform daily back-allocation of the unobserved mass of each cell.
    for (long t = 1; t <= tau; ++t) {
        int y = year_of(t) - y0;
        for (int l = 0; l < ny - y; ++l) {
            if (cells_unobs[y][l] == 0) continue;
            double per_day = out.lambda_year[y] * out.p_lag[l] *
                             (1.0 / static_cast<double>(cells_total[y][l]));
            int ry = y0 + y + l;
            Date lo = parse_iso_date(std::to_string(ry) + "-01-01");
            Date hi = parse_iso_date(std::to_string(ry + 1) + "-01-01");
            long dlo = std::max<long>(0, cal.day_index(lo) - t);
            long dhi = cal.day_index(hi) - 1 - t;
            for (long d = std::max(dlo, tau - t + 1); d <= dhi; ++d)
                out.daily_nowcast[{t, d}] = per_day;
        }
    }
    return out;
}

}  // namespace delaycast
