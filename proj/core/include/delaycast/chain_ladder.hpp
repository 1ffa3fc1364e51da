#pragma once

#include <map>
#include <vector>

#include "delaycast/triangle.hpp"

namespace delaycast {

// Chain-ladder development factors f_1..f_{tau-1}; f[d-1] holds f_d.
struct DevelopmentFactors {
    std::vector<double> f;
};

// f_d = sum_{t <= tau-d} C_td / sum_{t <= tau-d} C_{t,d-1}. Columns with a
// zero denominator carry no information and get factor 1 with a warning.
DevelopmentFactors development_factors(const RunoffTriangle& tri);

// Incremental lower-triangle forecasts N_td for t + d > tau, d <= tau-1,
// obtained by differencing the cumulative chain-ladder projections
// C_td = C_{t,tau-t} * f_{tau-t+1} * ... * f_d.
std::map<Cell, double> cl_forecast(const RunoffTriangle& tri,
                                   const DevelopmentFactors& f);

// Stationary (chain-ladder) Poisson MLE: lambda_t and p_0..p_{tau-1}
// solving the marginal equations, via EM from the development-factor start
// (which converges on the first M-step).
struct ChainLadderFit {
    std::vector<double> lambda;  // per t
    std::vector<double> p;       // per d
};

ChainLadderFit fit_cl_em(const RunoffTriangle& tri);

// Yearly chain ladder: cells aggregated by occurrence year and reporting
// lag year(t+d) - year(t), fitted by the stationary EM on the yearly grid,
// with nowcasts allocated back to days uniformly within each year-lag cell.
struct YearlyClFit {
    std::vector<int> years;              // calendar years covered, ascending
    std::vector<double> lambda_year;     // per occurrence year
    std::vector<double> p_lag;           // per lag 0..n_years-1
    std::vector<bool> short_year;        // trailing/leading partial years
    std::map<Cell, double> daily_nowcast;  // (t, d) for t + d > tau
};

YearlyClFit fit_yearly_cl(const RunoffTriangle& tri);

}  // namespace delaycast
