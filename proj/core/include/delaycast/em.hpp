#pragma once

#include <vector>

#include "delaycast/reporting.hpp"
#include "delaycast/triangle.hpp"

namespace delaycast {

// Occurrence intensity lambda_t = e_t * exp(x_t' alpha).
struct OccurrenceModel {
    DayDesign design;
    Eigen::VectorXd alpha;

    double lambda(long t, const CalendarConfig& cal, double exposure) const {
        return exposure * std::exp(design.predictor(t, cal, alpha));
    }
};

// Occurrence-model structure for the M-step.
struct OccurrenceSpec {
    CovariateToggles toggles;
};

struct JointModel {
    OccurrenceModel occurrence;
    ReportingModel reporting;
    long tau = 0;

    double lambda(long t, const RunoffTriangle& tri) const {
        return occurrence.lambda(t, tri.calendar(), tri.exposure_at(t));
    }
};

// Observed-data log-likelihood, factorial constants dropped:
// sum_t [ -lambda_t p_t^r + N_t^r log lambda_t + sum_{d<=tau-t} N_td log p_td ].
// Returns -inf when some observed cell has zero probability.
double observed_loglik(const JointModel& model, const RunoffTriangle& tri);
double observed_loglik(const JointModel& model, const RunoffTriangle& tri,
                       const DelayTable& table);

// Expected complete-data counts under the current model: observed cells
// verbatim, unreported cells lambda_t * p_td, remainder lambda_t * tail mass.
CompleteCounts e_step(const JointModel& model, const RunoffTriangle& tri);

// Maximizer of the complete-data likelihood given expected counts:
// weighted Poisson fit of the row totals with offset log e_t, plus the
// reporting M-step. `previous` seeds warm starts.
JointModel m_step(const CompleteCounts& counts, const OccurrenceSpec& occ_spec,
                  const ReportingSpec& rep_spec, const RunoffTriangle& tri,
                  bool include_censoring = false,
                  const JointModel* previous = nullptr);

// Chain-ladder completion of the triangle (development-factor forecasts for
// the lower triangle, zero beyond d = tau-1), used as the EM starting point.
CompleteCounts initialize_from_chain_ladder(const RunoffTriangle& tri);

struct EmOptions {
    int max_iter = 500;
    double rel_tol = 1e-8;   // |l_k - l_{k-1}| / |0.1 + l_k|
    double abs_tol = 1e-10;  // absolute-change fallback
    bool include_censoring = false;
};

// exact convergence rule: |l_k - l_{k-1}| / |0.1 + l_k| < rel_tol, with an
// absolute-change fallback for the near-zero denominator.
bool em_converged(double prev_loglik, double cur_loglik, double rel_tol,
                  double abs_tol);

struct EmTraceRow {
    int iteration = 0;
    double loglik = 0.0;
    double max_param_change = 0.0;
};

struct EmFit {
    JointModel model;
    std::vector<EmTraceRow> trace;
    int iterations = 0;
    bool converged = false;
};

// Full EM loop from chain-ladder initialization.
EmFit fit_em(const RunoffTriangle& tri, const OccurrenceSpec& occ_spec,
             const ReportingSpec& rep_spec, const EmOptions& opts = {});

}  // namespace delaycast
