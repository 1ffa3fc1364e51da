#include "delaycast/em.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "delaycast/chain_ladder.hpp"
#include "delaycast/glm.hpp"
#include "delaycast/log.hpp"

namespace delaycast {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double observed_loglik(const JointModel& model, const RunoffTriangle& tri,
                       const DelayTable& table) {
    long tau = tri.tau();
    double ll = 0.0;
    for (long t = 1; t <= tau; ++t) {
        double lambda = model.lambda(t, tri);
        double reported = table.reported_mass(t);
        ll -= lambda * reported;
        std::int64_t nt = tri.reported_total(t);
        if (nt > 0) {
            if (lambda <= 0.0) return kNegInf;
            ll += nt * std::log(lambda);
        }
    }
    for (const auto& [cell, n] : tri.counts()) {
        if (n == 0) continue;
        double p = table.cell(cell.first, cell.second);
        if (p <= 0.0) return kNegInf;
        ll += n * std::log(p);
    }
    return ll;
}

double observed_loglik(const JointModel& model, const RunoffTriangle& tri) {
    DelayTable table(model.reporting, tri.calendar(), tri.tau());
    return observed_loglik(model, tri, table);
}

CompleteCounts e_step(const JointModel& model, const RunoffTriangle& tri) {
    long tau = tri.tau();
    DelayTable table(model.reporting, tri.calendar(), tau);
    CompleteCounts counts;
    counts.expected = Eigen::MatrixXd::Zero(tau, tau);
    counts.remainder.resize(tau);
    counts.row_totals.resize(tau);
    for (long t = 1; t <= tau; ++t) {
        double lambda = model.lambda(t, tri);
        for (long d = tau - t + 1; d <= tau - 1; ++d)
            counts.expected(t - 1, d) = lambda * table.cell(t, d);
        counts.remainder[t - 1] = lambda * table.tail_mass(t);
    }
    for (const auto& [cell, n] : tri.counts())
        counts.expected(cell.first - 1, cell.second) =
            static_cast<double>(n);
    counts.row_totals =
        counts.expected.rowwise().sum() + counts.remainder;
    return counts;
}

JointModel m_step(const CompleteCounts& counts, const OccurrenceSpec& occ_spec,
                  const ReportingSpec& rep_spec, const RunoffTriangle& tri,
                  bool include_censoring, const JointModel* previous) {
    long tau = tri.tau();
    const CalendarConfig& cal = tri.calendar();

    DayDesign design(occ_spec.toggles);
    DesignMatrix dm;
    dm.X.resize(tau, design.dim());
    dm.offset.resize(tau);
    Eigen::RowVectorXd row(design.dim());
    for (long t = 1; t <= tau; ++t) {
        design.fill_row(t, cal, row);
        dm.X.row(t - 1) = row;
        dm.offset[t - 1] = std::log(tri.exposure_at(t));
    }
    // Calendar levels absent from the window leave empty dummy columns;
    // fit on the identifiable ones and keep the rest at zero.
    std::vector<int> active = identifiable_columns(dm.X);
    DesignMatrix reduced;
    reduced.X.resize(tau, static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j)
        reduced.X.col(j) = dm.X.col(active[j]);
    reduced.offset = dm.offset;
    GlmOptions opts;
    if (previous && previous->occurrence.alpha.size() == design.dim()) {
        Eigen::VectorXd init(active.size());
        for (std::size_t j = 0; j < active.size(); ++j)
            init[j] = previous->occurrence.alpha[active[j]];
        opts.beta_init = init;
    }
    FitResult occ_fit = fit_weighted_poisson(reduced, counts.row_totals, opts);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(design.dim());
    for (std::size_t j = 0; j < active.size(); ++j)
        alpha[active[j]] = occ_fit.coefficients[j];

    ReportingModel reporting = reporting_m_step(
        counts, rep_spec, cal, tau, include_censoring,
        previous ? &previous->reporting : nullptr);

    return JointModel{OccurrenceModel{design, std::move(alpha)},
                      std::move(reporting), tau};
}

CompleteCounts initialize_from_chain_ladder(const RunoffTriangle& tri) {
    long tau = tri.tau();
    CompleteCounts counts;
    counts.expected = Eigen::MatrixXd::Zero(tau, tau);
    counts.remainder = Eigen::VectorXd::Zero(tau);
    for (const auto& [cell, n] : tri.counts())
        counts.expected(cell.first - 1, cell.second) =
            static_cast<double>(n);
    auto fc = cl_forecast(tri, development_factors(tri));
    for (const auto& [cell, v] : fc)
        counts.expected(cell.first - 1, cell.second) = v;
    counts.row_totals = counts.expected.rowwise().sum();
    return counts;
}

bool em_converged(double prev_loglik, double cur_loglik, double rel_tol,
                  double abs_tol) {
    double change = std::abs(cur_loglik - prev_loglik);
    if (change / std::abs(0.1 + cur_loglik) < rel_tol) return true;
    return change < abs_tol;
}

namespace {

// Sup-norm distance between successive parameter vectors, for the trace.
double max_param_change(const JointModel& a, const JointModel& b) {
    double m = 0.0;
    if (a.occurrence.alpha.size() == b.occurrence.alpha.size())
        m = (a.occurrence.alpha - b.occurrence.alpha)
                .lpNorm<Eigen::Infinity>();
    if (a.reporting.is_stationary() != b.reporting.is_stationary())
        return std::numeric_limits<double>::quiet_NaN();
    if (a.reporting.is_stationary()) {
        const auto& pa = a.reporting.stationary().p;
        const auto& pb = b.reporting.stationary().p;
        for (std::size_t i = 0; i < std::min(pa.size(), pb.size()); ++i)
            m = std::max(m, std::abs(pa[i] - pb[i]));
        return m;
    }
    const auto& wa = a.reporting.week_intra();
    const auto& wb = b.reporting.week_intra();
    if (wa.week.theta.size() == wb.week.theta.size())
        m = std::max(m,
                     (wa.week.theta - wb.week.theta).lpNorm<Eigen::Infinity>());
    m = std::max(m, std::abs(std::log(wa.week.phi) - std::log(wb.week.phi)));
    if (const auto* ma = std::get_if<IntraWeekMatrix>(&wa.intra)) {
        if (const auto* mb = std::get_if<IntraWeekMatrix>(&wb.intra))
            m = std::max(m, (ma->P - mb->P).cwiseAbs().maxCoeff());
    } else {
        const auto& ra = std::get<ReverseTimeModel>(wa.intra);
        if (const auto* rb = std::get_if<ReverseTimeModel>(&wb.intra))
            m = std::max(m,
                         (ra.gamma - rb->gamma).lpNorm<Eigen::Infinity>());
    }
    return m;
}

}  // namespace

EmFit fit_em(const RunoffTriangle& tri, const OccurrenceSpec& occ_spec,
             const ReportingSpec& rep_spec, const EmOptions& opts) {
    long tau = tri.tau();
    ReportingSpec spec = rep_spec;
    // Materialized delays run to tau-1; the week cutoff must reach them or
    // observed cells past the cutoff would get probability zero.
    int needed = static_cast<int>((tau - 1) / 7);
    if (spec.week_cutoff < needed) spec.week_cutoff = needed;

    EmFit fit;
    CompleteCounts counts = initialize_from_chain_ladder(tri);
    fit.model = m_step(counts, occ_spec, spec, tri, opts.include_censoring);
    double ll = observed_loglik(fit.model, tri);
    fit.trace.push_back({0, ll, std::numeric_limits<double>::quiet_NaN()});

    for (int k = 1; k <= opts.max_iter; ++k) {
        counts = e_step(fit.model, tri);
        JointModel next = m_step(counts, occ_spec, spec, tri,
                                 opts.include_censoring, &fit.model);
        double ll_next = observed_loglik(next, tri);
        double change = max_param_change(next, fit.model);
        fit.model = std::move(next);
        fit.trace.push_back({k, ll_next, change});
        fit.iterations = k;
        if (em_converged(ll, ll_next, opts.rel_tol, opts.abs_tol)) {
            fit.converged = true;
            ll = ll_next;
            break;
        }
        ll = ll_next;
    }
    if (!fit.converged)
        log_warn("EM did not converge after " +
                 std::to_string(fit.iterations) + " iterations");
    return fit;
}

}  // namespace delaycast
