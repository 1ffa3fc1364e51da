#include "delaycast/reporting.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <stdexcept>
#include <unordered_map>

#include "delaycast/glm.hpp"
#include "delaycast/log.hpp"

namespace delaycast {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

// Intra-week level of offset j within a week starting on a day with the
// given day-of-week; identical for every reporting week of the occurrence.
int level_from_dow(int start_dow, int j) {
    int level = 0;
    for (int k = 0; k <= j; ++k) {
        int dow = (start_dow - 1 + k) % 7 + 1;
        if (k == j) {
            if (dow == 6) return kWdaySaturday;
            if (dow == 7) return kWdaySunday;
        }
        if (dow < 6) ++level;
    }
    return level;
}

}  // namespace

double nb_week_log_pmf(double mu, double phi, long w) {
    if (!(mu >= 0.0) || !(phi > 0.0))
        throw std::invalid_argument("nb_week_log_pmf requires mu >= 0, phi > 0");
    if (mu == 0.0) return w == 0 ? 0.0 : kNegInf;
    return std::lgamma(phi + w) - std::lgamma(w + 1.0) - std::lgamma(phi) +
           phi * std::log(phi) + w * std::log(mu) -
           (phi + w) * std::log(phi + mu);
}

namespace {

// S(w0) = sum_{w >= w0} pmf(w), summed forward. Computing it as 1 - cum
// loses the survival entirely below the cancellation error of the partial
// sum (~1e-16), while the true mass at week 104 can be far smaller. The term
// ratio pmf(w+1)/pmf(w) = (phi+w)/(w+1) * mu/(phi+mu) tends to r < 1, so the
// remainder after any term is bounded by a geometric series.
double nb_week_survival(double mu, double phi, long w0) {
    double r = mu / (phi + mu);
    double term = std::exp(nb_week_log_pmf(mu, phi, w0));
    double s = term;
    for (long w = w0; w < w0 + 1000000; ++w) {
        double ratio = (phi + static_cast<double>(w)) / (w + 1.0) * r;
        term *= ratio;
        s += term;
        if (ratio < 1.0 && term * ratio / (1.0 - ratio) < s * 1e-16 + 1e-300)
            break;
    }
    return s;
}

}  // namespace

std::vector<double> WeekDelayModel::week_probabilities(
    long t, const CalendarConfig& cal) const {
    double m = mu(t, cal);
    std::vector<double> probs(week_cutoff + 1, 0.0);
    for (int w = 0; w < week_cutoff; ++w)
        probs[w] = std::exp(nb_week_log_pmf(m, phi, w));
    probs[week_cutoff] = nb_week_survival(m, phi, week_cutoff);
    return probs;
}

double week_probability(const WeekDelayModel& model, long t, long w,
                        const CalendarConfig& cal) {
    if (w < 0) throw std::invalid_argument("week index must be >= 0");
    if (w > model.week_cutoff) return 0.0;
    if (w == model.week_cutoff)
        return nb_week_survival(model.mu(t, cal), model.phi,
                                model.week_cutoff);
    return std::exp(nb_week_log_pmf(model.mu(t, cal), model.phi, w));
}

std::vector<std::string> ReverseTimeModel::coefficient_names() {
    std::vector<std::string> n = {"intercept"};
    for (int k = 1; k <= 5; ++k) n.push_back("workdays_" + std::to_string(k));
    for (const char* d : {"tue", "wed", "thu", "fri", "sat", "sun"})
        n.push_back(std::string("rep_dow_") + d);
    n.push_back("holiday_national");
    n.push_back("holiday_unofficial");
    return n;
}

Eigen::RowVectorXd ReverseTimeModel::covariate_row(long t, long report_day,
                                                   const CalendarConfig& cal) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(kDim);
    row[0] = 1.0;
    int wd = workdays_between(t, report_day, cal);
    if (wd > 5) wd = 5;
    if (wd >= 1) row[wd] = 1.0;  // workdays_1..workdays_5 at columns 1..5
    int dow = day_of_week(report_day, cal);
    if (dow > 1) row[6 + dow - 2] = 1.0;
    HolidayClass hc = cal.holiday_class_of(report_day);
    if (hc == HolidayClass::national) row[12] = 1.0;
    if (hc == HolidayClass::unofficial) row[13] = 1.0;
    return row;
}

double ReverseTimeModel::q(long t, long d, const CalendarConfig& cal) const {
    long j = d % 7;
    if (j == 0)
        throw std::invalid_argument("reverse-time hazard undefined for j = 0");
    return sigmoid(covariate_row(t, t + d, cal).dot(gamma));
}

std::array<double, 7> weekly_from_reverse_hazards(const std::array<double, 6>& q) {
    std::array<double, 7> p{};
    // p_j = q_j * prod_{k>j}(1-q_k); p_0 = prod_{k=1..6}(1-q_k)
    double tail = 1.0;
    for (int j = 6; j >= 1; --j) {
        p[j] = q[j - 1] * tail;
        tail *= (1.0 - q[j - 1]);
    }
    p[0] = tail;
    return p;
}

std::array<double, 6> reverse_hazards_from_weekly(const std::array<double, 7>& p) {
    std::array<double, 6> q{};
    double cum = p[0];
    for (int j = 1; j <= 6; ++j) {
        cum += p[j];
        q[j - 1] = cum > 0.0 ? p[j] / cum : 0.0;
    }
    return q;
}

std::array<double, 7> intra_week_vector(const IntraWeekModel& model, long t,
                                        long w, const CalendarConfig& cal) {
    std::array<double, 7> p{};
    if (const auto* mat = std::get_if<IntraWeekMatrix>(&model)) {
        int dow = day_of_week(t, cal);
        for (int j = 0; j < 7; ++j)
            p[j] = mat->P(dow - 1, level_from_dow(dow, j) - 1);
        return p;
    }
    const auto& rev = std::get<ReverseTimeModel>(model);
    std::array<double, 6> q{};
    for (int j = 1; j <= 6; ++j) q[j - 1] = rev.q(t, 7 * w + j, cal);
    return weekly_from_reverse_hazards(q);
}

double intra_week_probability(const IntraWeekModel& model, long t, long d,
                              const CalendarConfig& cal) {
    long w = d / 7, j = d % 7;
    return intra_week_vector(model, t, w, cal)[j];
}

long ReportingModel::max_delay() const {
    if (is_stationary())
        return static_cast<long>(stationary().p.size()) - 1;
    return 7L * (week_intra().week.week_cutoff + 1) - 1;
}

std::vector<double> ReportingModel::delay_distribution(
    long t, const CalendarConfig& cal) const {
    if (is_stationary()) return stationary().p;
    const auto& wi = week_intra();
    std::vector<double> week_probs = wi.week.week_probabilities(t, cal);
    std::vector<double> dist(7 * week_probs.size());
    for (std::size_t w = 0; w < week_probs.size(); ++w) {
        std::array<double, 7> intra =
            intra_week_vector(wi.intra, t, static_cast<long>(w), cal);
        for (int j = 0; j < 7; ++j) dist[7 * w + j] = week_probs[w] * intra[j];
    }
    return dist;
}

double ReportingModel::cell_probability(long t, long d,
                                        const CalendarConfig& cal) const {
    if (d < 0) throw std::invalid_argument("delay must be >= 0");
    if (is_stationary()) {
        const auto& p = stationary().p;
        return d < static_cast<long>(p.size()) ? p[d] : 0.0;
    }
    if (d > max_delay()) return 0.0;
    const auto& wi = week_intra();
    return week_probability(wi.week, t, d / 7, cal) *
           intra_week_probability(wi.intra, t, d, cal);
}

double ReportingModel::reported_mass(long t, long tau,
                                     const CalendarConfig& cal) const {
    std::vector<double> dist = delay_distribution(t, cal);
    double mass = 0.0;
    long dmax = std::min<long>(tau - t, static_cast<long>(dist.size()) - 1);
    for (long d = 0; d <= dmax; ++d) mass += dist[d];
    return mass;
}

DelayTable::DelayTable(const ReportingModel& model, const CalendarConfig& cal,
                       long tau)
    : tau_(tau), max_delay_(model.max_delay()) {
    per_t_.resize(tau);
    reported_.resize(tau);
    tail_.resize(tau);

    // Days with identical covariate patterns share one distribution.
    bool shareable = true;
    const DayDesign* week_design = nullptr;
    if (!model.is_stationary()) {
        const auto& wi = model.week_intra();
        week_design = &wi.week.design;
        if (std::holds_alternative<ReverseTimeModel>(wi.intra) &&
            (!cal.holidays.empty() || !cal.unofficial_holidays.empty()))
            shareable = false;  // holiday dates break the weekly pattern
    }

    std::unordered_map<std::string, std::shared_ptr<const std::vector<double>>>
        cache;
    Eigen::RowVectorXd row;
    if (week_design) row.resize(week_design->dim());
    for (long t = 1; t <= tau; ++t) {
        std::shared_ptr<const std::vector<double>> dist;
        if (model.is_stationary()) {
            if (t == 1 || !per_t_[0])
                dist = std::make_shared<std::vector<double>>(
                    model.delay_distribution(t, cal));
            else
                dist = per_t_[0];
        } else if (shareable) {
            week_design->fill_row(t, cal, row);
            std::string key(reinterpret_cast<const char*>(row.data()),
                            sizeof(double) * row.size());
            key.push_back(static_cast<char>(day_of_week(t, cal)));
            auto it = cache.find(key);
            if (it == cache.end()) {
                dist = std::make_shared<std::vector<double>>(
                    model.delay_distribution(t, cal));
                cache.emplace(std::move(key), dist);
            } else {
                dist = it->second;
            }
        } else {
            dist = std::make_shared<std::vector<double>>(
                model.delay_distribution(t, cal));
        }
        per_t_[t - 1] = dist;

        const auto& v = *dist;
        double rep = 0.0, tail = 0.0;
        long dmax = static_cast<long>(v.size()) - 1;
        for (long d = 0; d <= std::min(tau - t, dmax); ++d) rep += v[d];
        // Summed directly rather than as 1 - mass below tau: the true tail
        // can be far below the cancellation error of that subtraction.
        for (long d = tau; d <= dmax; ++d) tail += v[d];
        reported_[t - 1] = rep;
        tail_[t - 1] = tail;
    }
}

namespace {

// Aggregated week-level responses for the NB regression in the M-step:
// one row per (occurrence-day covariate pattern, week) with the
// week-aggregated expected count as weight.
struct WeekRows {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;       // week index
    Eigen::VectorXd weight;  // expected count mass
};

WeekRows aggregate_week_rows(const CompleteCounts& counts,
                             const DayDesign& design,
                             const CalendarConfig& cal, long tau) {
    struct Acc {
        Eigen::RowVectorXd row;
        std::unordered_map<long, double> by_week;
    };
    std::unordered_map<std::string, Acc> groups;
    Eigen::RowVectorXd row(design.dim());
    for (long t = 1; t <= tau; ++t) {
        design.fill_row(t, cal, row);
        std::string key(reinterpret_cast<const char*>(row.data()),
                        sizeof(double) * row.size());
        auto& acc = groups[key];
        if (acc.row.size() == 0) acc.row = row;
        for (long d = 0; d <= tau - 1; ++d) {
            double m = counts.expected(t - 1, d);
            if (m > 0.0) acc.by_week[d / 7] += m;
        }
    }
    std::size_t n = 0;
    for (const auto& [k, acc] : groups) n += acc.by_week.size();
    WeekRows out;
    out.X.resize(n, design.dim());
    out.y.resize(n);
    out.weight.resize(n);
    Eigen::Index i = 0;
    for (const auto& [k, acc] : groups) {
        for (const auto& [w, mass] : acc.by_week) {
            out.X.row(i) = acc.row;
            out.y[i] = static_cast<double>(w);
            out.weight[i] = mass;
            ++i;
        }
    }
    return out;
}

// Week-model part of the censored M-step objective:
// sum over week rows of weight * log p^W(w) + sum_t remainder_t * log tail_t.
double censored_week_objective(const WeekDelayModel& week,
                               const IntraWeekModel& intra,
                               const WeekRows& rows,
                               const CompleteCounts& counts,
                               const CalendarConfig& cal, long tau) {
    double obj = 0.0;
    for (Eigen::Index i = 0; i < rows.y.size(); ++i) {
        if (rows.weight[i] == 0.0) continue;
        double mu = std::exp(rows.X.row(i).dot(week.theta));
        long w = static_cast<long>(rows.y[i]);
        double pw;
        if (w >= week.week_cutoff) {
            double cum = 0.0;
            for (int v = 0; v < week.week_cutoff; ++v)
                cum += std::exp(nb_week_log_pmf(mu, week.phi, v));
            pw = std::max(1.0 - cum, 0.0);
        } else {
            pw = std::exp(nb_week_log_pmf(mu, week.phi, w));
        }
        if (pw <= 0.0) return kNegInf;
        obj += rows.weight[i] * std::log(pw);
    }
    ReportingModel model(ReportingModel::WeekIntra{week, intra});
    DelayTable table(model, cal, tau);
    for (long t = 1; t <= tau; ++t) {
        double rem = counts.remainder[t - 1];
        if (rem <= 0.0) continue;
        double tail = table.tail_mass(t);
        if (tail <= 0.0) return kNegInf;
        obj += rem * std::log(tail);
    }
    return obj;
}

// Damped Newton with finite-difference derivatives for the censored week
// objective over (theta, log phi). Dimension is small in practice.
void refine_week_censored(WeekDelayModel& week, const IntraWeekModel& intra,
                          const WeekRows& rows, const CompleteCounts& counts,
                          const CalendarConfig& cal, long tau, bool fix_phi,
                          const std::vector<int>& active) {
    int p = static_cast<int>(active.size());
    int dim = p + (fix_phi ? 0 : 1);
    auto get = [&]() {
        Eigen::VectorXd x(dim);
        for (int j = 0; j < p; ++j) x[j] = week.theta[active[j]];
        if (!fix_phi) x[p] = std::log(week.phi);
        return x;
    };
    auto eval = [&](const Eigen::VectorXd& x) {
        WeekDelayModel cand = week;
        for (int j = 0; j < p; ++j) cand.theta[active[j]] = x[j];
        if (!fix_phi) cand.phi = std::exp(x[p]);
        return censored_week_objective(cand, intra, rows, counts, cal, tau);
    };
    Eigen::VectorXd x = get();
    double f = eval(x);
    for (int iter = 0; iter < 30; ++iter) {
        Eigen::VectorXd g(dim);
        Eigen::MatrixXd H(dim, dim);
        std::vector<double> h(dim);
        for (int j = 0; j < dim; ++j)
            h[j] = 1e-5 * std::max(1.0, std::abs(x[j]));
        std::vector<double> fp(dim), fm(dim);
        for (int j = 0; j < dim; ++j) {
            Eigen::VectorXd xp = x, xm = x;
            xp[j] += h[j];
            xm[j] -= h[j];
            fp[j] = eval(xp);
            fm[j] = eval(xm);
            g[j] = (fp[j] - fm[j]) / (2 * h[j]);
            H(j, j) = (fp[j] - 2 * f + fm[j]) / (h[j] * h[j]);
        }
        for (int j = 0; j < dim; ++j) {
            for (int k = j + 1; k < dim; ++k) {
                Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
                xpp[j] += h[j]; xpp[k] += h[k];
                xpm[j] += h[j]; xpm[k] -= h[k];
                xmp[j] -= h[j]; xmp[k] += h[k];
                xmm[j] -= h[j]; xmm[k] -= h[k];
                H(j, k) = H(k, j) = (eval(xpp) - eval(xpm) - eval(xmp) +
                                     eval(xmm)) /
                                    (4 * h[j] * h[k]);
            }
        }
        if (g.lpNorm<Eigen::Infinity>() < 1e-8) break;
        Eigen::VectorXd step = (-H).ldlt().solve(g);
        if (!step.allFinite()) step = g;  // fall back to gradient ascent
        double scale = 1.0;
        bool improved = false;
        for (int hh = 0; hh < 25; ++hh) {
            Eigen::VectorXd cand = x + scale * step;
            double fc = eval(cand);
            if (std::isfinite(fc) && fc > f) {
                x = cand;
                f = fc;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if (!improved) break;
    }
    for (int j = 0; j < p; ++j) week.theta[active[j]] = x[j];
    if (!fix_phi) week.phi = std::exp(x[p]);
}

IntraWeekMatrix fit_intra_matrix(const CompleteCounts& counts,
                                 const CalendarConfig& cal, long tau,
                                 double prob_floor,
                                 const IntraWeekMatrix* previous) {
    Eigen::Matrix<double, 7, 7> mass = Eigen::Matrix<double, 7, 7>::Zero();
    for (long t = 1; t <= tau; ++t) {
        int dow = day_of_week(t, cal);
        for (long d = 0; d <= tau - 1; ++d) {
            double m = counts.expected(t - 1, d);
            if (m <= 0.0) continue;
            mass(dow - 1, level_from_dow(dow, static_cast<int>(d % 7)) - 1) += m;
        }
    }
    IntraWeekMatrix out;
    for (int r = 0; r < 7; ++r) {
        double total = mass.row(r).sum();
        if (total <= 0.0) {
            log_warn("intra-week row " + std::to_string(r + 1) +
                     " has zero weight; keeping previous value");
            if (previous)
                out.P.row(r) = previous->P.row(r);
            else
                out.P.row(r).setConstant(1.0 / 7.0);
            continue;
        }
        out.P.row(r) = mass.row(r) / total;
        if (prob_floor > 0.0) {
            for (int c = 0; c < 7; ++c)
                out.P(r, c) = std::max(out.P(r, c), prob_floor);
        } else {
            // Snap negligible estimates to exact zero so downstream code
            // can treat them as structural zeros of the weekday pattern.
            for (int c = 0; c < 7; ++c)
                if (out.P(r, c) < 1e-12) out.P(r, c) = 0.0;
        }
        out.P.row(r) /= out.P.row(r).sum();
    }
    return out;
}

ReverseTimeModel fit_reverse_time(const CompleteCounts& counts,
                                  const CalendarConfig& cal, long tau,
                                  const ReverseTimeModel* previous) {
    // Exact expansion of the intra-week multinomial likelihood into
    // binomial terms for the reverse-time hazards; rows aggregated by
    // covariate pattern.
    struct Agg {
        Eigen::RowVectorXd row;
        double s = 0.0, n = 0.0;
    };
    std::unordered_map<std::string, Agg> groups;
    for (long t = 1; t <= tau; ++t) {
        for (long w = 0; 7 * w <= tau - 1; ++w) {
            double prefix = counts.expected(t - 1, 7 * w);
            for (int j = 1; j <= 6; ++j) {
                long d = 7 * w + j;
                double s = d <= tau - 1 ? counts.expected(t - 1, d) : 0.0;
                double n = prefix + s;
                prefix = n;
                if (n <= 0.0) continue;
                Eigen::RowVectorXd row =
                    ReverseTimeModel::covariate_row(t, t + d, cal);
                std::string key(reinterpret_cast<const char*>(row.data()),
                                sizeof(double) * row.size());
                auto& a = groups[key];
                if (a.row.size() == 0) a.row = row;
                a.s += s;
                a.n += n;
            }
        }
    }
    if (groups.empty())
        throw std::runtime_error("no intra-week mass to fit reverse-time model");

    Eigen::Index n_rows = static_cast<Eigen::Index>(groups.size());
    Eigen::MatrixXd X(n_rows, ReverseTimeModel::kDim);
    Eigen::VectorXd s(n_rows), n(n_rows);
    Eigen::Index i = 0;
    for (const auto& [k, a] : groups) {
        X.row(i) = a.row;
        s[i] = a.s;
        n[i] = a.n;
        ++i;
    }
    // Drop covariate columns without variation (e.g. holiday dummies in a
    // holiday-free calendar); their coefficients stay at the previous value.
    std::vector<int> kept;
    for (int c = 0; c < ReverseTimeModel::kDim; ++c) {
        if (c == 0 || X.col(c).cwiseAbs().maxCoeff() > 0.0) kept.push_back(c);
    }
    DesignMatrix design;
    design.X.resize(n_rows, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c)
        design.X.col(c) = X.col(kept[c]);

    GlmOptions opts;
    if (previous) {
        Eigen::VectorXd init(kept.size());
        for (std::size_t c = 0; c < kept.size(); ++c)
            init[c] = previous->gamma[kept[c]];
        opts.beta_init = init;
    }
    FitResult fit = fit_weighted_logistic(design, s, n, opts);

    ReverseTimeModel out;
    if (previous) out.gamma = previous->gamma;
    for (std::size_t c = 0; c < kept.size(); ++c)
        out.gamma[kept[c]] = fit.coefficients[c];
    return out;
}

}  // namespace

ReportingModel reporting_m_step(const CompleteCounts& counts,
                                const ReportingSpec& spec,
                                const CalendarConfig& cal, long tau,
                                bool include_censoring,
                                const ReportingModel* previous) {
    if (spec.kind == ReportingSpec::Kind::stationary) {
        std::vector<double> p(tau, 0.0);
        double grand = 0.0;
        for (long d = 0; d <= tau - 1; ++d) {
            double col = counts.expected.col(d).sum();
            p[d] = col;
            grand += col;
        }
        if (grand <= 0.0) {
            log_warn("stationary M-step on all-zero counts; delay mass set to d=0");
            p.assign(tau, 0.0);
            p[0] = 1.0;
        } else {
            for (auto& v : p) v /= grand;
        }
        return ReportingModel(StationaryDelayModel{std::move(p)});
    }

    // Week model: weighted NB regression of the week index, restricted to
    // the identifiable columns (calendar levels absent from the window
    // leave empty dummies whose coefficients stay at zero).
    DayDesign week_design(spec.week_toggles);
    WeekRows rows = aggregate_week_rows(counts, week_design, cal, tau);
    std::vector<int> active = identifiable_columns(rows.X);
    DesignMatrix design;
    design.X.resize(rows.X.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j)
        design.X.col(j) = rows.X.col(active[j]);
    design.weight = rows.weight;
    GlmOptions opts;
    opts.fixed_phi = spec.fixed_phi;
    const ReportingModel::WeekIntra* prev_wi =
        previous && !previous->is_stationary() ? &previous->week_intra()
                                               : nullptr;
    if (prev_wi && prev_wi->week.theta.size() == week_design.dim()) {
        Eigen::VectorXd init(active.size());
        for (std::size_t j = 0; j < active.size(); ++j)
            init[j] = prev_wi->week.theta[active[j]];
        opts.beta_init = init;
        opts.phi_init = prev_wi->week.phi;
    }
    FitResult week_fit = fit_weighted_negbin(design, rows.y, opts);
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(week_design.dim());
    for (std::size_t j = 0; j < active.size(); ++j)
        theta[active[j]] = week_fit.coefficients[j];

    WeekDelayModel week{week_design, std::move(theta), week_fit.dispersion,
                        spec.week_cutoff};

    IntraWeekModel intra;
    if (spec.kind == ReportingSpec::Kind::week_matrix) {
        const IntraWeekMatrix* prev_mat =
            prev_wi ? std::get_if<IntraWeekMatrix>(&prev_wi->intra) : nullptr;
        intra = fit_intra_matrix(counts, cal, tau, spec.prob_floor, prev_mat);
    } else {
        const ReverseTimeModel* prev_rev =
            prev_wi ? std::get_if<ReverseTimeModel>(&prev_wi->intra) : nullptr;
        intra = fit_reverse_time(counts, cal, tau, prev_rev);
    }

    if (include_censoring && counts.remainder.sum() > 0.0)
        refine_week_censored(week, intra, rows, counts, cal, tau,
                             spec.fixed_phi > 0.0, active);

    return ReportingModel(ReportingModel::WeekIntra{std::move(week),
                                                    std::move(intra)});
}

double reporting_objective(const ReportingModel& model,
                           const CompleteCounts& counts,
                           const CalendarConfig& cal, long tau,
                           bool include_censoring) {
    DelayTable table(model, cal, tau);
    double obj = 0.0;
    for (long t = 1; t <= tau; ++t) {
        const auto& dist = table.dist(t);
        long dmax = std::min<long>(tau - 1, static_cast<long>(dist.size()) - 1);
        for (long d = 0; d <= tau - 1; ++d) {
            double m = counts.expected(t - 1, d);
            if (m <= 0.0) continue;
            double p = d <= dmax ? dist[d] : 0.0;
            if (p <= 0.0) return kNegInf;
            obj += m * std::log(p);
        }
        if (include_censoring && counts.remainder[t - 1] > 0.0) {
            double tail = table.tail_mass(t);
            if (tail <= 0.0) return kNegInf;
            obj += counts.remainder[t - 1] * std::log(tail);
        }
    }
    return obj;
}

}  // namespace delaycast
