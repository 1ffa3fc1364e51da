#include "delaycast/inference.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "delaycast/glm.hpp"

namespace delaycast {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kStructuralZero = 1e-12;
}  // namespace

ParameterPacker::ParameterPacker(const JointModel& model,
                                 const RunoffTriangle& tri, bool include_phi)
    : template_(model), include_phi_(include_phi) {
    if (model.reporting.is_stationary())
        throw std::invalid_argument(
            "stationary reporting model has no packable regression structure");
    // Coefficients of empty dummy columns are not identified; pack only the
    // columns with variation over the triangle's days.
    auto active_of = [&](const DayDesign& design) {
        Eigen::MatrixXd X(tri.tau(), design.dim());
        Eigen::RowVectorXd row(design.dim());
        for (long t = 1; t <= tri.tau(); ++t) {
            design.fill_row(t, tri.calendar(), row);
            X.row(t - 1) = row;
        }
        return identifiable_columns(X);
    };
    occ_active_ = active_of(model.occurrence.design);
    const auto& occ_names = model.occurrence.design.names();
    for (int j : occ_active_) names_.push_back("occ_" + occ_names[j]);

    const auto& wi = model.reporting.week_intra();
    week_active_ = active_of(wi.week.design);
    const auto& week_names = wi.week.design.names();
    for (int j : week_active_) names_.push_back("week_" + week_names[j]);
    if (include_phi_) names_.push_back("week_log_phi");

    if (const auto* mat = std::get_if<IntraWeekMatrix>(&wi.intra)) {
        for (int r = 0; r < 7; ++r) {
            int ref = -1;
            for (int c = 0; c < 7; ++c) {
                if (mat->P(r, c) > kStructuralZero) {
                    ref = c;
                    break;
                }
            }
            if (ref < 0)
                throw std::invalid_argument("intra-week matrix row " +
                                            std::to_string(r + 1) +
                                            " is entirely zero");
            ref_col_[r] = ref;
            for (int c = 0; c < 7; ++c) {
                if (c == ref || mat->P(r, c) <= kStructuralZero) continue;
                matrix_entries_.push_back({r, c});
                names_.push_back("intra_logratio_r" + std::to_string(r + 1) +
                                 "_c" + std::to_string(c + 1));
            }
        }
    } else {
        // A gamma coordinate is identified only when its covariate varies
        // over the cells the likelihood touches.
        const CalendarConfig& cal = tri.calendar();
        long tau = tri.tau();
        Eigen::RowVectorXd lo = Eigen::RowVectorXd::Constant(
            ReverseTimeModel::kDim, std::numeric_limits<double>::infinity());
        Eigen::RowVectorXd hi = -lo;
        for (long t = 1; t <= tau; ++t) {
            for (long d = 1; d <= tau - 1; ++d) {
                if (d % 7 == 0) continue;
                Eigen::RowVectorXd row =
                    ReverseTimeModel::covariate_row(t, t + d, cal);
                lo = lo.cwiseMin(row);
                hi = hi.cwiseMax(row);
            }
        }
        auto coef_names = ReverseTimeModel::coefficient_names();
        for (int c = 0; c < ReverseTimeModel::kDim; ++c) {
            if (c == 0 || hi[c] - lo[c] > 0.0) {
                gamma_active_.push_back(c);
                names_.push_back("rev_" + coef_names[c]);
            }
        }
    }
}

Eigen::VectorXd ParameterPacker::pack(const JointModel& model) const {
    Eigen::VectorXd out(dim());
    Eigen::Index i = 0;
    for (int j : occ_active_) out[i++] = model.occurrence.alpha[j];
    const auto& wi = model.reporting.week_intra();
    for (int j : week_active_) out[i++] = wi.week.theta[j];
    if (include_phi_) out[i++] = std::log(wi.week.phi);
    if (const auto* mat = std::get_if<IntraWeekMatrix>(&wi.intra)) {
        for (const auto& [r, c] : matrix_entries_)
            out[i++] = std::log(mat->P(r, c) / mat->P(r, ref_col_[r]));
    } else {
        const auto& rev = std::get<ReverseTimeModel>(wi.intra);
        for (int c : gamma_active_) out[i++] = rev.gamma[c];
    }
    return out;
}

JointModel ParameterPacker::unpack(const Eigen::VectorXd& params) const {
    if (params.size() != dim())
        throw std::invalid_argument("parameter vector has the wrong length");
    JointModel model = template_;
    Eigen::Index i = 0;
    for (int j : occ_active_) model.occurrence.alpha[j] = params[i++];
    auto& wi = model.reporting.week_intra();
    for (int j : week_active_) wi.week.theta[j] = params[i++];
    if (include_phi_) wi.week.phi = std::exp(params[i++]);
    if (auto* mat = std::get_if<IntraWeekMatrix>(&wi.intra)) {
        // Rebuild each row from the softmax of its packed log-ratios;
        // structural zeros stay at zero.
        Eigen::Matrix<double, 7, 7> logit =
            Eigen::Matrix<double, 7, 7>::Zero();
        std::size_t k = 0;
        for (const auto& [r, c] : matrix_entries_) logit(r, c) = params[i + k],
                                                   ++k;
        i += static_cast<Eigen::Index>(matrix_entries_.size());
        const auto& tpl =
            std::get<IntraWeekMatrix>(template_.reporting.week_intra().intra);
        for (int r = 0; r < 7; ++r) {
            double denom = 0.0;
            for (int c = 0; c < 7; ++c) {
                if (tpl.P(r, c) <= kStructuralZero) continue;
                denom += std::exp(logit(r, c));
            }
            for (int c = 0; c < 7; ++c) {
                mat->P(r, c) = tpl.P(r, c) <= kStructuralZero
                                   ? 0.0
                                   : std::exp(logit(r, c)) / denom;
            }
        }
    } else {
        auto& rev = std::get<ReverseTimeModel>(wi.intra);
        for (int c : gamma_active_) rev.gamma[c] = params[i++];
    }
    return model;
}

double q_objective(const JointModel& model, const CompleteCounts& counts,
                   const RunoffTriangle& tri) {
    long tau = tri.tau();
    DelayTable table(model.reporting, tri.calendar(), tau);
    double q = 0.0;
    for (long t = 1; t <= tau; ++t) {
        double lambda = model.lambda(t, tri);
        q -= lambda;
        double nt = counts.row_totals[t - 1];
        if (nt > 0.0) {
            if (lambda <= 0.0) return kNegInf;
            q += nt * std::log(lambda);
        }
        for (long d = 0; d <= tau - 1; ++d) {
            double m = counts.expected(t - 1, d);
            if (m <= 0.0) continue;
            double p = table.cell(t, d);
            if (p <= 0.0) return kNegInf;
            q += m * std::log(p);
        }
        double rem = counts.remainder[t - 1];
        if (rem > 0.0) {
            double tail = table.tail_mass(t);
            if (tail <= 0.0) return kNegInf;
            q += rem * std::log(tail);
        }
    }
    return q;
}

namespace {

// Central-difference Hessian of f at x with per-coordinate steps
// max(1e-5, 1e-5|x_i|).
template <typename F>
Eigen::MatrixXd numerical_hessian(F f, const Eigen::VectorXd& x,
                                  const std::vector<std::string>& names) {
    int n = static_cast<int>(x.size());
    Eigen::VectorXd h(n);
    for (int i = 0; i < n; ++i) h[i] = std::max(1e-5, 1e-5 * std::abs(x[i]));
    double f0 = f(x);
    Eigen::MatrixXd H(n, n);
    std::vector<double> fp(n), fm(n);
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h[i];
        xm[i] -= h[i];
        fp[i] = f(xp);
        fm[i] = f(xm);
        H(i, i) = (fp[i] - 2.0 * f0 + fm[i]) / (h[i] * h[i]);
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            Eigen::VectorXd xpp = x, xpm = x, xmp = x, xmm = x;
            xpp[i] += h[i]; xpp[j] += h[j];
            xpm[i] += h[i]; xpm[j] -= h[j];
            xmp[i] -= h[i]; xmp[j] += h[j];
            xmm[i] -= h[i]; xmm[j] -= h[j];
            H(i, j) = H(j, i) =
                (f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h[i] * h[j]);
        }
    }
    H = ((H + H.transpose()) / 2.0).eval();
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (!std::isfinite(H(i, j)))
                throw std::runtime_error(
                    "non-finite Hessian entry at coordinates (" + names[i] +
                    ", " + names[j] + ")");
        }
    }
    return H;
}

}  // namespace

InformationPair observed_information(const JointModel& model,
                                     const RunoffTriangle& tri,
                                     const ParameterPacker& packer) {
    Eigen::VectorXd x = packer.pack(model);
    CompleteCounts counts = e_step(model, tri);
    auto neg_q = [&](const Eigen::VectorXd& p) {
        return -q_objective(packer.unpack(p), counts, tri);
    };
    auto neg_ll = [&](const Eigen::VectorXd& p) {
        return -observed_loglik(packer.unpack(p), tri);
    };
    InformationPair out;
    out.I_c = numerical_hessian(neg_q, x, packer.names());
    out.I_o = numerical_hessian(neg_ll, x, packer.names());
    return out;
}

double aiccd(const JointModel& model, const RunoffTriangle& tri,
             bool include_phi) {
    ParameterPacker packer(model, tri, include_phi);
    InformationPair info = observed_information(model, tri, packer);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(info.I_o);
    if (!lu.isInvertible())
        throw std::runtime_error(
            "observed information is singular; simplify the model before "
            "comparing AICcd values");
    CompleteCounts counts = e_step(model, tri);
    double q = q_objective(model, counts, tri);
    double penalty = (info.I_c * lu.inverse()).trace();
    return -2.0 * q + 2.0 * penalty;
}

namespace {

// One observed cell's contribution to Q: -lambda_t p_td + N_td log(lambda_t p_td).
double cell_q(const JointModel& model, const RunoffTriangle& tri,
              const DelayTable& table, long t, long d, double n) {
    double mean = model.lambda(t, tri) * table.cell(t, d);
    if (mean <= 0.0) return n > 0.0 ? kNegInf : 0.0;
    return -mean + n * std::log(mean);
}

}  // namespace

std::map<Cell, double> cooks_distances(const JointModel& model,
                                       const RunoffTriangle& tri,
                                       const ParameterPacker& packer,
                                       const Eigen::MatrixXd& I_c) {
    Eigen::VectorXd x = packer.pack(model);
    int n = packer.dim();
    Eigen::LDLT<Eigen::MatrixXd> solver(I_c);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("complete information is not factorizable");

    // Perturbed models and delay tables, shared across all cells.
    std::vector<JointModel> models_p, models_m;
    std::vector<DelayTable> tables_p, tables_m;
    Eigen::VectorXd h(n);
    for (int i = 0; i < n; ++i) {
        h[i] = std::max(1e-5, 1e-5 * std::abs(x[i]));
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h[i];
        xm[i] -= h[i];
        models_p.push_back(packer.unpack(xp));
        models_m.push_back(packer.unpack(xm));
        tables_p.emplace_back(models_p.back().reporting, tri.calendar(),
                              tri.tau());
        tables_m.emplace_back(models_m.back().reporting, tri.calendar(),
                              tri.tau());
    }

    std::map<Cell, double> out;
    Eigen::VectorXd g(n);
    for (const auto& [cell, count] : tri.counts()) {
        double nv = static_cast<double>(count);
        for (int i = 0; i < n; ++i) {
            double qp = cell_q(models_p[i], tri, tables_p[i], cell.first,
                               cell.second, nv);
            double qm = cell_q(models_m[i], tri, tables_m[i], cell.first,
                               cell.second, nv);
            g[i] = (qp - qm) / (2.0 * h[i]);
        }
        out[cell] = g.dot(solver.solve(g));
    }
    return out;
}

double cooks_distance(const JointModel& model, const RunoffTriangle& tri,
                      const ParameterPacker& packer, const Eigen::MatrixXd& I_c,
                      long t, long d) {
    if (t + d > tri.tau())
        throw std::invalid_argument("cooks_distance requires an observed cell");
    Eigen::VectorXd x = packer.pack(model);
    int n = packer.dim();
    double nv = static_cast<double>(tri.count(t, d));
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) {
        double h = std::max(1e-5, 1e-5 * std::abs(x[i]));
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        JointModel mp = packer.unpack(xp), mm = packer.unpack(xm);
        DelayTable tp(mp.reporting, tri.calendar(), tri.tau());
        DelayTable tm(mm.reporting, tri.calendar(), tri.tau());
        g[i] = (cell_q(mp, tri, tp, t, d, nv) - cell_q(mm, tri, tm, t, d, nv)) /
               (2.0 * h);
    }
    Eigen::LDLT<Eigen::MatrixXd> solver(I_c);
    return g.dot(solver.solve(g));
}

NowcastResult nowcast(const JointModel& model, const RunoffTriangle& tri) {
    long tau = tri.tau();
    DelayTable table(model.reporting, tri.calendar(), tau);
    NowcastResult out;
    for (long t = 1; t <= tau; ++t) {
        double lambda = model.lambda(t, tri);
        double ibnr = lambda * table.ibnr_mass(t);
        out.by_occurrence[t] = ibnr;
        out.total += ibnr;
        out.remainder += lambda * table.tail_mass(t);
        for (long d = tau - t + 1; d <= tau - 1; ++d) {
            double mean = lambda * table.cell(t, d);
            out.cell_means[{t, d}] = mean;
            out.by_reporting[t + d] += mean;
        }
    }
    return out;
}

std::map<long, double> nowcast_groups(const NowcastResult& result,
                                      NowcastGrouping grouping,
                                      const CalendarConfig& cal) {
    std::map<long, double> out;
    switch (grouping) {
        case NowcastGrouping::cell:
            throw std::invalid_argument(
                "cell grouping is exposed via cell_means");
        case NowcastGrouping::occurrence:
            return result.by_occurrence;
        case NowcastGrouping::reporting_date:
            return result.by_reporting;
        case NowcastGrouping::week:
            for (const auto& [rho, mean] : result.by_reporting)
                out[(rho - 1) / 7 + 1] += mean;
            return out;
        case NowcastGrouping::month:
            for (const auto& [rho, mean] : result.by_reporting) {
                std::chrono::year_month_day ymd(cal.date(rho));
                out[static_cast<long>(int(ymd.year())) * 12 +
                    static_cast<long>(unsigned(ymd.month())) - 1] += mean;
            }
            return out;
    }
    return out;
}

NowcastInterval poisson_interval(double mean, double level) {
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("level must be in (0, 1)");
    if (!(mean >= 0.0) || !std::isfinite(mean))
        throw std::invalid_argument("mean must be finite and nonnegative");
    NowcastInterval out;
    out.mean = mean;
    if (mean == 0.0) return out;  // degenerate [0, 0]

    double alpha = 1.0 - level;
    if (mean >= 1e6) {  // normal regime; pmf summation would be wasteful
        double z = 0.0, lo = -40.0, hi = 0.0;
        // Invert Phi(z) = alpha/2 by bisection.
        auto cdf = [](double v) { return 0.5 * std::erfc(-v / std::sqrt(2.0)); };
        for (int i = 0; i < 200; ++i) {
            z = (lo + hi) / 2.0;
            (cdf(z) < alpha / 2.0 ? lo : hi) = z;
        }
        double s = std::sqrt(mean);
        out.lower = std::max<long>(0, static_cast<long>(std::ceil(mean + z * s)));
        out.upper = static_cast<long>(std::floor(mean - z * s));
        return out;
    }

    // Equal-tail quantiles: q_p = min{k : F(k) >= p}, pmf summed in log space.
    double log_pmf = -mean;  // k = 0
    double cdf = std::exp(log_pmf);
    long k = 0;
    bool have_lower = false;
    double log_mean = std::log(mean);
    while (true) {
        if (!have_lower && cdf >= alpha / 2.0) {
            out.lower = k;
            have_lower = true;
        }
        if (cdf >= 1.0 - alpha / 2.0) {
            out.upper = k;
            break;
        }
        ++k;
        log_pmf += log_mean - std::log(static_cast<double>(k));
        cdf += std::exp(log_pmf);
        if (k > mean + 20.0 * std::sqrt(mean) + 200.0) {  // numeric guard
            out.upper = k;
            break;
        }
    }
    return out;
}

std::map<long, NowcastInterval> prediction_intervals(
    const std::map<long, double>& groups, double level, bool simultaneous) {
    double eff = level;
    if (simultaneous && !groups.empty())
        eff = 1.0 - (1.0 - level) / static_cast<double>(groups.size());
    std::map<long, NowcastInterval> out;
    for (const auto& [key, mean] : groups)
        out[key] = poisson_interval(mean, eff);
    return out;
}

}  // namespace delaycast
