#include "delaycast/direct.hpp"

#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include "delaycast/log.hpp"

namespace delaycast {

long direct_delay_level(long d, long pool_threshold) {
    if (d <= pool_threshold) return d;
    return pool_threshold + 1 + (d - pool_threshold - 1) / 7;
}

namespace {

DirectLayout make_layout(const RunoffTriangle& tri, const DirectSpec& spec,
                         const std::set<long>& excluded_days) {
    DirectLayout layout;
    int col = 0;
    if (spec.variant == DirectSpec::Variant::structured) {
        layout.occ = DayDesign(spec.occurrence_toggles);
        col = layout.occ.dim();
    } else {
        for (long t = 1; t <= tri.tau(); ++t)
            if (!excluded_days.count(t)) layout.day_col[t] = col++;
    }
    std::set<long> levels;
    for (long d = 1; d <= tri.tau() - 1; ++d)
        levels.insert(direct_delay_level(d, spec.pool_threshold));
    for (long lvl : levels) layout.level_col[lvl] = col++;
    if (spec.rep_dow) {
        layout.rep_dow_col = col;
        col += 6;
    }
    if (spec.rep_holiday) {
        layout.rep_hol_col = col;
        col += 2;
    }
    if (spec.rep_next_holiday) {
        layout.rep_next_hol_col = col;
        col += 2;
    }
    layout.dim = col;
    return layout;
}

void fill_direct_row(const DirectSpec& spec, const DirectLayout& layout,
                     long t, long d, const CalendarConfig& cal,
                     Eigen::RowVectorXd& row) {
    row.setZero();
    if (spec.variant == DirectSpec::Variant::structured) {
        layout.occ.fill_row(t, cal, row.head(layout.occ.dim()));
    } else {
        row[layout.day_col.at(t)] = 1.0;
    }
    if (d > 0) {
        long lvl = direct_delay_level(d, spec.pool_threshold);
        row[layout.level_col.at(lvl)] = 1.0;
    }
    long r = t + d;
    if (layout.rep_dow_col >= 0) {
        int dow = day_of_week(r, cal);
        if (dow > 1) row[layout.rep_dow_col + dow - 2] = 1.0;
    }
    if (layout.rep_hol_col >= 0) {
        HolidayClass hc = cal.holiday_class_of(r);
        if (hc == HolidayClass::national) row[layout.rep_hol_col] = 1.0;
        if (hc == HolidayClass::unofficial) row[layout.rep_hol_col + 1] = 1.0;
    }
    if (layout.rep_next_hol_col >= 0) {
        HolidayClass hc = cal.holiday_class_of(r + 1);
        if (hc == HolidayClass::national) row[layout.rep_next_hol_col] = 1.0;
        if (hc == HolidayClass::unofficial)
            row[layout.rep_next_hol_col + 1] = 1.0;
    }
}

DirectDesign build_design(const RunoffTriangle& tri, const DirectSpec& spec,
                          const std::set<long>& excluded_days) {
    long tau = tri.tau();
    DirectDesign out;
    out.layout = make_layout(tri, spec, excluded_days);

    Eigen::Index n_rows = 0;
    for (long t = 1; t <= tau; ++t)
        if (!excluded_days.count(t)) n_rows += tau - t + 1;
    out.design.X.resize(n_rows, out.layout.dim);
    out.design.offset.resize(n_rows);
    Eigen::RowVectorXd row(out.layout.dim);
    Eigen::Index i = 0;
    for (long t = 1; t <= tau; ++t) {
        if (excluded_days.count(t)) continue;
        double log_e = std::log(tri.exposure_at(t));
        for (long d = 0; d <= tau - t; ++d) {
            fill_direct_row(spec, out.layout, t, d, tri.calendar(), row);
            out.design.X.row(i) = row;
            out.design.offset[i] = log_e;
            out.cells.push_back({t, d});
            ++i;
        }
    }
    return out;
}

}  // namespace

DirectDesign build_direct_design(const RunoffTriangle& tri,
                                 const DirectSpec& spec) {
    return build_design(tri, spec, {});
}

DirectFit fit_direct(const RunoffTriangle& tri, const DirectSpec& spec) {
    DirectFit out;
    out.spec = spec;

    std::set<long> excluded;
    if (spec.variant == DirectSpec::Variant::per_day_alpha) {
        for (long t = 1; t <= tri.tau(); ++t) {
            if (tri.reported_total(t) == 0) {
                excluded.insert(t);
                out.flagged_days.push_back(t);
            }
        }
        if (!excluded.empty())
            log_warn(std::to_string(excluded.size()) +
                     " occurrence day(s) with no reports excluded from the "
                     "per-day direct fit");
        // Days whose reported total rests on a single positive cell yield
        // fragile alpha_t estimates; flagged but kept.
        for (long t = 1; t <= tri.tau(); ++t) {
            if (excluded.count(t)) continue;
            int positive = 0;
            for (long d = 0; d <= tri.tau() - t; ++d)
                if (tri.count(t, d) > 0) ++positive;
            if (positive == 1) out.flagged_days.push_back(t);
        }
    }

    out.design = build_design(tri, spec, excluded);
    Eigen::VectorXd y(out.design.cells.size());
    for (std::size_t i = 0; i < out.design.cells.size(); ++i)
        y[i] = static_cast<double>(
            tri.count(out.design.cells[i].first, out.design.cells[i].second));
    // Calendar levels never hit inside the window leave empty dummy columns;
    // fit the identifiable ones, keep the rest at zero.
    std::vector<int> active = identifiable_columns(out.design.design.X);
    DesignMatrix reduced;
    reduced.X.resize(out.design.design.X.rows(),
                     static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j)
        reduced.X.col(j) = out.design.design.X.col(active[j]);
    reduced.offset = out.design.design.offset;
    out.fit = fit_weighted_poisson(reduced, y);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(out.design.layout.dim);
    for (std::size_t j = 0; j < active.size(); ++j)
        beta[active[j]] = out.fit.coefficients[j];
    out.fit.coefficients = std::move(beta);
    return out;
}

DirectNowcast nowcast_direct(const DirectFit& fit, const RunoffTriangle& tri) {
    long tau = tri.tau();
    DirectNowcast out;
    Eigen::RowVectorXd row(fit.design.layout.dim);
    for (long t = 1; t <= tau; ++t) {
        bool excluded = fit.spec.variant == DirectSpec::Variant::per_day_alpha &&
                        !fit.design.layout.day_col.count(t);
        for (long d = tau - t + 1; d <= tau - 1; ++d) {
            long lvl = direct_delay_level(d, fit.spec.pool_threshold);
            if (excluded || (d > 0 && !fit.design.layout.level_col.count(lvl))) {
                out.skipped.push_back({t, d});
                continue;
            }
            fill_direct_row(fit.spec, fit.design.layout, t, d, tri.calendar(),
                            row);
            double mean = tri.exposure_at(t) *
                          std::exp(row.dot(fit.fit.coefficients));
            out.cell_means[{t, d}] = mean;
            out.total += mean;
        }
    }
    if (!out.skipped.empty())
        log_warn(std::to_string(out.skipped.size()) +
                 " nowcast cell(s) skipped: delay level or occurrence day "
                 "not in the fitted design");
    return out;
}

}  // namespace delaycast
