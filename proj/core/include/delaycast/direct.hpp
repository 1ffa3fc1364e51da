#pragma once

#include <map>
#include <vector>

#include "delaycast/glm.hpp"
#include "delaycast/triangle.hpp"

namespace delaycast {

// Direct Poisson regression of cell counts N_td on covariates of t, d and
// the reporting day t+d.
struct DirectSpec {
    enum class Variant { structured, per_day_alpha };
    Variant variant = Variant::structured;

    // Occurrence-day covariates (structured variant only).
    CovariateToggles occurrence_toggles;
    // Reporting-day covariates.
    bool rep_dow = true;
    bool rep_holiday = true;
    bool rep_next_holiday = true;
    // Delay levels: individual dummies for d <= pool_threshold, weekly
    // pooling beyond (one level per reporting week). Reference is d = 0.
    long pool_threshold = 28;
};

// Column layout shared between design construction and nowcasting.
struct DirectLayout {
    DayDesign occ;               // structured variant: covariates of t
    std::map<long, int> day_col;    // per-day variant: t -> indicator column
    std::map<long, int> level_col;  // delay level -> column (ref level 0 absent)
    int rep_dow_col = -1;        // 6 dummies, ref Monday
    int rep_hol_col = -1;        // national, unofficial
    int rep_next_hol_col = -1;   // holiday class of t+d+1
    int dim = 0;
};

// Delay level of d: identity up to the pooling threshold, then weekly bins.
long direct_delay_level(long d, long pool_threshold);

struct DirectDesign {
    DesignMatrix design;
    std::vector<Cell> cells;  // row order
    DirectLayout layout;
};

// One row per upper-triangle cell, zero cells included.
DirectDesign build_direct_design(const RunoffTriangle& tri,
                                 const DirectSpec& spec);

struct DirectFit {
    DirectSpec spec;
    DirectDesign design;
    FitResult fit;
    // Occurrence days flagged as fragile for the per-day variant: their
    // alpha_t rests on a single positive cell.
    std::vector<long> flagged_days;
};

DirectFit fit_direct(const RunoffTriangle& tri, const DirectSpec& spec);

struct DirectNowcast {
    std::map<Cell, double> cell_means;  // t + d > tau, d <= tau-1
    double total = 0.0;
    // Lower-triangle cells skipped because their delay level was never
    // observed (empty with the default pooling, disclosed when not).
    std::vector<Cell> skipped;
};

DirectNowcast nowcast_direct(const DirectFit& fit, const RunoffTriangle& tri);

}  // namespace delaycast
