#pragma once

#include <map>
#include <string>
#include <vector>

#include "delaycast/em.hpp"

namespace delaycast {

// Flattens a JointModel into one real vector for numerical differentiation:
// alpha, theta, log phi (unless held fixed), then the intra-week parameters
// (matrix rows as log-ratios against a reference column, with entries below
// 1e-12 treated as structural zeros; reverse-time gamma restricted to
// covariates that vary over the triangle). Stationary models have no
// regression structure and are not packable.
class ParameterPacker {
  public:
    ParameterPacker(const JointModel& model, const RunoffTriangle& tri,
                    bool include_phi = true);

    int dim() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& names() const { return names_; }

    Eigen::VectorXd pack(const JointModel& model) const;
    JointModel unpack(const Eigen::VectorXd& params) const;

  private:
    JointModel template_;
    bool include_phi_;
    std::vector<std::string> names_;
    std::vector<int> occ_active_, week_active_;  // identifiable columns
    // Matrix intra: per row the reference column and the packed columns.
    std::array<int, 7> ref_col_{};
    std::vector<std::pair<int, int>> matrix_entries_;  // (row, col)
    std::vector<int> gamma_active_;                    // reverse-time indices
};

struct InformationPair {
    Eigen::MatrixXd I_c;  // negative Hessian of Q at the fit
    Eigen::MatrixXd I_o;  // negative Hessian of the observed log-likelihood
};

// Expected complete-data log-likelihood Q(Theta; counts), constants dropped.
double q_objective(const JointModel& model, const CompleteCounts& counts,
                   const RunoffTriangle& tri);

// Central finite-difference Hessians with steps max(1e-5, 1e-5|param|),
// symmetrized. Throws when a non-finite entry appears, naming the coordinate.
InformationPair observed_information(const JointModel& model,
                                     const RunoffTriangle& tri,
                                     const ParameterPacker& packer);

// Complete-data AIC: -2 Q(fit) + 2 trace(I_c I_o^{-1}).
double aiccd(const JointModel& model, const RunoffTriangle& tri,
             bool include_phi = true);

// Generalized Cook's distance g' I_c^{-1} g of one observed cell, where g is
// the cell's contribution to the Q-gradient at the fit.
double cooks_distance(const JointModel& model, const RunoffTriangle& tri,
                      const ParameterPacker& packer, const Eigen::MatrixXd& I_c,
                      long t, long d);

// All observed cells at once (shares the perturbed delay tables).
std::map<Cell, double> cooks_distances(const JointModel& model,
                                       const RunoffTriangle& tri,
                                       const ParameterPacker& packer,
                                       const Eigen::MatrixXd& I_c);

enum class NowcastGrouping { cell, occurrence, reporting_date, week, month };

struct NowcastInterval {
    double mean = 0.0;
    long lower = 0;
    long upper = 0;
};

struct NowcastResult {
    std::map<Cell, double> cell_means;        // t + d > tau, d <= tau-1
    std::map<long, double> by_occurrence;     // t -> lambda_t p_t^IBNR
    std::map<long, double> by_reporting;      // rho -> sum_t cell mean
    double total = 0.0;      // sum of by_occurrence (includes the remainder)
    double remainder = 0.0;  // mass beyond delay tau-1
};

NowcastResult nowcast(const JointModel& model, const RunoffTriangle& tri);

// Group keys: occurrence/reporting_date use the day index, week the
// reporting week (rho-1)/7 + 1, month the reporting month counted from the
// epoch. cell grouping is exposed via cell_means directly.
std::map<long, double> nowcast_groups(const NowcastResult& result,
                                      NowcastGrouping grouping,
                                      const CalendarConfig& cal);

// Equal-tail Poisson quantile interval at the plug-in mean.
NowcastInterval poisson_interval(double mean, double level);

// Intervals per group; simultaneous mode Bonferroni-adjusts the level to
// 1 - (1-level)/m over the m groups.
std::map<long, NowcastInterval> prediction_intervals(
    const std::map<long, double>& groups, double level,
    bool simultaneous = false);

}  // namespace delaycast
