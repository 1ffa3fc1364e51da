#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <variant>
#include <vector>

#include "delaycast/calendar.hpp"
#include "delaycast/design.hpp"

namespace delaycast {

// Negative binomial model for the reporting week w = floor(d/7):
// P(W = w) = Gamma(phi+w)/(w! Gamma(phi)) * phi^phi mu_t^w / (phi+mu_t)^(phi+w)
// with mu_t = exp(x_t' theta). The tail beyond week_cutoff is folded into
// the final bucket so the vector over w = 0..week_cutoff sums to one.
struct WeekDelayModel {
    DayDesign design;
    Eigen::VectorXd theta;
    double phi = 1.0;
    int week_cutoff = 104;

    double mu(long t, const CalendarConfig& cal) const {
        return std::exp(design.predictor(t, cal, theta));
    }
    // probabilities for w = 0..week_cutoff (last entry is survival mass)
    std::vector<double> week_probabilities(long t, const CalendarConfig& cal) const;
};

// log NB pmf at w.
double nb_week_log_pmf(double mu, double phi, long w);

double week_probability(const WeekDelayModel& model, long t, long w,
                        const CalendarConfig& cal);

// Day probabilities within the reporting week, rows indexed by the
// occurrence day-of-week (Monday first), columns by intra-week level
// (wday1..wday5, Saturday, Sunday). Rows sum to one.
struct IntraWeekMatrix {
    Eigen::Matrix<double, 7, 7> P;
};

// Reverse-time intra-week model: logit(q_{t,7w+j}) = x_{td}' gamma where
// q is the probability of delay 7w+j given delay in [7w, 7w+j].
// Coefficient layout: intercept, workdays 1..5 (ref 0), dow(t+d) Tue..Sun
// (ref Monday), holiday national, holiday unofficial.
struct ReverseTimeModel {
    static constexpr int kDim = 1 + 5 + 6 + 2;
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(kDim);

    static std::vector<std::string> coefficient_names();
    static Eigen::RowVectorXd covariate_row(long t, long report_day,
                                            const CalendarConfig& cal);
    double q(long t, long d, const CalendarConfig& cal) const;
};

using IntraWeekModel = std::variant<IntraWeekMatrix, ReverseTimeModel>;

// The 7 intra-week probabilities for reporting week w of occurrence day t
// (j = 0..6); sums to one.
std::array<double, 7> intra_week_vector(const IntraWeekModel& model, long t,
                                        long w, const CalendarConfig& cal);

double intra_week_probability(const IntraWeekModel& model, long t, long d,
                              const CalendarConfig& cal);

// Reconstruct weekly probabilities from reverse-time hazards q_1..q_6:
// p_j = q_j * prod_{k>j} (1-q_k), p_0 = prod_{k=1..6} (1-q_k).
std::array<double, 7> weekly_from_reverse_hazards(const std::array<double, 6>& q);
// Inverse: q_j = p_j / sum_{k<=j} p_k.
std::array<double, 6> reverse_hazards_from_weekly(const std::array<double, 7>& p);

// Stationary chain-ladder delay distribution p_0..p_{tau-1}.
struct StationaryDelayModel {
    std::vector<double> p;
};

// The reporting-delay distribution p_td under one of the three structures.
class ReportingModel {
  public:
    struct WeekIntra {
        WeekDelayModel week;
        IntraWeekModel intra;
    };

    ReportingModel() : v_(StationaryDelayModel{{1.0}}) {}
    explicit ReportingModel(StationaryDelayModel m) : v_(std::move(m)) {}
    explicit ReportingModel(WeekIntra m) : v_(std::move(m)) {}

    bool is_stationary() const {
        return std::holds_alternative<StationaryDelayModel>(v_);
    }
    const StationaryDelayModel& stationary() const {
        return std::get<StationaryDelayModel>(v_);
    }
    const WeekIntra& week_intra() const { return std::get<WeekIntra>(v_); }
    WeekIntra& week_intra() { return std::get<WeekIntra>(v_); }

    // Largest delay with nonzero probability under the cutoff completion.
    long max_delay() const;
    // p_td for d = 0..max_delay(); sums to one.
    std::vector<double> delay_distribution(long t, const CalendarConfig& cal) const;
    double cell_probability(long t, long d, const CalendarConfig& cal) const;
    // p_t^r = sum_{d <= tau - t} p_td.
    double reported_mass(long t, long tau, const CalendarConfig& cal) const;

  private:
    std::variant<StationaryDelayModel, WeekIntra> v_;
};

// Precomputed delay distributions for every occurrence day of a triangle,
// with sharing across days that have identical covariate patterns.
class DelayTable {
  public:
    DelayTable(const ReportingModel& model, const CalendarConfig& cal, long tau);

    long tau() const { return tau_; }
    long max_delay() const { return max_delay_; }
    const std::vector<double>& dist(long t) const { return *per_t_[t - 1]; }
    double cell(long t, long d) const {
        const auto& v = dist(t);
        return d <= max_delay_ ? v[d] : 0.0;
    }
    double reported_mass(long t) const { return reported_[t - 1]; }
    double ibnr_mass(long t) const { return 1.0 - reported_[t - 1]; }
    // sum_{d >= tau} p_td (the remainder-bucket mass).
    double tail_mass(long t) const { return tail_[t - 1]; }

  private:
    long tau_;
    long max_delay_;
    std::vector<std::shared_ptr<const std::vector<double>>> per_t_;
    std::vector<double> reported_, tail_;
};

// Expected complete-data counts: observed cells verbatim, unreported cells
// filled with their conditional expectations, plus the remainder bucket
// for delays of at least tau days.
struct CompleteCounts {
    Eigen::MatrixXd expected;    // tau rows, tau cols: (t-1, d), d = 0..tau-1
    Eigen::VectorXd remainder;   // per t, delay >= tau
    Eigen::VectorXd row_totals;  // per t: sum_d expected + remainder
};

// Structure of the reporting model to be fitted in the M-step.
struct ReportingSpec {
    enum class Kind { stationary, week_matrix, week_reverse };
    Kind kind = Kind::week_matrix;
    CovariateToggles week_toggles;
    int week_cutoff = 104;
    double fixed_phi = 0.0;   // > 0: dispersion held fixed
    double prob_floor = 0.0;  // floor for intra-week matrix entries
};

// Maximizer of the reporting part of the complete-data likelihood:
// sum_t sum_d N_td^(k) log p_td (+ right-censoring term when requested).
// `previous` seeds warm starts and supplies fallback values for empty rows.
ReportingModel reporting_m_step(const CompleteCounts& counts,
                                const ReportingSpec& spec,
                                const CalendarConfig& cal, long tau,
                                bool include_censoring = false,
                                const ReportingModel* previous = nullptr);

// The objective the M-step maximizes, evaluated for a given model on given
// expected counts (used for monotonicity diagnostics).
double reporting_objective(const ReportingModel& model,
                           const CompleteCounts& counts,
                           const CalendarConfig& cal, long tau,
                           bool include_censoring = false);

}  // namespace delaycast
