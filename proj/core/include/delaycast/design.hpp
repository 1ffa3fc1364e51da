#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "delaycast/calendar.hpp"

namespace delaycast {

// Weighted regression design: dummy-encoded covariates with an optional
// per-row offset and nonnegative (possibly fractional) per-row weight.
// An empty offset/weight vector means all zeros/ones.
struct DesignMatrix {
    Eigen::MatrixXd X;
    Eigen::VectorXd offset;
    Eigen::VectorXd weight;
    std::vector<std::string> names;

    double offset_at(Eigen::Index i) const {
        return offset.size() ? offset[i] : 0.0;
    }
    double weight_at(Eigen::Index i) const {
        return weight.size() ? weight[i] : 1.0;
    }
};

// Which calendar covariates of an occurrence day enter a linear predictor.
// Dummy coding with the first level as reference: month (ref January),
// dow (ref Monday), dom (ref 1).
struct CovariateToggles {
    bool month = true;
    bool dow = true;
    bool dom = true;
    bool jan1 = true;
    bool dec31 = true;
};

// Builds design rows of calendar features for occurrence days.
// Column 0 is always the intercept.
class DayDesign {
  public:
    explicit DayDesign(CovariateToggles toggles = {});

    int dim() const { return dim_; }
    const std::vector<std::string>& names() const { return names_; }
    const CovariateToggles& toggles() const { return toggles_; }

    void fill_row(long t, const CalendarConfig& cal,
                  Eigen::Ref<Eigen::RowVectorXd> row) const;
    Eigen::RowVectorXd row(long t, const CalendarConfig& cal) const;
    // Linear predictor x_t' beta.
    double predictor(long t, const CalendarConfig& cal,
                     const Eigen::VectorXd& beta) const;

  private:
    CovariateToggles toggles_;
    int dim_;
    std::vector<std::string> names_;
    int month_col_ = -1, dow_col_ = -1, dom_col_ = -1;
    int jan1_col_ = -1, dec31_col_ = -1;
};

}  // namespace delaycast
