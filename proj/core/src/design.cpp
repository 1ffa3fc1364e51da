#include "delaycast/design.hpp"

namespace delaycast {

namespace {
const char* kMonthNames[] = {"jan", "feb", "mar", "apr", "may", "jun",
                             "jul", "aug", "sep", "oct", "nov", "dec"};
const char* kDowNames[] = {"mon", "tue", "wed", "thu", "fri", "sat", "sun"};
}  // namespace

DayDesign::DayDesign(CovariateToggles toggles) : toggles_(toggles) {
    names_.push_back("intercept");
    int col = 1;
    if (toggles_.month) {
        month_col_ = col;
        for (int m = 2; m <= 12; ++m)
            names_.push_back(std::string("month_") + kMonthNames[m - 1]);
        col += 11;
    }
    if (toggles_.dow) {
        dow_col_ = col;
        for (int d = 2; d <= 7; ++d)
            names_.push_back(std::string("dow_") + kDowNames[d - 1]);
        col += 6;
    }
    if (toggles_.dom) {
        dom_col_ = col;
        for (int d = 2; d <= 31; ++d)
            names_.push_back("dom_" + std::to_string(d));
        col += 30;
    }
    if (toggles_.jan1) {
        jan1_col_ = col++;
        names_.push_back("jan1");
    }
    if (toggles_.dec31) {
        dec31_col_ = col++;
        names_.push_back("dec31");
    }
    dim_ = col;
}

void DayDesign::fill_row(long t, const CalendarConfig& cal,
                         Eigen::Ref<Eigen::RowVectorXd> row) const {
    DayFeatures f = day_features(t, cal);
    row.setZero();
    row[0] = 1.0;
    if (month_col_ >= 0 && f.month > 1) row[month_col_ + f.month - 2] = 1.0;
    if (dow_col_ >= 0 && f.dow > 1) row[dow_col_ + f.dow - 2] = 1.0;
    if (dom_col_ >= 0 && f.dom > 1) row[dom_col_ + f.dom - 2] = 1.0;
    if (jan1_col_ >= 0 && f.is_jan1) row[jan1_col_] = 1.0;
    if (dec31_col_ >= 0 && f.is_dec31) row[dec31_col_] = 1.0;
}

Eigen::RowVectorXd DayDesign::row(long t, const CalendarConfig& cal) const {
    Eigen::RowVectorXd r(dim_);
    fill_row(t, cal, r);
    return r;
}

double DayDesign::predictor(long t, const CalendarConfig& cal,
                            const Eigen::VectorXd& beta) const {
    return row(t, cal).dot(beta);
}

}  // namespace delaycast
