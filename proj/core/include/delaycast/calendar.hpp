#pragma once

#include <chrono>
#include <set>
#include <string>
#include <string_view>

namespace delaycast {

using Date = std::chrono::sys_days;

// Parse "YYYY-MM-DD". Throws std::invalid_argument on malformed input.
Date parse_iso_date(std::string_view iso);
std::string format_iso_date(Date d);

enum class HolidayClass { none, national, unofficial };

// Maps the abstract day index t = 1, 2, ... onto calendar dates and
// carries the holiday sets used by the reporting covariates.
struct CalendarConfig {
    Date epoch;  // date of day index t = 1
    std::set<Date> holidays;             // national holidays
    std::set<Date> unofficial_holidays;  // e.g. New Year's Eve, Good Friday

    Date date(long t) const { return epoch + std::chrono::days{t - 1}; }
    long day_index(Date d) const {
        return (d - epoch).count() + 1;
    }

    HolidayClass holiday_class_of(long t) const {
        Date d = date(t);
        if (holidays.count(d)) return HolidayClass::national;
        if (unofficial_holidays.count(d)) return HolidayClass::unofficial;
        return HolidayClass::none;
    }
};

// Categorical encodings of one occurrence day. dow: Monday=1 .. Sunday=7.
struct DayFeatures {
    int dow;    // 1..7, Monday = 1
    int dom;    // 1..31
    int month;  // 1..12
    bool is_jan1;
    bool is_dec31;
    HolidayClass holiday_class;
};

DayFeatures day_features(long t, const CalendarConfig& cal);

// Day-of-week of day index t, Monday = 1 .. Sunday = 7.
int day_of_week(long t, const CalendarConfig& cal);

inline bool is_weekend_dow(int dow) { return dow >= 6; }

// Intra-week reporting-day level: working days within the 7-day window
// starting at the occurrence day are numbered 1..5 in chronological order,
// Saturday maps to level 6 and Sunday to level 7.
// Requires t <= r < t + 7.
inline constexpr int kWdaySaturday = 6;
inline constexpr int kWdaySunday = 7;
int wday_level(long t, long r, const CalendarConfig& cal);

// Number of elapsed working days within the current reporting week,
// i.e. days strictly after the week start (t + 7*floor((r-t)/7)) and at or
// before r that are neither weekend days nor national holidays.
// Requires r >= t.
int workdays_between(long t, long r, const CalendarConfig& cal);

}  // namespace delaycast
