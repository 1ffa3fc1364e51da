#include "delaycast/calendar.hpp"

#include <charconv>
#include <stdexcept>

namespace delaycast {

Date parse_iso_date(std::string_view iso) {
    auto fail = [&] {
        throw std::invalid_argument("expected YYYY-MM-DD date, got '" +
                                    std::string(iso) + "'");
    };
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') fail();
    auto num = [&](int from, int to) {
        int v = 0;
        auto res = std::from_chars(iso.data() + from, iso.data() + to, v);
        if (res.ec != std::errc{} || res.ptr != iso.data() + to) fail();
        return v;
    };
    std::chrono::year_month_day ymd{
        std::chrono::year{num(0, 4)},
        std::chrono::month{static_cast<unsigned>(num(5, 7))},
        std::chrono::day{static_cast<unsigned>(num(8, 10))}};
    if (!ymd.ok()) fail();
    return std::chrono::sys_days{ymd};
}

std::string format_iso_date(Date d) {
    std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()));
    return buf;
}

int day_of_week(long t, const CalendarConfig& cal) {
    std::chrono::weekday wd{cal.date(t)};
    return static_cast<int>(wd.iso_encoding());  // Monday = 1 .. Sunday = 7
}

DayFeatures day_features(long t, const CalendarConfig& cal) {
    if (t < 1) throw std::invalid_argument("day index must be >= 1");
    Date d = cal.date(t);
    std::chrono::year_month_day ymd{d};
    if (!ymd.ok()) throw std::out_of_range("date overflow for day index");
    DayFeatures f;
    f.dow = day_of_week(t, cal);
    f.dom = static_cast<int>(unsigned(ymd.day()));
    f.month = static_cast<int>(unsigned(ymd.month()));
    f.is_jan1 = (f.month == 1 && f.dom == 1);
    f.is_dec31 = (f.month == 12 && f.dom == 31);
    f.holiday_class = cal.holiday_class_of(t);
    return f;
}

int wday_level(long t, long r, const CalendarConfig& cal) {
    if (r < t || r - t >= 7)
        throw std::invalid_argument("wday_level requires t <= r < t + 7");
    int dow_r = day_of_week(r, cal);
    if (dow_r == 6) return kWdaySaturday;
    if (dow_r == 7) return kWdaySunday;
    // Number the non-weekend days in [t, r] chronologically.
    int level = 0;
    for (long s = t; s <= r; ++s) {
        if (!is_weekend_dow(day_of_week(s, cal))) ++level;
    }
    return level;  // 1..5
}

int workdays_between(long t, long r, const CalendarConfig& cal) {
    if (r < t) throw std::invalid_argument("workdays_between requires r >= t");
    long week_start = t + 7 * ((r - t) / 7);
    int count = 0;
    for (long s = week_start + 1; s <= r; ++s) {
        if (is_weekend_dow(day_of_week(s, cal))) continue;
        if (cal.holiday_class_of(s) == HolidayClass::national) continue;
        ++count;
    }
    return count;
}

}  // namespace delaycast
