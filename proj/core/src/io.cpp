#include "delaycast/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace delaycast {

using nlohmann::json;

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return in;
}

int column_index(const std::vector<std::string>& header,
                 const std::string& name, const std::string& path) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    throw std::runtime_error(path + ": missing column " + name);
}

json toggles_to_json(const CovariateToggles& t) {
    return json{{"month", t.month},
                {"dow", t.dow},
                {"dom", t.dom},
                {"jan1", t.jan1},
                {"dec31", t.dec31}};
}

CovariateToggles toggles_from_json(const json& j) {
    CovariateToggles t;
    t.month = j.at("month");
    t.dow = j.at("dow");
    t.dom = j.at("dom");
    t.jan1 = j.at("jan1");
    t.dec31 = j.at("dec31");
    return t;
}

json coefficients_to_json(const std::vector<std::string>& names,
                          const Eigen::VectorXd& values) {
    json j = json::object();
    for (std::size_t i = 0; i < names.size(); ++i)
        j[names[i]] = values[static_cast<Eigen::Index>(i)];
    return j;
}

Eigen::VectorXd coefficients_from_json(const std::vector<std::string>& names,
                                       const json& j) {
    Eigen::VectorXd v(names.size());
    for (std::size_t i = 0; i < names.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = j.at(names[i]).get<double>();
    return v;
}

}  // namespace

std::vector<EventRecord> read_events_csv(const std::string& path,
                                         const CalendarConfig& cal) {
    std::ifstream in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": empty events file");
    auto header = split_csv_line(line);
    int occ_col = column_index(header, "occurrence_date", path);
    int rep_col = column_index(header, "report_date", path);

    std::vector<EventRecord> events;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        Date occ = parse_iso_date(fields.at(occ_col));
        Date rep = parse_iso_date(fields.at(rep_col));
        long t = cal.day_index(occ);
        if (t < 1)
            throw std::runtime_error(path + ": occurrence " +
                                     fields.at(occ_col) +
                                     " precedes the calendar epoch");
        long d = (rep - occ).count();
        if (d < 0)
            throw std::runtime_error(path + ": report precedes occurrence on " +
                                     fields.at(occ_col));
        events.push_back({t, d});
    }
    return events;
}

void write_events_csv(const std::string& path,
                      const std::vector<EventRecord>& events,
                      const CalendarConfig& cal) {
    std::string out = "occurrence_date,report_date\n";
    for (const auto& e : events) {
        out += format_iso_date(cal.date(e.t));
        out += ',';
        out += format_iso_date(cal.date(e.t + e.d));
        out += '\n';
    }
    atomic_write(path, out);
}

std::vector<double> read_exposure_csv(const std::string& path,
                                      const CalendarConfig& cal, long tau) {
    std::ifstream in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": empty exposure file");
    auto header = split_csv_line(line);
    int month_col = column_index(header, "month", path);
    int exp_col = column_index(header, "earned_exposure", path);

    std::map<std::string, double> monthly;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        monthly[fields.at(month_col)] = std::stod(fields.at(exp_col));
    }

    std::vector<double> daily(tau);
    for (long t = 1; t <= tau; ++t) {
        std::chrono::year_month_day ymd(cal.date(t));
        char key[16];
        std::snprintf(key, sizeof key, "%04d-%02u", int(ymd.year()),
                      unsigned(ymd.month()));
        auto it = monthly.find(key);
        if (it == monthly.end())
            throw std::runtime_error(path + ": no exposure for month " +
                                     std::string(key));
        auto last = std::chrono::year_month_day_last(
            ymd.year(), std::chrono::month_day_last(ymd.month()));
        double days = static_cast<double>(unsigned(last.day()));
        daily[t - 1] = it->second / days;
    }
    return daily;
}

void read_holidays_csv(const std::string& path, CalendarConfig& cal) {
    std::ifstream in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": empty holiday file");
    auto header = split_csv_line(line);
    int date_col = column_index(header, "date", path);
    int class_col = column_index(header, "class", path);

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        Date d = parse_iso_date(fields.at(date_col));
        const std::string& cls = fields.at(class_col);
        if (cls == "national")
            cal.holidays.insert(d);
        else if (cls == "unofficial")
            cal.unofficial_holidays.insert(d);
        else
            throw std::runtime_error(path + ": unknown holiday class " + cls);
    }
}

void write_trace_csv(const std::string& path,
                     const std::vector<EmTraceRow>& trace) {
    std::ostringstream out;
    out.precision(17);
    out << "iteration,observed_loglik,max_param_change\n";
    for (const auto& row : trace)
        out << row.iteration << ',' << row.loglik << ','
            << row.max_param_change << '\n';
    atomic_write(path, out.str());
}

void write_nowcast_csv(const std::string& path,
                       const std::map<long, double>& groups,
                       const std::map<long, NowcastInterval>& intervals) {
    std::ostringstream out;
    out.precision(17);
    out << "group_key,mean,lower,upper\n";
    for (const auto& [key, mean] : groups) {
        const auto& iv = intervals.at(key);
        out << key << ',' << mean << ',' << iv.lower << ',' << iv.upper
            << '\n';
    }
    atomic_write(path, out.str());
}

void write_backtest_csv(const std::string& path,
                        const std::vector<BacktestRow>& rows) {
    std::ostringstream out;
    out.precision(17);
    out << "eval_date,spec_name,horizon,actual,predicted,lower,upper,covered,"
           "failed\n";
    for (const auto& row : rows) {
        out << row.eval_date << ',' << row.spec_name << ',' << row.horizon
            << ',' << row.actual << ',' << row.predicted << ',' << row.lower
            << ',' << row.upper << ',' << (row.covered ? 1 : 0) << ','
            << (row.failed ? 1 : 0) << '\n';
    }
    atomic_write(path, out.str());
}

void write_backtest_summary_json(const std::string& path,
                                 const std::vector<BacktestSummary>& summary) {
    json j = json::array();
    for (const auto& s : summary) {
        j.push_back({{"spec_name", s.spec_name},
                     {"mape", s.mape},
                     {"coverage_rate", s.coverage_rate},
                     {"failures", s.failures},
                     {"rows", s.rows}});
    }
    atomic_write(path, j.dump(2) + "\n");
}

std::string model_to_json(const JointModel& model) {
    json j;
    j["tau"] = model.tau;
    j["occurrence"] = {
        {"toggles", toggles_to_json(model.occurrence.design.toggles())},
        {"coefficients", coefficients_to_json(model.occurrence.design.names(),
                                              model.occurrence.alpha)}};
    json rep;
    if (model.reporting.is_stationary()) {
        rep["kind"] = "stationary";
        rep["p"] = model.reporting.stationary().p;
    } else {
        const auto& wi = model.reporting.week_intra();
        rep["week"] = {
            {"toggles", toggles_to_json(wi.week.design.toggles())},
            {"coefficients",
             coefficients_to_json(wi.week.design.names(), wi.week.theta)},
            {"phi", wi.week.phi},
            {"week_cutoff", wi.week.week_cutoff}};
        if (const auto* mat = std::get_if<IntraWeekMatrix>(&wi.intra)) {
            rep["kind"] = "week_matrix";
            json rows = json::array();
            for (int r = 0; r < 7; ++r) {
                json row = json::array();
                for (int c = 0; c < 7; ++c) row.push_back(mat->P(r, c));
                rows.push_back(row);
            }
            rep["P"] = rows;
        } else {
            rep["kind"] = "week_reverse";
            const auto& rev = std::get<ReverseTimeModel>(wi.intra);
            rep["gamma"] = coefficients_to_json(
                ReverseTimeModel::coefficient_names(), rev.gamma);
        }
    }
    j["reporting"] = rep;
    return j.dump(2) + "\n";
}

JointModel model_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    JointModel model;
    model.tau = j.at("tau");

    const json& occ = j.at("occurrence");
    DayDesign occ_design(toggles_from_json(occ.at("toggles")));
    model.occurrence = OccurrenceModel{
        occ_design,
        coefficients_from_json(occ_design.names(), occ.at("coefficients"))};

    const json& rep = j.at("reporting");
    std::string kind = rep.at("kind");
    if (kind == "stationary") {
        model.reporting = ReportingModel(
            StationaryDelayModel{rep.at("p").get<std::vector<double>>()});
        return model;
    }
    const json& wk = rep.at("week");
    DayDesign week_design(toggles_from_json(wk.at("toggles")));
    WeekDelayModel week{
        week_design,
        coefficients_from_json(week_design.names(), wk.at("coefficients")),
        wk.at("phi"), wk.at("week_cutoff")};
    IntraWeekModel intra;
    if (kind == "week_matrix") {
        IntraWeekMatrix mat;
        const json& rows = rep.at("P");
        for (int r = 0; r < 7; ++r)
            for (int c = 0; c < 7; ++c) mat.P(r, c) = rows.at(r).at(c);
        intra = mat;
    } else if (kind == "week_reverse") {
        ReverseTimeModel rev;
        rev.gamma = coefficients_from_json(
            ReverseTimeModel::coefficient_names(), rep.at("gamma"));
        intra = rev;
    } else {
        throw std::runtime_error("unknown reporting kind " + kind);
    }
    model.reporting =
        ReportingModel(ReportingModel::WeekIntra{std::move(week), intra});
    return model;
}

void write_model_json(const std::string& path, const JointModel& model) {
    atomic_write(path, model_to_json(model));
}

JointModel read_model_json(const std::string& path) {
    std::ifstream in = open_or_throw(path);
    std::stringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

void write_manifest_json(const std::string& path,
                         const std::string& config_text, std::uint64_t seed,
                         const std::string& version) {
    std::uint64_t hash = 14695981039346656037ULL;  // FNV-1a
    for (unsigned char c : config_text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(hash));
    json j{{"config_hash", hex}, {"seed", seed}, {"version", version}};
    atomic_write(path, j.dump(2) + "\n");
}

void atomic_write(const std::string& path, const std::string& contents) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp);
        out << contents;
        if (!out) throw std::runtime_error("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename failed for " + path);
}

}  // namespace delaycast
