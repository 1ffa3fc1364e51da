#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "delaycast/io.hpp"
#include "delaycast/simulate.hpp"

using namespace delaycast;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("delaycast_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const {
        return (path / name).string();
    }
};

CalendarConfig cal() {
    CalendarConfig c;
    c.epoch = parse_iso_date("2018-01-01");
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("events roundtrip through CSV") {
    TempDir dir;
    std::vector<EventRecord> events{{1, 0}, {5, 3}, {40, 11}, {40, 0}};
    auto c = cal();
    write_events_csv(dir.file("events.csv"), events, c);
    auto back = read_events_csv(dir.file("events.csv"), c);
    REQUIRE(back.size() == events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(back[i].t == events[i].t);
        CHECK(back[i].d == events[i].d);
    }
}

TEST_CASE("events before the epoch are rejected") {
    TempDir dir;
    std::ofstream out(dir.file("events.csv"));
    out << "occurrence_date,report_date\n2017-12-30,2018-01-05\n";
    out.close();
    CHECK_THROWS(read_events_csv(dir.file("events.csv"), cal()));
}

TEST_CASE("monthly exposure becomes daily by month length") {
    TempDir dir;
    std::ofstream out(dir.file("exposure.csv"));
    out << "month,earned_exposure\n2018-01,62.0\n2018-02,56.0\n";
    out.close();
    auto exposure = read_exposure_csv(dir.file("exposure.csv"), cal(), 40);
    REQUIRE(exposure.size() == 40);
    CHECK(exposure[0] == doctest::Approx(2.0));    // 62 / 31
    CHECK(exposure[30] == doctest::Approx(2.0));   // Jan 31
    CHECK(exposure[31] == doctest::Approx(2.0));   // Feb 1: 56 / 28
    // A day not covered by any month row throws.
    CHECK_THROWS(read_exposure_csv(dir.file("exposure.csv"), cal(), 90));
}

TEST_CASE("holiday file populates both holiday classes") {
    TempDir dir;
    std::ofstream out(dir.file("holidays.csv"));
    out << "date,class\n2018-01-01,national\n2018-12-31,unofficial\n";
    out.close();
    auto c = cal();
    read_holidays_csv(dir.file("holidays.csv"), c);
    CHECK(c.holiday_class_of(1) == HolidayClass::national);
    CHECK(c.holiday_class_of(365) == HolidayClass::unofficial);
    CHECK(c.holiday_class_of(2) == HolidayClass::none);
}

TEST_CASE("joint model roundtrips through JSON at double precision") {
    for (auto kind : {ReportingSpec::Kind::week_matrix,
                      ReportingSpec::Kind::week_reverse}) {
        auto cfg = make_default_scenario(40, 7, kind);
        JointModel model{cfg.occurrence, cfg.reporting, 40};
        // Perturb coefficients so values are not round numbers.
        model.occurrence.alpha[0] += 1.0 / 3.0;
        auto back = model_from_json(model_to_json(model));
        CHECK(back.tau == model.tau);
        REQUIRE(back.occurrence.alpha.size() == model.occurrence.alpha.size());
        for (int i = 0; i < model.occurrence.alpha.size(); ++i)
            CHECK(back.occurrence.alpha[i] == model.occurrence.alpha[i]);
        const auto& wa = model.reporting.week_intra();
        const auto& wb = back.reporting.week_intra();
        for (int i = 0; i < wa.week.theta.size(); ++i)
            CHECK(wb.week.theta[i] == wa.week.theta[i]);
        CHECK(wb.week.phi == wa.week.phi);
        CHECK(wb.week.week_cutoff == wa.week.week_cutoff);
        if (kind == ReportingSpec::Kind::week_matrix) {
            const auto& Pa = std::get<IntraWeekMatrix>(wa.intra).P;
            const auto& Pb = std::get<IntraWeekMatrix>(wb.intra).P;
            CHECK((Pa - Pb).cwiseAbs().maxCoeff() == 0.0);
        } else {
            const auto& ga = std::get<ReverseTimeModel>(wa.intra).gamma;
            const auto& gb = std::get<ReverseTimeModel>(wb.intra).gamma;
            CHECK((ga - gb).cwiseAbs().maxCoeff() == 0.0);
        }
    }
}

TEST_CASE("model files roundtrip on disk") {
    TempDir dir;
    auto cfg = make_default_scenario(30, 9);
    JointModel model{cfg.occurrence, cfg.reporting, 30};
    write_model_json(dir.file("model.json"), model);
    auto back = read_model_json(dir.file("model.json"));
    CHECK((back.occurrence.alpha - model.occurrence.alpha).norm() == 0.0);
}

TEST_CASE("trace and nowcast CSVs carry their columns") {
    TempDir dir;
    std::vector<EmTraceRow> trace{{0, -100.5, 0.0}, {1, -98.25, 0.75}};
    write_trace_csv(dir.file("trace.csv"), trace);
    auto text = slurp(dir.file("trace.csv"));
    CHECK(text.find("iteration,observed_loglik,max_param_change") != std::string::npos);
    CHECK(text.find("-98.25") != std::string::npos);

    std::map<long, double> groups{{101, 4.5}, {102, 2.25}};
    std::map<long, NowcastInterval> ivs{{101, {4.5, 1, 9}}, {102, {2.25, 0, 6}}};
    write_nowcast_csv(dir.file("nowcast.csv"), groups, ivs);
    text = slurp(dir.file("nowcast.csv"));
    CHECK(text.find("group_key,mean,lower,upper") != std::string::npos);
    CHECK(text.find("101,4.5,1,9") != std::string::npos);
}

TEST_CASE("manifest hashes the config text deterministically") {
    TempDir dir;
    write_manifest_json(dir.file("a.json"), "config text", 42, "1.0.0");
    write_manifest_json(dir.file("b.json"), "config text", 42, "1.0.0");
    CHECK(slurp(dir.file("a.json")) == slurp(dir.file("b.json")));
    auto j = nlohmann::json::parse(slurp(dir.file("a.json")));
    CHECK(j["seed"] == 42);
    CHECK(j["version"] == "1.0.0");
    CHECK(j.contains("config_hash"));
    write_manifest_json(dir.file("c.json"), "other text", 42, "1.0.0");
    auto j2 = nlohmann::json::parse(slurp(dir.file("c.json")));
    CHECK(j["config_hash"] != j2["config_hash"]);
}

TEST_CASE("atomic write leaves no temporary behind") {
    TempDir dir;
    atomic_write(dir.file("out.txt"), "payload");
    CHECK(slurp(dir.file("out.txt")) == "payload");
    int entries = 0;
    for (auto& e : fs::directory_iterator(dir.path)) {
        (void)e;
        ++entries;
    }
    CHECK(entries == 1);
}
