#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "buildevo/dataset.hpp"

using namespace buildevo;

namespace {

const std::string kFixtures = BUILDEVO_FIXTURE_DIR;

EnergyDataset load_small(LoadReport& report) {
    return load_dataset(kFixtures + "/metadata_small.csv", kFixtures + "/weather_small.csv",
                        {{MeterType::electricity, kFixtures + "/meters_small.csv"}}, report);
}

std::string temp_csv(const std::string& content) {
    static int counter = 0;
    const std::string path = std::filesystem::temp_directory_path() /
                             ("buildevo_test_" + std::to_string(counter++) + ".csv");
    std::ofstream(path) << content;
    return path;
}

}  // namespace

TEST_CASE("load_dataset reads the small fixtures") {
    LoadReport report;
    EnergyDataset ds = load_small(report);

    REQUIRE(ds.buildings.size() == 3);  // b1, b2, b3; dup and empty id dropped
    CHECK(ds.buildings[0].building_id == "b1");
    CHECK(ds.buildings[0].sqft == 10000.0);
    CHECK(ds.buildings[0].year_built == 1995);
    CHECK(ds.buildings[0].primary_space_usage == "Office");
    CHECK(ds.buildings[2].timezone == "Mars/Olympus");

    // 2 metadata rows + 2 weather rows + 1 meter row.
    CHECK(report.dropped_rows == 5);
    bool saw_dup = false, saw_tz = false, saw_ghost = false;
    for (const auto& w : report.warnings) {
        saw_dup |= w.find("duplicate building_id") != std::string::npos;
        saw_tz |= w.find("Mars/Olympus") != std::string::npos;
        saw_ghost |= w.find("ghost") != std::string::npos;
    }
    CHECK(saw_dup);
    CHECK(saw_tz);
    CHECK(saw_ghost);

    REQUIRE(ds.meters.size() == 2);  // ghost column ignored, b3 has no column
    CHECK_FALSE(ds.aligned);
}

TEST_CASE("align_and_resample grids the small fixtures") {
    LoadReport report;
    EnergyDataset ds = align_and_resample(load_small(report));

    CHECK(ds.aligned);
    CHECK(ds.span_start == 16804 * 24);  // 2016-01-04 00:00 UTC
    CHECK(ds.span_hours == 12);

    const MeterSeries* b1 = ds.find_series("b1", MeterType::electricity);
    REQUIRE(b1);
    const double expect_b1[] = {1, 2, 3, 4, NAN, NAN, 7, 8, 9, 15, 11, 12};
    REQUIRE(b1->values.size() == 12);
    for (size_t i = 0; i < 12; ++i) {
        if (std::isnan(expect_b1[i])) {
            CHECK_FALSE(b1->mask[i]);
            CHECK(std::isnan(b1->values[i]));
        } else {
            CHECK(b1->mask[i]);
            CHECK(b1->values[i] == expect_b1[i]);  // hour 9 averages 10 and 20
        }
    }
    const MeterSeries* b2 = ds.find_series("b2", MeterType::electricity);
    REQUIRE(b2);
    for (size_t i = 0; i < 11; ++i) CHECK(b2->values[i] == 5.0);
    CHECK_FALSE(b2->mask[11]);

    REQUIRE(ds.weather.count("s1"));
    const WeatherGrid& g = ds.weather.at("s1");
    const double expect_temp[] = {10, 13, 14, 16, 18, 20, 22, 24, 26, 28, 26, 24};
    REQUIRE(g.air_temperature.size() == 12);
    for (size_t i = 0; i < 12; ++i)
        CHECK(g.air_temperature[i] == Catch::Approx(expect_temp[i]).margin(1e-12));
    // Humidity observed once; nearest-value extension covers the span.
    for (double h : g.humidity) CHECK(h == 50.0);
    // Wind column absent from the fixture: never observed, stays missing.
    for (double w : g.wind_speed) CHECK(std::isnan(w));
    CHECK(g.solar_irradiance[8] == 100.0);
    CHECK(g.solar_irradiance[9] == 300.0);
}

TEST_CASE("align_and_resample is idempotent") {
    LoadReport report;
    EnergyDataset once = align_and_resample(load_small(report));
    EnergyDataset twice = align_and_resample(once);
    CHECK(twice.span_start == once.span_start);
    CHECK(twice.span_hours == once.span_hours);
    REQUIRE(twice.meters.size() == once.meters.size());
    const auto& a = once.find_series("b1", MeterType::electricity)->values;
    const auto& b = twice.find_series("b1", MeterType::electricity)->values;
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i]))
            CHECK(std::isnan(b[i]));
        else
            CHECK(a[i] == b[i]);
    }
}

TEST_CASE("missingness_report on the small fixtures") {
    LoadReport report;
    EnergyDataset ds = align_and_resample(load_small(report));
    const auto rows = missingness_report(ds);
    REQUIRE(rows.size() == 2);

    const auto* b1 = &rows[0];
    if (b1->building_id != "b1") b1 = &rows[1];
    REQUIRE(b1->building_id == "b1");
    CHECK(b1->missing_total == 2);
    CHECK(b1->longest_gap == 2);
    CHECK(b1->missing_pct == Catch::Approx(100.0 * 2 / 12));
    CHECK(b1->gaps_by_hour_of_day[4] == 1);
    CHECK(b1->gaps_by_hour_of_day[5] == 1);
    CHECK(b1->gaps_by_hour_of_day[0] == 0);
}

TEST_CASE("unresolved weather site throws") {
    LoadReport report;
    CHECK_THROWS_AS(
        load_dataset(kFixtures + "/metadata_unresolved.csv", kFixtures + "/weather_small.csv",
                     {{MeterType::electricity, kFixtures + "/meters_small.csv"}}, report),
        UnresolvedSite);
}

TEST_CASE("missing required column throws MissingColumn") {
    const std::string bad = temp_csv("building_id,sqft\nb1,100\n");
    LoadReport report;
    CHECK_THROWS_AS(load_dataset(bad, kFixtures + "/weather_small.csv",
                                 {{MeterType::electricity, kFixtures + "/meters_small.csv"}},
                                 report),
                    MissingColumn);
    std::remove(bad.c_str());
}

TEST_CASE("empty dataset throws") {
    const std::string meta = temp_csv(
        "building_id,site_id,sqft,yearbuilt,primaryspaceusage,timezone\n"
        "b9,s1,100,2000,Office,UTC\n");
    // No meter column matches b9, so no meter series survive.
    LoadReport report;
    CHECK_THROWS_AS(load_dataset(meta, kFixtures + "/weather_small.csv",
                                 {{MeterType::electricity, kFixtures + "/meters_small.csv"}},
                                 report),
                    EmptyDataset);
    std::remove(meta.c_str());
}

TEST_CASE("dataset JSON round-trips") {
    LoadReport report;
    EnergyDataset ds = align_and_resample(load_small(report));
    const std::string path =
        std::filesystem::temp_directory_path() / "buildevo_roundtrip.json";
    save_dataset(ds, path);
    EnergyDataset back = load_dataset_json(path);
    std::remove(path.c_str());

    CHECK(back.aligned);
    CHECK(back.span_start == ds.span_start);
    CHECK(back.span_hours == ds.span_hours);
    REQUIRE(back.buildings.size() == ds.buildings.size());
    CHECK(back.buildings[0].sqft == ds.buildings[0].sqft);
    REQUIRE(back.meters.size() == ds.meters.size());
    const auto& a = ds.find_series("b1", MeterType::electricity)->values;
    const auto& b = back.find_series("b1", MeterType::electricity)->values;
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i]))
            CHECK(std::isnan(b[i]));
        else
            CHECK(a[i] == b[i]);
    }
    CHECK(back.weather.at("s1").air_temperature == ds.weather.at("s1").air_temperature);
    CHECK(back.find_series("b1", MeterType::electricity)->mask ==
          ds.find_series("b1", MeterType::electricity)->mask);
}

TEST_CASE("timezone shifts meter stamps to UTC") {
    // One building in US/Eastern; a local-noon January reading lands at 17:00 UTC.
    const std::string meta = temp_csv(
        "building_id,site_id,sqft,yearbuilt,primaryspaceusage,timezone\n"
        "be,s1,100,2000,Office,US/Eastern\n");
    const std::string weather = temp_csv(
        "timestamp,site_id,airTemperature\n"
        "2016-01-04 10:00:00,s1,5\n"
        "2016-01-04 18:00:00,s1,6\n");
    const std::string meter = temp_csv(
        "timestamp,be\n"
        "2016-01-04 12:00:00,42\n"
        "2016-01-04 13:00:00,43\n");
    LoadReport report;
    EnergyDataset ds =
        align_and_resample(load_dataset(meta, weather, {{MeterType::electricity, meter}}, report));
    std::remove(meta.c_str());
    std::remove(weather.c_str());
    std::remove(meter.c_str());

    CHECK(ds.span_start == 16804 * 24 + 17);
    CHECK(ds.span_hours == 2);
    const MeterSeries* s = ds.find_series("be", MeterType::electricity);
    REQUIRE(s);
    CHECK(s->values[0] == 42.0);
    CHECK(s->values[1] == 43.0);
}
