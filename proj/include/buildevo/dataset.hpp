#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "buildevo/common.hpp"
#include "buildevo/csv.hpp"
#include "buildevo/timeutil.hpp"
#include "buildevo/types.hpp"

// Loading, validation, and temporal alignment of building metadata, weather
// and meter readings. A dataset is a two-phase object: load_dataset()
// produces raw (naive-timestamp) samples; align_and_resample() buckets
// everything onto one hourly UTC grid. The mask is the source of truth for
// missingness; the NaN sentinel behind a false mask slot is never read.

namespace buildevo {

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingColumn : DatasetError {
    explicit MissingColumn(const std::string& col) : DatasetError("missing column: " + col) {}
};
struct UnresolvedSite : DatasetError {
    explicit UnresolvedSite(const std::string& building)
        : DatasetError("building '" + building + "' references a site with no weather data") {}
};
struct EmptyDataset : DatasetError {
    EmptyDataset() : DatasetError("dataset contains no usable buildings or meter readings") {}
};
struct NonMonotonicTimestamps : DatasetError {
    explicit NonMonotonicTimestamps(const std::string& series)
        : DatasetError("timestamps decrease within series: " + series) {}
};

struct RawSample {
    int64_t stamp_sec = 0;  // naive local seconds as read from file
    double value = 0;
};

struct MeterSeries {
    std::string building_id;
    MeterType meter_type = MeterType::electricity;
    // Grid form, valid once the owning dataset is aligned.
    std::vector<double> values;
    std::vector<uint8_t> mask;  // 1 = observed
    // Raw form, valid before alignment.
    std::vector<RawSample> raw;

    std::string series_id() const { return building_id + "/" + to_string(meter_type); }
};

struct RawWeatherRow {
    int64_t stamp_sec = 0;
    double temp = std::numeric_limits<double>::quiet_NaN();
    double humidity = std::numeric_limits<double>::quiet_NaN();
    double wind = std::numeric_limits<double>::quiet_NaN();
    double irradiance = std::numeric_limits<double>::quiet_NaN();
};

struct WeatherGrid {
    std::vector<double> air_temperature;
    std::vector<double> humidity;
    std::vector<double> wind_speed;
    std::vector<double> solar_irradiance;
};

struct EnergyDataset {
    std::vector<BuildingMetadata> buildings;
    std::map<std::string, WeatherGrid> weather;  // site_id -> grid over span
    std::map<std::string, std::vector<RawWeatherRow>> raw_weather;
    std::vector<MeterSeries> meters;
    int64_t span_start = 0;  // UTC epoch hour of grid slot 0
    int64_t span_hours = 0;
    bool aligned = false;

    const BuildingMetadata* find_building(const std::string& id) const {
        for (const auto& b : buildings)
            if (b.building_id == id) return &b;
        return nullptr;
    }
    const MeterSeries* find_series(const std::string& building, MeterType type) const {
        for (const auto& s : meters)
            if (s.building_id == building && s.meter_type == type) return &s;
        return nullptr;
    }
    MeterSeries* find_series(const std::string& building, MeterType type) {
        return const_cast<MeterSeries*>(
            static_cast<const EnergyDataset*>(this)->find_series(building, type));
    }
    timeutil::Zone zone_for(const BuildingMetadata& b) const {
        return timeutil::find_zone(b.timezone).value_or(timeutil::Zone{});
    }
};

struct LoadReport {
    int64_t dropped_rows = 0;
    std::map<std::string, int64_t> dropped_by_file;
    std::vector<std::string> warnings;
};

// ── CSV loading ─────────────────────────────────────────────────

namespace detail {

inline int require_column(const csv::Table& t, const std::string& name) {
    int c = t.column(name);
    if (c < 0) throw MissingColumn(name);
    return c;
}

inline std::string cell(const std::vector<std::string>& row, int col) {
    return col >= 0 && col < static_cast<int>(row.size()) ? row[static_cast<size_t>(col)] : "";
}

}  // namespace detail

// Reads the three CSV shapes (metadata, long-format weather, wide-format
// meters) into a raw dataset. Unparseable rows are dropped and counted.
inline EnergyDataset load_dataset(const std::string& metadata_path,
                                  const std::string& weather_path,
                                  const std::map<MeterType, std::string>& meter_paths,
                                  LoadReport& report) {
    EnergyDataset ds;

    {
        csv::Table t = csv::read_file(metadata_path);
        const int c_bid = detail::require_column(t, "building_id");
        const int c_site = detail::require_column(t, "site_id");
        const int c_sqft = detail::require_column(t, "sqft");
        const int c_year = detail::require_column(t, "yearbuilt");
        const int c_usage = detail::require_column(t, "primaryspaceusage");
        const int c_tz = detail::require_column(t, "timezone");
        for (const auto& row : t.rows) {
            BuildingMetadata b;
            b.building_id = trim(detail::cell(row, c_bid));
            b.site_id = trim(detail::cell(row, c_site));
            if (b.building_id.empty() || b.site_id.empty()) {
                ++report.dropped_rows;
                ++report.dropped_by_file[metadata_path];
                continue;
            }
            if (ds.find_building(b.building_id)) {
                ++report.dropped_rows;
                ++report.dropped_by_file[metadata_path];
                report.warnings.push_back("duplicate building_id dropped: " + b.building_id);
                continue;
            }
            if (auto v = parse_double(detail::cell(row, c_sqft)); v && *v > 0) b.sqft = *v;
            if (auto v = parse_int(detail::cell(row, c_year))) b.year_built = static_cast<int>(*v);
            b.primary_space_usage = trim(detail::cell(row, c_usage));
            b.timezone = trim(detail::cell(row, c_tz));
            if (!timeutil::find_zone(b.timezone))
                report.warnings.push_back("unknown timezone '" + b.timezone + "' for " +
                                          b.building_id + "; treating as UTC");
            ds.buildings.push_back(std::move(b));
        }
    }

    {
        csv::Table t = csv::read_file(weather_path);
        const int c_ts = detail::require_column(t, "timestamp");
        const int c_site = detail::require_column(t, "site_id");
        const int c_temp = detail::require_column(t, "airTemperature");
        const int c_hum = t.column("humidity");
        const int c_wind = t.column("windSpeed");
        const int c_irr = t.column("solarIrradiance");
        for (const auto& row : t.rows) {
            auto sec = timeutil::parse_timestamp_seconds(detail::cell(row, c_ts));
            std::string site(trim(detail::cell(row, c_site)));
            if (!sec || site.empty()) {
                ++report.dropped_rows;
                ++report.dropped_by_file[weather_path];
                continue;
            }
            RawWeatherRow w;
            w.stamp_sec = *sec;
            if (auto v = parse_double(detail::cell(row, c_temp))) w.temp = *v;
            if (auto v = parse_double(detail::cell(row, c_hum))) w.humidity = *v;
            if (auto v = parse_double(detail::cell(row, c_wind))) w.wind = *v;
            if (auto v = parse_double(detail::cell(row, c_irr))) w.irradiance = *v;
            ds.raw_weather[site].push_back(w);
        }
    }

    for (const auto& b : ds.buildings)
        if (!ds.raw_weather.count(b.site_id)) throw UnresolvedSite(b.building_id);

    for (const auto& [type, path] : meter_paths) {
        csv::Table t = csv::read_file(path);
        const int c_ts = detail::require_column(t, "timestamp");
        std::vector<std::pair<int, size_t>> columns;  // csv column -> meters index
        for (size_t c = 0; c < t.header.size(); ++c) {
            if (static_cast<int>(c) == c_ts) continue;
            const std::string bid(trim(t.header[c]));
            if (!ds.find_building(bid)) {
                report.warnings.push_back("meter column '" + bid + "' in " + path +
                                          " has no metadata; ignored");
                continue;
            }
            MeterSeries s;
            s.building_id = bid;
            s.meter_type = type;
            columns.emplace_back(static_cast<int>(c), ds.meters.size());
            ds.meters.push_back(std::move(s));
        }
        for (const auto& row : t.rows) {
            auto sec = timeutil::parse_timestamp_seconds(detail::cell(row, c_ts));
            if (!sec) {
                ++report.dropped_rows;
                ++report.dropped_by_file[path];
                continue;
            }
            for (auto& [c, idx] : columns) {
                if (auto v = parse_double(detail::cell(row, c)); v && std::isfinite(*v))
                    ds.meters[idx].raw.push_back({*sec, *v});
            }
        }
    }

    if (ds.buildings.empty() || ds.meters.empty()) throw EmptyDataset();
    return ds;
}

// ── Alignment ───────────────────────────────────────────────────

namespace detail {

// Average per bucket hour; the caller already mapped stamps to UTC hours.
inline std::map<int64_t, std::pair<double, int>>& accumulate(
    std::map<int64_t, std::pair<double, int>>& acc, int64_t hour, double v) {
    auto& slot = acc[hour];
    slot.first += v;
    slot.second += 1;
    return acc;
}

// Linear interpolation of interior NaN runs plus nearest-value extension at
// the edges. Leaves the vector untouched when it has no finite entries.
inline void fill_gaps_linear(std::vector<double>& v) {
    const size_t n = v.size();
    size_t first = n, last = n;
    for (size_t i = 0; i < n; ++i)
        if (std::isfinite(v[i])) {
            if (first == n) first = i;
            last = i;
        }
    if (first == n) return;
    for (size_t i = 0; i < first; ++i) v[i] = v[first];
    for (size_t i = last + 1; i < n; ++i) v[i] = v[last];
    size_t i = first;
    while (i <= last) {
        if (std::isfinite(v[i])) {
            ++i;
            continue;
        }
        size_t j = i;
        while (!std::isfinite(v[j])) ++j;
        const double lo = v[i - 1], hi = v[j];
        const double run = static_cast<double>(j - (i - 1));
        for (size_t k = i; k < j; ++k)
            v[k] = lo + (hi - lo) * static_cast<double>(k - (i - 1)) / run;
        i = j;
    }
}

}  // namespace detail

// Buckets every series onto one hourly UTC grid covering the union of meter
// readings. Sub-hourly values are averaged (all variables, irradiance
// included). Meter timestamps are treated as naive local time in the
// building's metadata timezone; weather timestamps as naive site-local
// time. Weather variables with at least one reading are completed over the
// span by linear interpolation so every building sees a full temperature
// grid; variables never observed for a site stay missing. Idempotent: an
// aligned dataset passes through unchanged.
inline EnergyDataset align_and_resample(const EnergyDataset& raw) {
    if (raw.aligned) return raw;
    EnergyDataset ds;
    ds.buildings = raw.buildings;

    std::map<std::string, timeutil::Zone> site_zone;
    for (const auto& b : ds.buildings)
        if (!site_zone.count(b.site_id)) site_zone[b.site_id] = raw.zone_for(b);

    // Meter samples to UTC hour buckets.
    struct Bucketed {
        const MeterSeries* src;
        std::map<int64_t, std::pair<double, int>> acc;
    };
    std::vector<Bucketed> bucketed;
    int64_t lo = std::numeric_limits<int64_t>::max();
    int64_t hi = std::numeric_limits<int64_t>::min();
    for (const auto& s : raw.meters) {
        const BuildingMetadata* b = raw.find_building(s.building_id);
        timeutil::Zone z = b ? raw.zone_for(*b) : timeutil::Zone{};
        Bucketed bk{&s, {}};
        int64_t prev = std::numeric_limits<int64_t>::min();
        for (const auto& sample : s.raw) {
            if (sample.stamp_sec < prev) throw NonMonotonicTimestamps(s.series_id());
            prev = sample.stamp_sec;
            const int64_t local_hour = timeutil::floor_div(sample.stamp_sec, 3600);
            const int64_t utc_hour = timeutil::utc_from_local(local_hour, z);
            detail::accumulate(bk.acc, utc_hour, sample.value);
            lo = std::min(lo, utc_hour);
            hi = std::max(hi, utc_hour);
        }
        bucketed.push_back(std::move(bk));
    }
    if (lo > hi) throw EmptyDataset();
    ds.span_start = lo;
    ds.span_hours = hi - lo + 1;

    for (auto& bk : bucketed) {
        MeterSeries s;
        s.building_id = bk.src->building_id;
        s.meter_type = bk.src->meter_type;
        s.values.assign(static_cast<size_t>(ds.span_hours),
                        std::numeric_limits<double>::quiet_NaN());
        s.mask.assign(static_cast<size_t>(ds.span_hours), 0);
        for (const auto& [hour, sum_count] : bk.acc) {
            const size_t i = static_cast<size_t>(hour - ds.span_start);
            s.values[i] = sum_count.first / sum_count.second;
            s.mask[i] = 1;
        }
        ds.meters.push_back(std::move(s));
    }

    // Weather to the same grid.
    for (const auto& [site, rows] : raw.raw_weather) {
        timeutil::Zone z = site_zone.count(site) ? site_zone[site] : timeutil::Zone{};
        std::map<int64_t, std::pair<double, int>> temp, hum, wind, irr;
        int64_t prev = std::numeric_limits<int64_t>::min();
        for (const auto& r : rows) {
            if (r.stamp_sec < prev) throw NonMonotonicTimestamps("weather/" + site);
            prev = r.stamp_sec;
            const int64_t local_hour = timeutil::floor_div(r.stamp_sec, 3600);
            const int64_t utc_hour = timeutil::utc_from_local(local_hour, z);
            if (std::isfinite(r.temp)) detail::accumulate(temp, utc_hour, r.temp);
            if (std::isfinite(r.humidity)) detail::accumulate(hum, utc_hour, r.humidity);
            if (std::isfinite(r.wind)) detail::accumulate(wind, utc_hour, r.wind);
            if (std::isfinite(r.irradiance)) detail::accumulate(irr, utc_hour, r.irradiance);
        }
        WeatherGrid g;
        auto to_grid = [&](const std::map<int64_t, std::pair<double, int>>& acc) {
            std::vector<double> v(static_cast<size_t>(ds.span_hours),
                                  std::numeric_limits<double>::quiet_NaN());
            for (const auto& [hour, sc] : acc) {
                if (hour < ds.span_start || hour >= ds.span_start + ds.span_hours) continue;
                v[static_cast<size_t>(hour - ds.span_start)] = sc.first / sc.second;
            }
            detail::fill_gaps_linear(v);
            return v;
        };
        g.air_temperature = to_grid(temp);
        g.humidity = to_grid(hum);
        g.wind_speed = to_grid(wind);
        g.solar_irradiance = to_grid(irr);
        ds.weather[site] = std::move(g);
    }

    ds.aligned = true;
    return ds;
}

// ── Missingness report ──────────────────────────────────────────

struct SeriesMissingness {
    std::string building_id;
    MeterType meter_type = MeterType::electricity;
    double missing_pct = 0;  // 0..100
    int64_t longest_gap = 0;
    int64_t missing_total = 0;
    std::array<int64_t, 24> gaps_by_hour_of_day{};  // local hour of day
};

inline std::vector<SeriesMissingness> missingness_report(const EnergyDataset& ds) {
    if (!ds.aligned) throw DatasetError("missingness_report requires an aligned dataset");
    std::vector<SeriesMissingness> out;
    for (const auto& s : ds.meters) {
        SeriesMissingness m;
        m.building_id = s.building_id;
        m.meter_type = s.meter_type;
        const BuildingMetadata* b = ds.find_building(s.building_id);
        timeutil::Zone z = b ? ds.zone_for(*b) : timeutil::Zone{};
        int64_t run = 0;
        for (size_t i = 0; i < s.mask.size(); ++i) {
            if (!s.mask[i]) {
                ++m.missing_total;
                ++run;
                const int64_t local = timeutil::local_from_utc(
                    ds.span_start + static_cast<int64_t>(i), z);
                ++m.gaps_by_hour_of_day[static_cast<size_t>(
                    timeutil::civil_from_hour(local).hour)];
            } else {
                m.longest_gap = std::max(m.longest_gap, run);
                run = 0;
            }
        }
        m.longest_gap = std::max(m.longest_gap, run);
        m.missing_pct =
            s.mask.empty() ? 0.0
                           : 100.0 * static_cast<double>(m.missing_total) /
                                 static_cast<double>(s.mask.size());
        out.push_back(std::move(m));
    }
    return out;
}

// ── Canonical on-disk dataset (JSON, schema 1) ──────────────────

inline nlohmann::ordered_json dataset_to_json(const EnergyDataset& ds) {
    if (!ds.aligned) throw DatasetError("only aligned datasets are serialized");
    nlohmann::ordered_json j;
    j["schema"] = 1;
    j["span"] = {{"start", timeutil::format_hour_iso(ds.span_start)},
                 {"hours", ds.span_hours}};
    auto& jb = j["buildings"] = nlohmann::ordered_json::array();
    for (const auto& b : ds.buildings) {
        nlohmann::ordered_json o;
        o["building_id"] = b.building_id;
        o["site_id"] = b.site_id;
        if (b.sqft) o["sqft"] = *b.sqft; else o["sqft"] = nullptr;
        if (b.year_built) o["year_built"] = *b.year_built; else o["year_built"] = nullptr;
        o["primary_space_usage"] = b.primary_space_usage;
        o["timezone"] = b.timezone;
        jb.push_back(std::move(o));
    }
    auto arr_or_null = [](const std::vector<double>& v) {
        nlohmann::ordered_json a = nlohmann::ordered_json::array();
        for (double x : v) {
            if (std::isfinite(x)) a.push_back(x); else a.push_back(nullptr);
        }
        return a;
    };
    auto& jw = j["weather"] = nlohmann::ordered_json::object();
    for (const auto& [site, g] : ds.weather) {
        nlohmann::ordered_json o;
        o["air_temperature"] = arr_or_null(g.air_temperature);
        o["humidity"] = arr_or_null(g.humidity);
        o["wind_speed"] = arr_or_null(g.wind_speed);
        o["solar_irradiance"] = arr_or_null(g.solar_irradiance);
        jw[site] = std::move(o);
    }
    auto& jm = j["meters"] = nlohmann::ordered_json::array();
    for (const auto& s : ds.meters) {
        nlohmann::ordered_json o;
        o["building_id"] = s.building_id;
        o["meter_type"] = to_string(s.meter_type);
        nlohmann::ordered_json a = nlohmann::ordered_json::array();
        for (size_t i = 0; i < s.values.size(); ++i) {
            if (s.mask[i]) a.push_back(s.values[i]); else a.push_back(nullptr);
        }
        o["values"] = std::move(a);
        jm.push_back(std::move(o));
    }
    return j;
}

inline EnergyDataset dataset_from_json(const nlohmann::json& j) {
    if (!j.contains("schema") || j["schema"].get<int>() != 1)
        throw DatasetError("unsupported dataset schema");
    EnergyDataset ds;
    auto start = timeutil::parse_timestamp_seconds(j["span"]["start"].get<std::string>());
    if (!start) throw DatasetError("bad span.start timestamp");
    ds.span_start = timeutil::floor_div(*start, 3600);
    ds.span_hours = j["span"]["hours"].get<int64_t>();
    for (const auto& o : j["buildings"]) {
        BuildingMetadata b;
        b.building_id = o["building_id"].get<std::string>();
        b.site_id = o["site_id"].get<std::string>();
        if (!o["sqft"].is_null()) b.sqft = o["sqft"].get<double>();
        if (!o["year_built"].is_null()) b.year_built = o["year_built"].get<int>();
        b.primary_space_usage = o["primary_space_usage"].get<std::string>();
        b.timezone = o["timezone"].get<std::string>();
        ds.buildings.push_back(std::move(b));
    }
    auto to_vec = [&](const nlohmann::json& a) {
        std::vector<double> v;
        v.reserve(a.size());
        for (const auto& x : a)
            v.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN()
                                    : x.get<double>());
        return v;
    };
    for (auto it = j["weather"].begin(); it != j["weather"].end(); ++it) {
        WeatherGrid g;
        g.air_temperature = to_vec((*it)["air_temperature"]);
        g.humidity = to_vec((*it)["humidity"]);
        g.wind_speed = to_vec((*it)["wind_speed"]);
        g.solar_irradiance = to_vec((*it)["solar_irradiance"]);
        ds.weather[it.key()] = std::move(g);
    }
    for (const auto& o : j["meters"]) {
        MeterSeries s;
        s.building_id = o["building_id"].get<std::string>();
        auto type = meter_type_from_string(o["meter_type"].get<std::string>());
        if (!type) throw DatasetError("unknown meter_type in dataset file");
        s.meter_type = *type;
        s.values = to_vec(o["values"]);
        s.mask.resize(s.values.size());
        for (size_t i = 0; i < s.values.size(); ++i)
            s.mask[i] = std::isfinite(s.values[i]) ? 1 : 0;
        ds.meters.push_back(std::move(s));
    }
    ds.aligned = true;
    return ds;
}

inline void save_dataset(const EnergyDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write dataset file: " + path);
    out << dataset_to_json(ds).dump(1) << "\n";
}

inline EnergyDataset load_dataset_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open dataset file: " + path);
    nlohmann::json j;
    in >> j;
    return dataset_from_json(j);
}

}  // namespace buildevo
