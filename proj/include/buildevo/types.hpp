#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace buildevo {

enum class MeterType {
    electricity,
    chilledwater,
    hotwater,
    steam,
    gas,
    solar,
    irrigation,
    water,
};

inline constexpr std::array<const char*, 8> kMeterTypeNames = {
    "electricity", "chilledwater", "hotwater", "steam",
    "gas",         "solar",        "irrigation", "water",
};

inline const char* to_string(MeterType t) { return kMeterTypeNames[static_cast<size_t>(t)]; }

inline std::optional<MeterType> meter_type_from_string(const std::string& s) {
    for (size_t i = 0; i < kMeterTypeNames.size(); ++i)
        if (s == kMeterTypeNames[i]) return static_cast<MeterType>(i);
    return std::nullopt;
}

struct BuildingMetadata {
    std::string building_id;
    std::string site_id;
    std::optional<double> sqft;  // > 0 when present
    std::optional<int> year_built;
    std::string primary_space_usage;
    std::string timezone;  // IANA name
};

// One hour of exogenous context as seen by a heuristic: weather plus
// calendar fields in the building's local time. NaN marks a missing
// weather variable.
struct ExogRow {
    double temp = std::numeric_limits<double>::quiet_NaN();
    double humidity = std::numeric_limits<double>::quiet_NaN();
    double wind = std::numeric_limits<double>::quiet_NaN();
    double irradiance = std::numeric_limits<double>::quiet_NaN();
    int hour = 0;   // 0..23, local
    int dow = 0;    // 0=Mon..6=Sun, local
    int month = 1;  // 1..12, local
    bool is_weekend = false;
};

// One evaluation instance: observed history, the true future, and the
// exogenous rows for both ranges. Future exogenous rows hold recorded
// actuals (perfect-foresight convention).
struct ForecastWindow {
    std::string building_id;
    MeterType meter_type = MeterType::electricity;
    int64_t start_hour = 0;  // UTC epoch hour of history[0]
    std::vector<double> history;
    std::vector<ExogRow> history_exog;
    std::vector<double> truth;
    std::vector<ExogRow> future_exog;

    std::string id() const {
        return building_id + "|" + to_string(meter_type) + "|" + std::to_string(start_hour);
    }
    size_t t_obs() const { return history.size(); }
    size_t t_pred() const { return truth.size(); }
};

}  // namespace buildevo
