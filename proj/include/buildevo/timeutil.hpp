#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "buildevo/common.hpp"

// Hour-resolution civil time over a proleptic Gregorian calendar, plus a
// small table of named timezone rules. The toolchain's libstdc++ predates
// chrono's tzdb, and depending on system zoneinfo files would make outputs
// vary by machine; a fixed rule table keeps runs reproducible. Offsets are
// whole hours, which covers every zone the datasets use; unknown zone names
// fall back to UTC and the caller reports a warning.

namespace buildevo::timeutil {

struct Civil {
    int year = 1970;
    int month = 1;  // 1..12
    int day = 1;    // 1..31
    int hour = 0;   // 0..23
};

// Days since 1970-01-01 (Hinnant's algorithm).
inline int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

inline void civil_from_days(int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t yr = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yr + (m <= 2));
}

inline int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b, r = a % b;
    return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

// Epoch hour = hours since 1970-01-01T00:00.
inline int64_t hour_from_civil(const Civil& c) {
    return days_from_civil(c.year, c.month, c.day) * 24 + c.hour;
}

inline Civil civil_from_hour(int64_t h) {
    Civil c;
    const int64_t days = floor_div(h, 24);
    c.hour = static_cast<int>(h - days * 24);
    civil_from_days(days, c.year, c.month, c.day);
    return c;
}

// 0 = Monday .. 6 = Sunday. 1970-01-01 was a Thursday.
inline int day_of_week(int64_t hour) {
    const int64_t days = floor_div(hour, 24);
    return static_cast<int>(((days % 7) + 7 + 3) % 7);
}

inline bool is_weekend(int64_t hour) {
    const int dow = day_of_week(hour);
    return dow == 5 || dow == 6;
}

// Nth weekday of a month, as days-since-epoch. weekday uses 0=Mon..6=Sun.
inline int64_t nth_weekday_of_month(int year, int month, int weekday, int n) {
    int64_t first = days_from_civil(year, month, 1);
    int first_dow = static_cast<int>(((first % 7) + 7 + 3) % 7);
    int offset = (weekday - first_dow + 7) % 7;
    return first + offset + static_cast<int64_t>(n - 1) * 7;
}

inline int64_t last_weekday_of_month(int year, int month, int weekday) {
    int next_month = month == 12 ? 1 : month + 1;
    int next_year = month == 12 ? year + 1 : year;
    int64_t last_day = days_from_civil(next_year, next_month, 1) - 1;
    int last_dow = static_cast<int>(((last_day % 7) + 7 + 3) % 7);
    return last_day - (last_dow - weekday + 7) % 7;
}

enum class DstRule { none, us, eu };

struct Zone {
    int std_offset_hours = 0;  // standard offset from UTC
    int dst_offset_hours = 0;  // offset while DST is in effect
    DstRule rule = DstRule::none;
};

// US rule (2007 onward): 2nd Sunday of March 02:00 local standard time
// through 1st Sunday of November 02:00 local daylight time.
// EU rule: last Sunday of March 01:00 UTC through last Sunday of October
// 01:00 UTC.
inline bool dst_active_utc(int64_t utc_hour, const Zone& z) {
    if (z.rule == DstRule::none) return false;
    int y, m, d;
    civil_from_days(floor_div(utc_hour, 24), y, m, d);
    if (z.rule == DstRule::us) {
        int64_t start = nth_weekday_of_month(y, 3, 6, 2) * 24 + 2 - z.std_offset_hours;
        int64_t end = nth_weekday_of_month(y, 11, 6, 1) * 24 + 2 - z.dst_offset_hours;
        return utc_hour >= start && utc_hour < end;
    }
    int64_t start = last_weekday_of_month(y, 3, 6) * 24 + 1;
    int64_t end = last_weekday_of_month(y, 10, 6) * 24 + 1;
    return utc_hour >= start && utc_hour < end;
}

inline std::optional<Zone> find_zone(std::string_view name) {
    struct Entry {
        const char* name;
        Zone zone;
    };
    static const Entry table[] = {
        {"UTC", {0, 0, DstRule::none}},
        {"Etc/UTC", {0, 0, DstRule::none}},
        {"GMT", {0, 0, DstRule::none}},
        {"Etc/GMT", {0, 0, DstRule::none}},
        {"US/Eastern", {-5, -4, DstRule::us}},
        {"America/New_York", {-5, -4, DstRule::us}},
        {"Canada/Eastern", {-5, -4, DstRule::us}},
        {"America/Toronto", {-5, -4, DstRule::us}},
        {"US/Central", {-6, -5, DstRule::us}},
        {"America/Chicago", {-6, -5, DstRule::us}},
        {"US/Mountain", {-7, -6, DstRule::us}},
        {"America/Denver", {-7, -6, DstRule::us}},
        {"US/Arizona", {-7, -7, DstRule::none}},
        {"America/Phoenix", {-7, -7, DstRule::none}},
        {"US/Pacific", {-8, -7, DstRule::us}},
        {"America/Los_Angeles", {-8, -7, DstRule::us}},
        {"US/Hawaii", {-10, -10, DstRule::none}},
        {"Europe/London", {0, 1, DstRule::eu}},
        {"Europe/Dublin", {0, 1, DstRule::eu}},
        {"Europe/Paris", {1, 2, DstRule::eu}},
        {"Europe/Berlin", {1, 2, DstRule::eu}},
    };
    for (const auto& e : table)
        if (name == e.name) return e.zone;
    // Etc/GMT+N and Etc/GMT-N, with POSIX's inverted sign convention.
    if (name.rfind("Etc/GMT", 0) == 0 && name.size() > 7) {
        std::string_view tail = name.substr(7);
        int sign = 1;
        if (tail.front() == '+') {
            tail.remove_prefix(1);
        } else if (tail.front() == '-') {
            sign = -1;
            tail.remove_prefix(1);
        }
        if (!tail.empty() && tail.front() >= '0' && tail.front() <= '9') {
            auto n = parse_int(tail);
            if (n && *n <= 14) {
                const int off = static_cast<int>(-sign * *n);
                return Zone{off, off, DstRule::none};
            }
        }
    }
    return std::nullopt;
}

inline int64_t local_from_utc(int64_t utc_hour, const Zone& z) {
    return utc_hour + (dst_active_utc(utc_hour, z) ? z.dst_offset_hours : z.std_offset_hours);
}

// Naive local hour -> UTC. During the fall-back overlap the earlier (DST)
// reading wins; during the spring-forward gap the standard offset is applied.
inline int64_t utc_from_local(int64_t local_hour, const Zone& z) {
    int64_t guess = local_hour - z.std_offset_hours;
    if (z.rule != DstRule::none && dst_active_utc(local_hour - z.dst_offset_hours, z))
        return local_hour - z.dst_offset_hours;
    return guess;
}

// "2016-01-31 05:00:00", "2016-01-31T05:00", "2016-01-31". Seconds and
// sub-hour parts must be zero for an hour-aligned parse; returns seconds.
inline std::optional<int64_t> parse_timestamp_seconds(std::string_view s) {
    const std::string t(trim(s));
    int y, mo, d, h = 0, mi = 0, se = 0;
    char sep = 0;
    int n = std::sscanf(t.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &se);
    if (n == 3) {
        h = mi = se = 0;
    } else if (n >= 6) {
        if (sep != ' ' && sep != 'T') return std::nullopt;
    } else {
        return std::nullopt;
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 ||
        se < 0 || se > 59)
        return std::nullopt;
    return (days_from_civil(y, mo, d) * 24 + h) * 3600 + mi * 60 + se;
}

inline std::string format_hour_iso(int64_t hour) {
    const Civil c = civil_from_hour(hour);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:00:00Z", c.year, c.month, c.day, c.hour);
    return buf;
}

}  // namespace buildevo::timeutil
