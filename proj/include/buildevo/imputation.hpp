#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "buildevo/dataset.hpp"
#include "buildevo/timeutil.hpp"
#include "buildevo/types.hpp"

// Four-tier gap filling: deterministic rules, a per-series ridge-damped
// least-squares model, scaled donor series, then interpolation. Observed
// values are never modified; every filled slot is recorded in the audit.
// "Originally observed" below always means the mask as it stood before any
// tier ran.

namespace buildevo {

enum class ImputeMethod { rule, model, donor, interpolation };

inline const char* to_string(ImputeMethod m) {
    switch (m) {
        case ImputeMethod::rule: return "rule";
        case ImputeMethod::model: return "model";
        case ImputeMethod::donor: return "donor";
        case ImputeMethod::interpolation: return "interpolation";
    }
    return "?";
}

struct AuditRecord {
    std::string building_id;
    MeterType meter_type = MeterType::electricity;
    int64_t hour = 0;  // UTC epoch hour
    ImputeMethod method = ImputeMethod::rule;
    double value = 0;
    std::string detail;  // e.g. "solar_night", "linear", "hour_of_week"
};

struct ImputationAudit {
    std::vector<AuditRecord> records;
    std::vector<std::string> warnings;
};

struct ImputationConfig {
    bool irrigation_winter_zero = false;  // zero irrigation meters in Dec-Feb
    std::set<int64_t> holidays;           // local epoch days; adds a model feature
};

struct InsufficientData : std::runtime_error {
    int64_t observed_count;
    explicit InsufficientData(int64_t n)
        : std::runtime_error("series has only " + std::to_string(n) +
                             " observed hours; need 168"),
          observed_count(n) {}
};

// Original masks keyed by series id, captured before any tier runs.
using MaskIndex = std::map<std::string, std::vector<uint8_t>>;

inline MaskIndex snapshot_masks(const EnergyDataset& ds) {
    MaskIndex idx;
    for (const auto& s : ds.meters) idx[s.series_id()] = s.mask;
    return idx;
}

// ── Feature construction ────────────────────────────────────────

struct FeatureInput {
    int hour = 0;   // local, 0-23
    int dow = 0;    // local, 0=Mon
    int month = 1;  // local, 1-12
    bool weekend = false;
    bool holiday = false;
    double temp = 0;
    double temp_lag1 = 0;
    double temp_lag24 = 0;
};

struct FeatureSpec {
    std::vector<std::string> usage_categories;  // sorted unique
    bool use_holiday = false;

    size_t dim() const { return 14 + usage_categories.size() + (use_holiday ? 1 : 0); }
};

inline FeatureSpec make_feature_spec(const EnergyDataset& ds, bool use_holiday = false) {
    FeatureSpec spec;
    std::set<std::string> cats;
    for (const auto& b : ds.buildings) cats.insert(b.primary_space_usage);
    spec.usage_categories.assign(cats.begin(), cats.end());
    spec.use_holiday = use_holiday;
    return spec;
}

inline std::vector<double> build_features(const FeatureSpec& spec, const FeatureInput& in,
                                          const BuildingMetadata& meta) {
    constexpr double kTau = 6.283185307179586476925286766559;
    auto finite_or_zero = [](double v) { return std::isfinite(v) ? v : 0.0; };
    const double temp = finite_or_zero(in.temp);
    std::vector<double> f;
    f.reserve(spec.dim());
    f.push_back(std::sin(kTau * in.hour / 24.0));
    f.push_back(std::cos(kTau * in.hour / 24.0));
    f.push_back(std::sin(kTau * in.dow / 7.0));
    f.push_back(std::cos(kTau * in.dow / 7.0));
    f.push_back(std::sin(kTau * (in.month - 1) / 12.0));
    f.push_back(std::cos(kTau * (in.month - 1) / 12.0));
    f.push_back(in.weekend ? 1.0 : 0.0);
    f.push_back(temp);
    f.push_back(finite_or_zero(in.temp_lag1));
    f.push_back(finite_or_zero(in.temp_lag24));
    f.push_back(std::max(0.0, 18.0 - temp));
    f.push_back(std::max(0.0, temp - 18.0));
    f.push_back(meta.sqft ? *meta.sqft : 0.0);
    for (const auto& cat : spec.usage_categories)
        f.push_back(meta.primary_space_usage == cat ? 1.0 : 0.0);
    if (spec.use_holiday) f.push_back(in.holiday ? 1.0 : 0.0);
    f.push_back(1.0);  // intercept
    return f;
}

// Reads a holiday list, one YYYY-MM-DD date per line; '#' comments allowed.
inline std::set<int64_t> load_holiday_dates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError("cannot open holiday file: " + path);
    std::set<int64_t> days;
    std::string line;
    while (std::getline(in, line)) {
        const std::string t(trim(line));
        if (t.empty() || t[0] == '#') continue;
        auto sec = timeutil::parse_timestamp_seconds(t);
        if (sec) days.insert(timeutil::floor_div(*sec, 86400));
    }
    return days;
}

namespace detail {

// FeatureInput for one grid slot of one building's site, in local time.
inline FeatureInput slot_features(const EnergyDataset& ds, const BuildingMetadata& meta,
                                  const ImputationConfig& cfg, int64_t slot) {
    const timeutil::Zone z = ds.zone_for(meta);
    const int64_t utc_hour = ds.span_start + slot;
    const int64_t local = timeutil::local_from_utc(utc_hour, z);
    const timeutil::Civil c = timeutil::civil_from_hour(local);
    FeatureInput in;
    in.hour = c.hour;
    in.dow = timeutil::day_of_week(local);
    in.month = c.month;
    in.weekend = timeutil::is_weekend(local);
    in.holiday = cfg.holidays.count(timeutil::floor_div(local, 24)) > 0;
    auto wi = ds.weather.find(meta.site_id);
    if (wi != ds.weather.end()) {
        const auto& temp = wi->second.air_temperature;
        auto at = [&](int64_t i) {
            if (temp.empty()) return std::numeric_limits<double>::quiet_NaN();
            i = std::clamp<int64_t>(i, 0, static_cast<int64_t>(temp.size()) - 1);
            return temp[static_cast<size_t>(i)];
        };
        in.temp = at(slot);
        in.temp_lag1 = at(slot - 1);
        in.temp_lag24 = at(slot - 24);
    }
    return in;
}

}  // namespace detail

// ── Tier 1: rules ───────────────────────────────────────────────

// Drops never-observed series; zero-fills solar meters at night (irradiance
// <= 0, or local hour outside [06:00, 20:00) when irradiance is missing) and,
// when configured, irrigation meters in December-February.
inline void impute_rules(EnergyDataset& ds, const ImputationConfig& cfg,
                         ImputationAudit& audit) {
    for (auto it = ds.meters.begin(); it != ds.meters.end();) {
        const bool any = std::any_of(it->mask.begin(), it->mask.end(),
                                     [](uint8_t m) { return m != 0; });
        if (!any) {
            audit.warnings.push_back("dropped all-missing series " + it->series_id());
            it = ds.meters.erase(it);
        } else {
            ++it;
        }
    }
    for (auto& s : ds.meters) {
        const bool solar = s.meter_type == MeterType::solar;
        const bool irrigation = s.meter_type == MeterType::irrigation;
        if (!solar && !(irrigation && cfg.irrigation_winter_zero)) continue;
        const BuildingMetadata* meta = ds.find_building(s.building_id);
        if (!meta) continue;
        const timeutil::Zone z = ds.zone_for(*meta);
        const std::vector<double>* irr = nullptr;
        if (auto wi = ds.weather.find(meta->site_id); wi != ds.weather.end())
            irr = &wi->second.solar_irradiance;
        for (size_t i = 0; i < s.mask.size(); ++i) {
            if (s.mask[i]) continue;
            const int64_t local =
                timeutil::local_from_utc(ds.span_start + static_cast<int64_t>(i), z);
            const timeutil::Civil c = timeutil::civil_from_hour(local);
            bool fill = false;
            std::string detail;
            if (solar) {
                const double g =
                    irr && i < irr->size() ? (*irr)[i] : std::numeric_limits<double>::quiet_NaN();
                if (std::isfinite(g) ? g <= 0.0 : (c.hour < 6 || c.hour >= 20)) {
                    fill = true;
                    detail = "solar_night";
                }
            } else if (c.month == 12 || c.month <= 2) {
                fill = true;
                detail = "irrigation_winter";
            }
            if (fill) {
                s.values[i] = 0.0;
                s.mask[i] = 1;
                audit.records.push_back({s.building_id, s.meter_type,
                                         ds.span_start + static_cast<int64_t>(i),
                                         ImputeMethod::rule, 0.0, detail});
            }
        }
    }
}

// ── Tier 2: per-series model ────────────────────────────────────

struct LinearModel {
    std::vector<double> weights;

    double predict(const std::vector<double>& features) const {
        double y = 0;
        for (size_t i = 0; i < weights.size(); ++i) y += weights[i] * features[i];
        return y;
    }
};

// Closed-form least squares with ridge damping 1e-6, trained on the slots
// flagged in train_mask only.
inline LinearModel fit_imputation_model(const EnergyDataset& ds,
                                        const std::string& building_id, MeterType type,
                                        const std::vector<uint8_t>& train_mask,
                                        const FeatureSpec& spec,
                                        const ImputationConfig& cfg = {}) {
    const MeterSeries* s = ds.find_series(building_id, type);
    const BuildingMetadata* meta = ds.find_building(building_id);
    if (!s || !meta) throw DatasetError("unknown series " + building_id);
    int64_t observed = 0;
    for (size_t i = 0; i < train_mask.size() && i < s->values.size(); ++i)
        if (train_mask[i]) ++observed;
    if (observed < 168) throw InsufficientData(observed);

    const size_t d = spec.dim();
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                                static_cast<Eigen::Index>(d));
    Eigen::VectorXd aty = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (size_t i = 0; i < train_mask.size() && i < s->values.size(); ++i) {
        if (!train_mask[i]) continue;
        const auto f =
            build_features(spec, detail::slot_features(ds, *meta, cfg,
                                                       static_cast<int64_t>(i)),
                           *meta);
        Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(d));
        ata.noalias() += fv * fv.transpose();
        aty.noalias() += fv * s->values[i];
    }
    ata.diagonal().array() += 1e-6;
    Eigen::VectorXd w = ata.ldlt().solve(aty);
    LinearModel model;
    model.weights.assign(w.data(), w.data() + w.size());
    return model;
}

// Fills remaining gaps with model predictions clamped to [0, 3x observed
// max]. Series whose fit fails fall through untouched.
inline void impute_model(EnergyDataset& ds, const MaskIndex& original,
                         const FeatureSpec& spec, const ImputationConfig& cfg,
                         ImputationAudit& audit) {
    for (auto& s : ds.meters) {
        auto oi = original.find(s.series_id());
        const std::vector<uint8_t>& omask = oi != original.end() ? oi->second : s.mask;
        const BuildingMetadata* meta = ds.find_building(s.building_id);
        if (!meta) continue;
        LinearModel model;
        try {
            model = fit_imputation_model(ds, s.building_id, s.meter_type, omask, spec, cfg);
        } catch (const InsufficientData&) {
            continue;
        }
        double omax = 0;
        for (size_t i = 0; i < s.values.size(); ++i)
            if (i < omask.size() && omask[i]) omax = std::max(omax, s.values[i]);
        const double hi = 3.0 * omax;
        for (size_t i = 0; i < s.mask.size(); ++i) {
            if (s.mask[i]) continue;
            const auto f = build_features(
                spec, detail::slot_features(ds, *meta, cfg, static_cast<int64_t>(i)),
                *meta);
            const double raw = model.predict(f);
            const double v =
                std::isfinite(raw) ? std::min(std::max(raw, 0.0), hi) : 0.0;
            s.values[i] = v;
            s.mask[i] = 1;
            audit.records.push_back({s.building_id, s.meter_type,
                                     ds.span_start + static_cast<int64_t>(i),
                                     ImputeMethod::model, v, ""});
        }
    }
}

// ── Tier 3: donor series ────────────────────────────────────────

// Donor candidates share meter type, primary_space_usage, and site; ranked by
// |log(sqft ratio)| (missing sqft ranks last), tie-broken by building id. A
// candidate is usable once it shares >= 24 originally observed hours with the
// target and has positive mean there; each gap slot takes the best-ranked
// candidate originally observed at that slot, scaled by mean_target/mean_donor.
inline void impute_donor(EnergyDataset& ds, const MaskIndex& original,
                         ImputationAudit& audit) {
    auto omask_of = [&](const MeterSeries& s) -> const std::vector<uint8_t>& {
        auto it = original.find(s.series_id());
        return it != original.end() ? it->second : s.mask;
    };
    for (auto& target : ds.meters) {
        if (std::all_of(target.mask.begin(), target.mask.end(),
                        [](uint8_t m) { return m != 0; }))
            continue;
        const BuildingMetadata* tm = ds.find_building(target.building_id);
        if (!tm) continue;
        const std::vector<uint8_t>& t_omask = omask_of(target);

        struct Candidate {
            double distance;
            const MeterSeries* series;
            const std::vector<uint8_t>* omask;
            std::optional<double> scale;  // lazily computed; nullopt = untried
            bool usable = true;
        };
        std::vector<Candidate> cands;
        for (const auto& d : ds.meters) {
            if (&d == &target || d.meter_type != target.meter_type) continue;
            const BuildingMetadata* dm = ds.find_building(d.building_id);
            if (!dm || dm->site_id != tm->site_id ||
                dm->primary_space_usage != tm->primary_space_usage)
                continue;
            double dist = std::numeric_limits<double>::infinity();
            if (tm->sqft && dm->sqft && *tm->sqft > 0 && *dm->sqft > 0)
                dist = std::abs(std::log(*tm->sqft / *dm->sqft));
            cands.push_back({dist, &d, &omask_of(d), std::nullopt, true});
        }
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            if (a.distance != b.distance) return a.distance < b.distance;
            return a.series->building_id < b.series->building_id;
        });

        auto scale_of = [&](Candidate& c) -> std::optional<double> {
            if (c.scale || !c.usable) return c.scale;
            double ts = 0, dsum = 0;
            int64_t joint = 0;
            const size_t n = std::min(target.values.size(), c.series->values.size());
            for (size_t i = 0; i < n; ++i) {
                if (i < t_omask.size() && t_omask[i] && i < c.omask->size() &&
                    (*c.omask)[i]) {
                    ts += target.values[i];
                    dsum += c.series->values[i];
                    ++joint;
                }
            }
            if (joint < 24 || dsum <= 0) {
                c.usable = false;
                return std::nullopt;
            }
            c.scale = ts / dsum;  // == mean_target / mean_donor over joint hours
            return c.scale;
        };

        for (size_t i = 0; i < target.mask.size(); ++i) {
            if (target.mask[i]) continue;
            for (auto& c : cands) {
                if (i >= c.omask->size() || !(*c.omask)[i]) continue;
                auto scale = scale_of(c);
                if (!scale) continue;
                const double v = c.series->values[i] * *scale;
                target.values[i] = v;
                target.mask[i] = 1;
                audit.records.push_back({target.building_id, target.meter_type,
                                         ds.span_start + static_cast<int64_t>(i),
                                         ImputeMethod::donor, v,
                                         c.series->building_id});
                break;
            }
        }
    }
}

// ── Tier 4: interpolation ───────────────────────────────────────

// Gaps of <= 2 hours with observed values on both sides are linearly
// interpolated; everything else falls back to the per-(local hour-of-week)
// mean of originally observed values, then to the overall observed mean.
inline void impute_interpolate(EnergyDataset& ds, const MaskIndex& original,
                               ImputationAudit& audit) {
    for (auto& s : ds.meters) {
        const std::vector<uint8_t> entry_mask = s.mask;  // fills must not chain
        auto oi = original.find(s.series_id());
        const std::vector<uint8_t>& omask = oi != original.end() ? oi->second : entry_mask;
        const BuildingMetadata* meta = ds.find_building(s.building_id);
        const timeutil::Zone z = meta ? ds.zone_for(*meta) : timeutil::Zone{};

        std::array<double, 168> how_sum{};
        std::array<int64_t, 168> how_n{};
        double all_sum = 0;
        int64_t all_n = 0;
        for (size_t i = 0; i < s.values.size(); ++i) {
            if (i >= omask.size() || !omask[i]) continue;
            const int64_t local =
                timeutil::local_from_utc(ds.span_start + static_cast<int64_t>(i), z);
            const int how =
                timeutil::day_of_week(local) * 24 + timeutil::civil_from_hour(local).hour;
            how_sum[static_cast<size_t>(how)] += s.values[i];
            ++how_n[static_cast<size_t>(how)];
            all_sum += s.values[i];
            ++all_n;
        }
        const double fallback = all_n ? all_sum / static_cast<double>(all_n) : 0.0;

        size_t i = 0;
        const size_t n = entry_mask.size();
        while (i < n) {
            if (entry_mask[i]) {
                ++i;
                continue;
            }
            size_t j = i;
            while (j < n && !entry_mask[j]) ++j;
            const size_t len = j - i;
            const bool linear = len <= 2 && i > 0 && j < n;
            for (size_t k = i; k < j; ++k) {
                double v;
                std::string detail;
                if (linear) {
                    const double lo = s.values[i - 1], hi = s.values[j];
                    v = lo + (hi - lo) * static_cast<double>(k - (i - 1)) /
                                 static_cast<double>(len + 1);
                    detail = "linear";
                } else {
                    const int64_t local = timeutil::local_from_utc(
                        ds.span_start + static_cast<int64_t>(k), z);
                    const int how = timeutil::day_of_week(local) * 24 +
                                    timeutil::civil_from_hour(local).hour;
                    v = how_n[static_cast<size_t>(how)]
                            ? how_sum[static_cast<size_t>(how)] /
                                  static_cast<double>(how_n[static_cast<size_t>(how)])
                            : fallback;
                    detail = "hour_of_week";
                }
                s.values[k] = v;
                s.mask[k] = 1;
                audit.records.push_back({s.building_id, s.meter_type,
                                         ds.span_start + static_cast<int64_t>(k),
                                         ImputeMethod::interpolation, v, detail});
            }
            i = j;
        }
    }
}

// ── Pipeline ────────────────────────────────────────────────────

inline std::pair<EnergyDataset, ImputationAudit> impute_all(
    const EnergyDataset& input, const ImputationConfig& cfg = {}) {
    if (!input.aligned) throw DatasetError("impute_all requires an aligned dataset");
    EnergyDataset ds = input;
    ImputationAudit audit;
    const MaskIndex original = snapshot_masks(ds);
    const FeatureSpec spec = make_feature_spec(ds, !cfg.holidays.empty());
    impute_rules(ds, cfg, audit);
    impute_model(ds, original, spec, cfg, audit);
    impute_donor(ds, original, audit);
    impute_interpolate(ds, original, audit);
    for (const auto& s : ds.meters)
        for (uint8_t m : s.mask)
            if (!m) {
                audit.warnings.push_back("series " + s.series_id() +
                                         " still has missing slots");
                break;
            }
    std::sort(audit.records.begin(), audit.records.end(),
              [](const AuditRecord& a, const AuditRecord& b) {
                  if (a.building_id != b.building_id) return a.building_id < b.building_id;
                  if (a.meter_type != b.meter_type) return a.meter_type < b.meter_type;
                  return a.hour < b.hour;
              });
    return {std::move(ds), std::move(audit)};
}

}  // namespace buildevo
