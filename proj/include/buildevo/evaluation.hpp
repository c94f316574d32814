#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "buildevo/dataset.hpp"
#include "buildevo/dsl/eval.hpp"
#include "buildevo/imputation.hpp"
#include "buildevo/types.hpp"

// Forecasting tasks and scoring. Windows are cut chronologically per series:
// the first floor(train_frac * L) hours feed training windows, the rest test
// windows, and no window straddles the split. Future exogenous rows carry
// recorded actuals (perfect-foresight convention). The objective J pools
// errors over all successful windows; a heuristic failing on more than
// fail_threshold of its windows is non-executable and gets J = +inf.

namespace buildevo {

struct LengthMismatch : std::runtime_error {
    LengthMismatch() : std::runtime_error("truth and prediction lengths differ") {}
};
struct SeriesTooShort : std::runtime_error {
    std::string building_id;
    MeterType meter_type;
    SeriesTooShort(std::string b, MeterType t)
        : std::runtime_error("series " + b + "/" + to_string(t) +
                             " is too short for the window configuration"),
          building_id(std::move(b)),
          meter_type(t) {}
};
struct UnknownBaseline : std::runtime_error {
    explicit UnknownBaseline(const std::string& name)
        : std::runtime_error("unknown baseline: " + name) {}
};

// ── Metrics ─────────────────────────────────────────────────────

inline constexpr double kMapeZeroCutoff = 1e-6;

namespace detail {

// Pooled error sums; metrics derive from these so window order is irrelevant.
struct Pooled {
    double se = 0;   // squared error
    double ae = 0;   // absolute error
    double pe = 0;   // relative error over |truth| > cutoff
    int64_t n = 0;   // pairs
    int64_t np = 0;  // pairs entering mape

    void add(double truth, double pred) {
        const double d = truth - pred;
        se += d * d;
        ae += std::abs(d);
        ++n;
        if (std::abs(truth) > kMapeZeroCutoff) {
            pe += std::abs(d) / std::abs(truth);
            ++np;
        }
    }
    void merge(const Pooled& o) {
        se += o.se;
        ae += o.ae;
        pe += o.pe;
        n += o.n;
        np += o.np;
    }
    double rmse() const { return n ? std::sqrt(se / static_cast<double>(n)) : 0.0; }
    double mae() const { return n ? ae / static_cast<double>(n) : 0.0; }
    double mape() const { return np ? 100.0 * pe / static_cast<double>(np) : 0.0; }
};

}  // namespace detail

inline double rmse(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != pred.size() || truth.empty()) throw LengthMismatch();
    detail::Pooled p;
    for (size_t i = 0; i < truth.size(); ++i) p.add(truth[i], pred[i]);
    return p.rmse();
}

inline double mae(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != pred.size() || truth.empty()) throw LengthMismatch();
    detail::Pooled p;
    for (size_t i = 0; i < truth.size(); ++i) p.add(truth[i], pred[i]);
    return p.mae();
}

inline double mape(const std::vector<double>& truth, const std::vector<double>& pred) {
    if (truth.size() != pred.size() || truth.empty()) throw LengthMismatch();
    detail::Pooled p;
    for (size_t i = 0; i < truth.size(); ++i) p.add(truth[i], pred[i]);
    return p.mape();
}

enum class Objective { rmse, mae, mape };

inline const char* to_string(Objective o) {
    switch (o) {
        case Objective::rmse: return "rmse";
        case Objective::mae: return "mae";
        case Objective::mape: return "mape";
    }
    return "?";
}

inline std::optional<Objective> objective_from_string(std::string_view s) {
    if (s == "rmse") return Objective::rmse;
    if (s == "mae") return Objective::mae;
    if (s == "mape") return Objective::mape;
    return std::nullopt;
}

// ── Window construction ─────────────────────────────────────────

struct WindowConfig {
    int64_t t_obs = 168;
    int64_t t_pred = 24;
    int64_t stride = 24;
    double train_frac = 0.8;
};

struct WindowSet {
    std::vector<ForecastWindow> train;
    std::vector<ForecastWindow> test;
};

namespace detail {

inline ExogRow make_exog_row(const EnergyDataset& ds, const BuildingMetadata& meta,
                             const timeutil::Zone& z, int64_t slot) {
    ExogRow r;
    const int64_t local = timeutil::local_from_utc(ds.span_start + slot, z);
    const timeutil::Civil c = timeutil::civil_from_hour(local);
    r.hour = c.hour;
    r.dow = timeutil::day_of_week(local);
    r.month = c.month;
    r.is_weekend = timeutil::is_weekend(local);
    if (auto wi = ds.weather.find(meta.site_id); wi != ds.weather.end()) {
        const WeatherGrid& g = wi->second;
        auto at = [&](const std::vector<double>& v) {
            return static_cast<size_t>(slot) < v.size()
                       ? v[static_cast<size_t>(slot)]
                       : std::numeric_limits<double>::quiet_NaN();
        };
        r.temp = at(g.air_temperature);
        r.humidity = at(g.humidity);
        r.wind = at(g.wind_speed);
        r.irradiance = at(g.solar_irradiance);
    }
    return r;
}

}  // namespace detail

inline WindowSet make_windows(const EnergyDataset& ds, const WindowConfig& cfg) {
    if (!ds.aligned) throw DatasetError("make_windows requires an aligned dataset");
    if (!(cfg.train_frac > 0 && cfg.train_frac < 1))
        throw DatasetError("train_frac must be in (0, 1)");
    WindowSet out;
    const int64_t need = cfg.t_obs + cfg.t_pred;
    for (const auto& s : ds.meters) {
        const BuildingMetadata* meta = ds.find_building(s.building_id);
        if (!meta) continue;
        const timeutil::Zone z = ds.zone_for(*meta);
        const int64_t len = static_cast<int64_t>(s.values.size());
        const int64_t split = static_cast<int64_t>(
            std::floor(cfg.train_frac * static_cast<double>(len)));
        const auto cut = [&](int64_t begin, int64_t end, std::vector<ForecastWindow>& dst) {
            const int64_t plen = end - begin;
            if (plen < need) throw SeriesTooShort(s.building_id, s.meter_type);
            const int64_t count = (plen - need) / cfg.stride + 1;
            for (int64_t wi = 0; wi < count; ++wi) {
                const int64_t start = begin + wi * cfg.stride;
                ForecastWindow w;
                w.building_id = s.building_id;
                w.meter_type = s.meter_type;
                w.start_hour = ds.span_start + start;
                for (int64_t i = 0; i < cfg.t_obs; ++i) {
                    w.history.push_back(s.values[static_cast<size_t>(start + i)]);
                    w.history_exog.push_back(detail::make_exog_row(ds, *meta, z, start + i));
                }
                for (int64_t i = 0; i < cfg.t_pred; ++i) {
                    const int64_t slot = start + cfg.t_obs + i;
                    w.truth.push_back(s.values[static_cast<size_t>(slot)]);
                    w.future_exog.push_back(detail::make_exog_row(ds, *meta, z, slot));
                }
                dst.push_back(std::move(w));
            }
        };
        cut(0, split, out.train);
        cut(split, len, out.test);
    }
    return out;
}

// ── Scoring ─────────────────────────────────────────────────────

struct BuildingMetrics {
    double rmse = 0;
    double mae = 0;
    double mape = 0;
};

struct EvaluationResult {
    double J = std::numeric_limits<double>::infinity();
    double rmse = 0;
    double mae = 0;
    double mape = 0;
    int64_t windows_total = 0;
    int64_t windows_failed = 0;
    std::map<std::string, BuildingMetrics> per_building;

    bool executable() const { return std::isfinite(J); }
};

struct ObjectiveConfig {
    Objective objective = Objective::rmse;
    double fail_threshold = 0.1;
};

using MetadataIndex = std::map<std::string, BuildingMetadata>;

inline MetadataIndex metadata_index(const EnergyDataset& ds) {
    MetadataIndex idx;
    for (const auto& b : ds.buildings) idx[b.building_id] = b;
    return idx;
}

inline EvaluationResult score_heuristic(const dsl::Program& program,
                                        const std::vector<ForecastWindow>& windows,
                                        const MetadataIndex& metadata,
                                        const ObjectiveConfig& cfg = {},
                                        unsigned threads = 1) {
    struct PerWindow {
        detail::Pooled pooled;
        bool failed = false;
    };
    std::vector<PerWindow> results(windows.size());
    auto run_range = [&](size_t begin, size_t end) {
        static const BuildingMetadata kNoMeta{};
        for (size_t i = begin; i < end; ++i) {
            const ForecastWindow& w = windows[i];
            auto mi = metadata.find(w.building_id);
            const BuildingMetadata& meta = mi != metadata.end() ? mi->second : kNoMeta;
            const dsl::EvalOutcome out = dsl::evaluate(program, w, meta);
            if (!out.ok()) {
                results[i].failed = true;
                continue;
            }
            for (size_t t = 0; t < w.truth.size(); ++t)
                results[i].pooled.add(w.truth[t], out.predictions[t]);
        }
    };
    if (threads <= 1 || windows.size() < 2) {
        run_range(0, windows.size());
    } else {
        const size_t nt = std::min<size_t>(threads, windows.size());
        std::vector<std::thread> pool;
        const size_t chunk = (windows.size() + nt - 1) / nt;
        for (size_t t = 0; t < nt; ++t) {
            const size_t b = t * chunk;
            const size_t e = std::min(windows.size(), b + chunk);
            if (b < e) pool.emplace_back(run_range, b, e);
        }
        for (auto& th : pool) th.join();
    }

    // Reduction in window-index order keeps results independent of threading.
    EvaluationResult r;
    detail::Pooled total;
    std::map<std::string, detail::Pooled> per_building;
    r.windows_total = static_cast<int64_t>(windows.size());
    for (size_t i = 0; i < windows.size(); ++i) {
        if (results[i].failed) {
            ++r.windows_failed;
            continue;
        }
        total.merge(results[i].pooled);
        per_building[windows[i].building_id].merge(results[i].pooled);
    }
    r.rmse = total.rmse();
    r.mae = total.mae();
    r.mape = total.mape();
    for (const auto& [bid, p] : per_building)
        r.per_building[bid] = {p.rmse(), p.mae(), p.mape()};

    const bool non_executable =
        r.windows_total == 0 ||
        static_cast<double>(r.windows_failed) / static_cast<double>(r.windows_total) >
            cfg.fail_threshold;
    if (non_executable) {
        r.J = std::numeric_limits<double>::infinity();
    } else {
        switch (cfg.objective) {
            case Objective::rmse: r.J = r.rmse; break;
            case Objective::mae: r.J = r.mae; break;
            case Objective::mape: r.J = r.mape; break;
        }
    }
    return r;
}

// ── Baselines ───────────────────────────────────────────────────

enum class Baseline {
    persistence,
    seasonal_naive_24,
    seasonal_naive_168,
    global_mean,
    linear_regression,
};

inline std::optional<Baseline> baseline_from_string(std::string_view s) {
    if (s == "persistence") return Baseline::persistence;
    if (s == "seasonal_naive_24") return Baseline::seasonal_naive_24;
    if (s == "seasonal_naive_168") return Baseline::seasonal_naive_168;
    if (s == "global_mean") return Baseline::global_mean;
    if (s == "linear_regression") return Baseline::linear_regression;
    return std::nullopt;
}

inline const char* to_string(Baseline b) {
    switch (b) {
        case Baseline::persistence: return "persistence";
        case Baseline::seasonal_naive_24: return "seasonal_naive_24";
        case Baseline::seasonal_naive_168: return "seasonal_naive_168";
        case Baseline::global_mean: return "global_mean";
        case Baseline::linear_regression: return "linear_regression";
    }
    return "?";
}

// DSL text for the program-form baselines. linear_regression has no program
// form; use score_linear_regression instead.
inline std::string baseline_program(Baseline b) {
    switch (b) {
        case Baseline::persistence: return "segment base { lag(1) }";
        case Baseline::seasonal_naive_24: return "segment base { lag(24) }";
        case Baseline::seasonal_naive_168: return "segment base { lag(168) }";
        case Baseline::global_mean: return "segment base { roll_mean(1000000) }";
        case Baseline::linear_regression: break;
    }
    throw UnknownBaseline("linear_regression has no program form");
}

namespace detail {

// Features for forecast step t (1-based) of a window; temperature lags walk
// back through the combined history+future exogenous rows.
inline FeatureInput window_features(const ForecastWindow& w, int64_t t) {
    const int64_t t_obs = static_cast<int64_t>(w.history_exog.size());
    auto temp_at = [&](int64_t p) {  // 1-based position over both ranges
        if (p < 1) p = 1;
        if (p <= t_obs) return w.history_exog[static_cast<size_t>(p - 1)].temp;
        const size_t i = static_cast<size_t>(p - t_obs - 1);
        return i < w.future_exog.size() ? w.future_exog[i].temp
                                        : std::numeric_limits<double>::quiet_NaN();
    };
    const ExogRow& row = w.future_exog[static_cast<size_t>(t - 1)];
    FeatureInput in;
    in.hour = row.hour;
    in.dow = row.dow;
    in.month = row.month;
    in.weekend = row.is_weekend;
    in.temp = row.temp;
    in.temp_lag1 = temp_at(t_obs + t - 1);
    in.temp_lag24 = temp_at(t_obs + t - 24);
    return in;
}

}  // namespace detail

// Ordinary least squares (ridge damping 1e-6) over the shared feature
// vector, fit on train windows and scored on test windows. Reported beside
// the evolved population, never inside it.
inline EvaluationResult score_linear_regression(const std::vector<ForecastWindow>& train,
                                                const std::vector<ForecastWindow>& test,
                                                const MetadataIndex& metadata,
                                                const FeatureSpec& spec,
                                                const ObjectiveConfig& cfg = {}) {
    static const BuildingMetadata kNoMeta{};
    auto meta_of = [&](const std::string& id) -> const BuildingMetadata& {
        auto it = metadata.find(id);
        return it != metadata.end() ? it->second : kNoMeta;
    };
    const size_t d = spec.dim();
    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                                static_cast<Eigen::Index>(d));
    Eigen::VectorXd aty = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (const auto& w : train) {
        const BuildingMetadata& meta = meta_of(w.building_id);
        for (size_t t = 1; t <= w.truth.size(); ++t) {
            const auto f = build_features(
                spec, detail::window_features(w, static_cast<int64_t>(t)), meta);
            Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(d));
            ata.noalias() += fv * fv.transpose();
            aty.noalias() += fv * w.truth[t - 1];
        }
    }
    ata.diagonal().array() += 1e-6;
    const Eigen::VectorXd weights = ata.ldlt().solve(aty);

    EvaluationResult r;
    detail::Pooled total;
    std::map<std::string, detail::Pooled> per_building;
    r.windows_total = static_cast<int64_t>(test.size());
    for (const auto& w : test) {
        const BuildingMetadata& meta = meta_of(w.building_id);
        for (size_t t = 1; t <= w.truth.size(); ++t) {
            const auto f = build_features(
                spec, detail::window_features(w, static_cast<int64_t>(t)), meta);
            Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(d));
            const double pred = weights.dot(fv);
            total.add(w.truth[t - 1], pred);
            per_building[w.building_id].add(w.truth[t - 1], pred);
        }
    }
    r.rmse = total.rmse();
    r.mae = total.mae();
    r.mape = total.mape();
    for (const auto& [bid, p] : per_building)
        r.per_building[bid] = {p.rmse(), p.mae(), p.mape()};
    switch (cfg.objective) {
        case Objective::rmse: r.J = r.rmse; break;
        case Objective::mae: r.J = r.mae; break;
        case Objective::mape: r.J = r.mape; break;
    }
    return r;
}

}  // namespace buildevo
