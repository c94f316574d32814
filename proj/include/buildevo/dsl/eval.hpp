#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "buildevo/common.hpp"
#include "buildevo/dsl/ast.hpp"
#include "buildevo/types.hpp"

// Window evaluation. The prediction at step t (1-based, 1..T_pred) is the
// sum of all segment values at t. Evaluation is total: every runtime problem
// is reported through EvalOutcome.failure, never thrown, and a per-window
// budget of 10^6 node evaluations bounds cost. lag(k) closes over the
// forecast autoregressively: position p = T_obs + t - k reads history when
// p <= T_obs and the heuristic's own earlier predictions otherwise.

namespace buildevo::dsl {

enum class FailureKind { div_zero, domain_error, non_finite, budget_exceeded };

inline const char* to_string(FailureKind k) {
    switch (k) {
        case FailureKind::div_zero: return "div_zero";
        case FailureKind::domain_error: return "domain_error";
        case FailureKind::non_finite: return "non_finite";
        case FailureKind::budget_exceeded: return "budget_exceeded";
    }
    return "?";
}

struct EvalFailure {
    FailureKind kind = FailureKind::domain_error;
    std::string location;  // "segment '<name>': <construct>"
};

struct EvalOutcome {
    std::vector<double> predictions;  // length T_pred when ok()
    std::optional<EvalFailure> failure;

    bool ok() const { return !failure.has_value(); }
};

struct SegmentValues {
    std::vector<std::string> names;
    std::vector<std::vector<double>> values;  // [segment][step], when ok()
    std::optional<EvalFailure> failure;

    bool ok() const { return !failure.has_value(); }
};

inline constexpr int64_t kEvalBudget = 1'000'000;

namespace detail {

class Evaluator {
public:
    Evaluator(const Program& p, const ForecastWindow& w, const BuildingMetadata& m)
        : prog_(p), win_(w), meta_(m), t_obs_(static_cast<int64_t>(w.history.size())) {}

    SegmentValues run() {
        SegmentValues out;
        const size_t t_pred = win_.truth.size();
        for (const auto& s : prog_.segments) {
            out.names.push_back(s.name);
            out.values.emplace_back();
            out.values.back().reserve(t_pred);
        }
        predictions_.reserve(t_pred);
        for (size_t step = 1; step <= t_pred; ++step) {
            t_ = static_cast<int64_t>(step);
            double sum = 0;
            for (size_t i = 0; i < prog_.segments.size(); ++i) {
                segment_ = &prog_.segments[i].name;
                const double v = eval(prog_.segments[i].body);
                if (failed_) {
                    out.failure = failure_;
                    return out;
                }
                out.values[i].push_back(v);
                sum += v;
            }
            if (!std::isfinite(sum)) {
                segment_ = nullptr;
                fail(FailureKind::non_finite, "prediction sum");
                out.failure = failure_;
                return out;
            }
            predictions_.push_back(sum);
        }
        return out;
    }

    const std::vector<double>& predictions() const { return predictions_; }

private:
    double eval(const Expr& e) {
        if (failed_) return 0;
        if (--budget_ < 0) return fail(FailureKind::budget_exceeded, "node budget");
        switch (e.kind) {
            case ExprKind::number:
                return e.number;
            case ExprKind::string_lit:
                return fail(FailureKind::domain_error, "bare string literal");
            case ExprKind::unary: {
                const double v = eval(e.args[0]);
                if (failed_) return 0;
                return e.unary_op == UnaryOp::neg ? -v : (v == 0.0 ? 1.0 : 0.0);
            }
            case ExprKind::binary:
                return eval_binary(e);
            case ExprKind::call:
                return eval_call(e);
        }
        return 0;
    }

    double eval_binary(const Expr& e) {
        if (e.binary_op == BinaryOp::logical_or || e.binary_op == BinaryOp::logical_and) {
            const double l = eval(e.args[0]);
            if (failed_) return 0;
            const bool lt = l != 0.0;
            if (e.binary_op == BinaryOp::logical_or && lt) return 1.0;
            if (e.binary_op == BinaryOp::logical_and && !lt) return 0.0;
            const double r = eval(e.args[1]);
            if (failed_) return 0;
            return r != 0.0 ? 1.0 : 0.0;
        }
        const double l = eval(e.args[0]);
        if (failed_) return 0;
        const double r = eval(e.args[1]);
        if (failed_) return 0;
        switch (e.binary_op) {
            case BinaryOp::lt: return l < r ? 1.0 : 0.0;
            case BinaryOp::le: return l <= r ? 1.0 : 0.0;
            case BinaryOp::gt: return l > r ? 1.0 : 0.0;
            case BinaryOp::ge: return l >= r ? 1.0 : 0.0;
            case BinaryOp::eq: return l == r ? 1.0 : 0.0;
            case BinaryOp::ne: return l != r ? 1.0 : 0.0;
            case BinaryOp::add: return finite(l + r, "+");
            case BinaryOp::sub: return finite(l - r, "-");
            case BinaryOp::mul: return finite(l * r, "*");
            case BinaryOp::divide:
                if (r == 0.0) return fail(FailureKind::div_zero, "/");
                return finite(l / r, "/");
            default: return 0;
        }
    }

    double eval_call(const Expr& e) {
        const std::string& name = e.text;
        // if() and usage_is() consume their arguments specially.
        if (name == "if") {
            const double c = eval(e.args[0]);
            if (failed_) return 0;
            return eval(e.args[c != 0.0 ? 1 : 2]);
        }
        if (name == "usage_is")
            return to_lower(trim(e.args[0].text)) == to_lower(trim(meta_.primary_space_usage))
                       ? 1.0
                       : 0.0;

        double a[3] = {0, 0, 0};
        for (size_t i = 0; i < e.args.size(); ++i) {
            a[i] = eval(e.args[i]);
            if (failed_) return 0;
        }

        if (name == "lag") return lag_value(a[0]);
        if (name == "roll_mean" || name == "roll_min" || name == "roll_max")
            return roll(name, a[0]);
        if (name == "hour") return exog_row() ? exog_row()->hour : domain("hour");
        if (name == "dow") return exog_row() ? exog_row()->dow : domain("dow");
        if (name == "month") return exog_row() ? exog_row()->month : domain("month");
        if (name == "is_weekend")
            return exog_row() ? (exog_row()->is_weekend ? 1.0 : 0.0) : domain("is_weekend");
        if (name == "temp") return exog_value(&ExogRow::temp, "temp");
        if (name == "humidity") return exog_value(&ExogRow::humidity, "humidity");
        if (name == "wind") return exog_value(&ExogRow::wind, "wind");
        if (name == "irradiance") return exog_value(&ExogRow::irradiance, "irradiance");
        if (name == "temp_lag") return temp_lag(a[0]);
        if (name == "hdd" || name == "cdd") {
            const double t = exog_value(&ExogRow::temp, name.c_str());
            if (failed_) return 0;
            return name == "hdd" ? std::max(0.0, a[0] - t) : std::max(0.0, t - a[0]);
        }
        if (name == "sqft") return meta_.sqft ? *meta_.sqft : domain("sqft");
        if (name == "year_built")
            return meta_.year_built ? static_cast<double>(*meta_.year_built)
                                    : domain("year_built");
        if (name == "min") return std::min(a[0], a[1]);
        if (name == "max") return std::max(a[0], a[1]);
        if (name == "abs") return std::abs(a[0]);
        if (name == "clamp") return std::min(std::max(a[0], a[1]), a[2]);
        if (name == "exp") return finite(std::exp(a[0]), "exp");
        if (name == "log")
            return a[0] <= 0.0 ? domain("log") : finite(std::log(a[0]), "log");
        if (name == "sqrt")
            return a[0] < 0.0 ? domain("sqrt") : std::sqrt(a[0]);
        return domain(name.c_str());  // unreachable for validated programs
    }

    // Rounds an index-like argument, rejecting magnitudes llround cannot
    // represent. Callers bound the result further.
    std::optional<int64_t> round_index(double v) const {
        if (!(v >= -1e15 && v <= 1e15)) return std::nullopt;
        return std::llround(v);
    }

    // Position arithmetic shared by lag and temp_lag: p = T_obs + t - k.
    double lag_value(double kv) {
        const auto ko = round_index(kv);
        if (!ko) return domain("lag");
        const int64_t k = *ko;
        if (k < 1) return domain("lag");
        const int64_t p = t_obs_ + t_ - k;
        if (p < 1) return domain("lag");
        if (p <= t_obs_) return win_.history[static_cast<size_t>(p - 1)];
        return predictions_[static_cast<size_t>(p - t_obs_ - 1)];
    }

    double temp_lag(double kv) {
        const auto ko = round_index(kv);
        if (!ko) return domain("temp_lag");
        const int64_t k = *ko;
        const int64_t p = t_obs_ + t_ - k;
        double v = std::numeric_limits<double>::quiet_NaN();
        if (p >= 1 && p <= t_obs_) {
            if (static_cast<size_t>(p - 1) >= win_.history_exog.size())
                return domain("temp_lag");
            v = win_.history_exog[static_cast<size_t>(p - 1)].temp;
        } else if (p > t_obs_ &&
                   static_cast<size_t>(p - t_obs_ - 1) < win_.future_exog.size()) {
            v = win_.future_exog[static_cast<size_t>(p - t_obs_ - 1)].temp;
        } else {
            return domain("temp_lag");
        }
        if (!std::isfinite(v)) return domain("temp_lag");
        return v;
    }

    double roll(const std::string& name, double wv) {
        const auto wo = round_index(wv);
        if (!wo) return domain(name.c_str());
        const int64_t w = std::min<int64_t>(*wo, t_obs_);
        if (w < 1) return domain(name.c_str());
        double acc = name == "roll_mean" ? 0.0 : win_.history[static_cast<size_t>(t_obs_ - w)];
        for (int64_t i = t_obs_ - w; i < t_obs_; ++i) {
            const double v = win_.history[static_cast<size_t>(i)];
            if (name == "roll_mean")
                acc += v;
            else if (name == "roll_min")
                acc = std::min(acc, v);
            else
                acc = std::max(acc, v);
        }
        if (name == "roll_mean") acc /= static_cast<double>(w);
        return finite(acc, name.c_str());
    }

    const ExogRow* exog_row() const {
        const size_t i = static_cast<size_t>(t_ - 1);
        return i < win_.future_exog.size() ? &win_.future_exog[i] : nullptr;
    }

    double exog_value(double ExogRow::*field, const char* what) {
        const ExogRow* row = exog_row();
        if (!row) return domain(what);
        const double v = row->*field;
        if (!std::isfinite(v)) return domain(what);
        return v;
    }

    double finite(double v, const char* what) {
        if (!std::isfinite(v)) return fail(FailureKind::non_finite, what);
        return v;
    }

    double domain(const char* what) { return fail(FailureKind::domain_error, what); }

    double fail(FailureKind kind, const std::string& what) {
        if (!failed_) {
            failed_ = true;
            failure_.kind = kind;
            failure_.location =
                segment_ ? "segment '" + *segment_ + "': " + what : what;
        }
        return 0;
    }

    const Program& prog_;
    const ForecastWindow& win_;
    const BuildingMetadata& meta_;
    const int64_t t_obs_;
    int64_t t_ = 1;
    int64_t budget_ = kEvalBudget;
    std::vector<double> predictions_;
    const std::string* segment_ = nullptr;
    bool failed_ = false;
    EvalFailure failure_;
};

}  // namespace detail

inline SegmentValues segment_values(const Program& p, const ForecastWindow& w,
                                    const BuildingMetadata& m) {
    detail::Evaluator ev(p, w, m);
    return ev.run();
}

inline EvalOutcome evaluate(const Program& p, const ForecastWindow& w,
                            const BuildingMetadata& m) {
    detail::Evaluator ev(p, w, m);
    SegmentValues sv = ev.run();
    EvalOutcome out;
    if (!sv.ok()) {
        out.failure = sv.failure;
        return out;
    }
    out.predictions = ev.predictions();
    return out;
}

}  // namespace buildevo::dsl
