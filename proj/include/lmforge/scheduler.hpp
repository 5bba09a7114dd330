#pragma once

#include <optional>
#include <span>

#include <nlohmann/json_fwd.hpp>

#include "lmforge/core.hpp"
#include "lmforge/rng.hpp"

namespace lmforge {

enum class DistKind { Uniform, Exponential, Normal };

enum class LambdaUnit { PerMillisecond, PerSecond, PerMinute };

double lambda_to_per_ms(double lambda, LambdaUnit unit);
std::string to_string(LambdaUnit u);
LambdaUnit lambda_unit_from_string(const std::string& s);

// All time quantities are milliseconds-of-day; support is the truncation
// window the sample must land in.
struct DistributionSpec {
    DistKind kind = DistKind::Uniform;
    double lambda_per_ms = 0.0;  // exponential rate
    double mu_ms = 0.0;          // normal location
    double sigma_ms = 0.0;       // normal scale
    Interval support;
};

enum class BoundaryCategory { AbnormalEarly, AbnormalLate, Late, OnTime };

std::string to_string(BoundaryCategory c);

struct ProbInterval {
    double lo = 0.0;
    double hi = 0.0;
};

struct CategoryConfig {
    Interval time_interval;  // interval-of-day
    ProbInterval prob;
    DistributionSpec dist;  // dist.support mirrors time_interval
};

struct BoundaryConfig {
    CategoryConfig abnormal_early;
    CategoryConfig abnormal_late;
    CategoryConfig late;
    CategoryConfig on_time;

    const CategoryConfig& category(BoundaryCategory c) const;
};

struct SchedulerConfig {
    ProbInterval absence_prob_weekday;
    ProbInterval absence_prob_weekend;
    BoundaryConfig start;
    BoundaryConfig end;
    ProbInterval lunch_prob;
    Interval lunch_start_interval;        // interval-of-day
    std::int64_t lunch_duration_min = 0;  // ms
    std::int64_t lunch_duration_max = 0;
    int logout_count_min = 0;
    int logout_count_max = 0;
    std::int64_t logout_duration_min = 0;  // ms
    std::int64_t logout_duration_max = 0;
    std::int64_t gap_min = 0;  // ms, min gap around logout blocks
    std::int64_t gap_max = 0;  // ms, max gap between consecutive logouts
    std::set<int> weekend_days = {0, 6};  // 0=Sunday .. 6=Saturday
    std::uint64_t seed = 1;
    LambdaUnit lambda_unit = LambdaUnit::PerSecond;
};

struct DayPlan {
    std::string employee_id;
    Date day;
    bool absent = false;
    std::optional<BoundaryCategory> start_category;
    std::optional<BoundaryCategory> end_category;
    SessionSchedule schedule;
};

// Draws one value inside dist.support. Rejection sampling with a bounded
// attempt budget; exhaustion clamps to the nearest support bound instead of
// failing. Exponential offsets are measured from support.start.
TimeStamp sample_truncated(const DistributionSpec& dist, Rng& rng);

bool decide_absence(const SchedulerConfig& cfg, const std::string& employee_id, const Date& day,
                    Rng& rng);

// Unfair-tetrahedron draw across the four categories, then a truncated sample
// from the winner. Throws LmError if all four drawn probabilities are zero.
std::pair<TimeStamp, BoundaryCategory> pick_boundary(const BoundaryConfig& b, Rng& rng);

// Places durations.size() disjoint logout blocks inside `work` with every gap
// (block-to-block and block-to-boundary) >= g_min and, where achievable,
// block-to-block gaps <= g_max. Returns nullopt when infeasible.
std::optional<std::vector<Interval>> place_logouts(const Interval& work,
                                                   std::span<const std::int64_t> durations,
                                                   std::int64_t g_min, std::int64_t g_max,
                                                   Rng& rng);

DayPlan build_day_schedule(const SchedulerConfig& cfg, const std::string& employee_id,
                           const Date& day, Rng& rng);

std::vector<DayPlan> build_day_plans(const SchedulerConfig& cfg,
                                     const std::vector<EmployeeProfile>& employees,
                                     const std::vector<Date>& days);

ScheduleSet build_schedule_set(const SchedulerConfig& cfg,
                               const std::vector<EmployeeProfile>& employees,
                               const std::vector<Date>& days);

// scheduler_config.json: times of day as "HH:MM", durations as integer
// minutes; converted to ms internally.
SchedulerConfig scheduler_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json scheduler_config_to_json(const SchedulerConfig& cfg);

nlohmann::ordered_json day_plan_to_json(const DayPlan& p);
DayPlan day_plan_from_json(const nlohmann::json& j);

}  // namespace lmforge
