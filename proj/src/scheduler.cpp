#include "lmforge/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace lmforge {

namespace {

constexpr int kRejectionBudget = 1000;
constexpr int kEndRedrawBudget = 100;
constexpr int kPlacementBacktracks = 50;

TimeStamp clamp_to_support(double v, const Interval& s) {
    auto t = static_cast<TimeStamp>(std::llround(v));
    return std::clamp(t, s.start, s.end);
}

double draw_prob(const ProbInterval& p, Rng& rng) { return rng.uniform(p.lo, p.hi); }

}  // namespace

double lambda_to_per_ms(double lambda, LambdaUnit unit) {
    switch (unit) {
        case LambdaUnit::PerMillisecond: return lambda;
        case LambdaUnit::PerSecond: return lambda / 1000.0;
        case LambdaUnit::PerMinute: return lambda / 60000.0;
    }
    return lambda;
}

std::string to_string(LambdaUnit u) {
    switch (u) {
        case LambdaUnit::PerMillisecond: return "per_millisecond";
        case LambdaUnit::PerSecond: return "per_second";
        case LambdaUnit::PerMinute: return "per_minute";
    }
    return "per_second";
}

LambdaUnit lambda_unit_from_string(const std::string& s) {
    if (s == "per_millisecond") return LambdaUnit::PerMillisecond;
    if (s == "per_second") return LambdaUnit::PerSecond;
    if (s == "per_minute") return LambdaUnit::PerMinute;
    throw LmError("bad lambda_unit '" + s + "'");
}

std::string to_string(BoundaryCategory c) {
    switch (c) {
        case BoundaryCategory::AbnormalEarly: return "abnormal_early";
        case BoundaryCategory::AbnormalLate: return "abnormal_late";
        case BoundaryCategory::Late: return "late";
        case BoundaryCategory::OnTime: return "on_time";
    }
    return "on_time";
}

const CategoryConfig& BoundaryConfig::category(BoundaryCategory c) const {
    switch (c) {
        case BoundaryCategory::AbnormalEarly: return abnormal_early;
        case BoundaryCategory::AbnormalLate: return abnormal_late;
        case BoundaryCategory::Late: return late;
        case BoundaryCategory::OnTime: return on_time;
    }
    return on_time;
}

TimeStamp sample_truncated(const DistributionSpec& dist, Rng& rng) {
    const Interval& s = dist.support;
    if (!s.valid()) throw LmError("distribution support is malformed");
    switch (dist.kind) {
        case DistKind::Uniform:
            return s.start + rng.uniform_int(0, s.length());
        case DistKind::Exponential: {
            if (dist.lambda_per_ms <= 0) throw LmError("exponential requires lambda > 0");
            for (int i = 0; i < kRejectionBudget; ++i) {
                double offset = rng.exponential(dist.lambda_per_ms);
                if (offset <= static_cast<double>(s.length()))
                    return clamp_to_support(static_cast<double>(s.start) + offset, s);
            }
            return s.end;  // budget exhausted: clamp
        }
        case DistKind::Normal: {
            if (dist.sigma_ms <= 0) {
                if (dist.sigma_ms < 0) throw LmError("normal requires sigma > 0");
                return clamp_to_support(dist.mu_ms, s);
            }
            for (int i = 0; i < kRejectionBudget; ++i) {
                double v = rng.normal(dist.mu_ms, dist.sigma_ms);
                if (v >= static_cast<double>(s.start) && v <= static_cast<double>(s.end))
                    return clamp_to_support(v, s);
            }
            return clamp_to_support(dist.mu_ms, s);  // budget exhausted: clamp
        }
    }
    throw LmError("unknown distribution kind");
}

bool decide_absence(const SchedulerConfig& cfg, const std::string&, const Date& day, Rng& rng) {
    bool weekend = cfg.weekend_days.count(weekday_index(day)) > 0;
    double p = draw_prob(weekend ? cfg.absence_prob_weekend : cfg.absence_prob_weekday, rng);
    return rng.bernoulli(p);
}

std::pair<TimeStamp, BoundaryCategory> pick_boundary(const BoundaryConfig& b, Rng& rng) {
    constexpr BoundaryCategory order[4] = {BoundaryCategory::AbnormalEarly,
                                           BoundaryCategory::AbnormalLate, BoundaryCategory::Late,
                                           BoundaryCategory::OnTime};
    double weights[4];
    double total = 0;
    for (int i = 0; i < 4; ++i) {
        weights[i] = draw_prob(b.category(order[i]).prob, rng);
        total += weights[i];
    }
    if (total <= 0) throw LmError("degenerate boundary config: all category probabilities are zero");

    double toss = rng.next_double() * total;
    int winner = 3;
    double acc = 0;
    for (int i = 0; i < 4; ++i) {
        acc += weights[i];
        if (toss < acc) {
            winner = i;
            break;
        }
    }
    const CategoryConfig& cat = b.category(order[winner]);
    return {sample_truncated(cat.dist, rng), order[winner]};
}

namespace {

struct GapSlot {
    TimeStamp lo;  // earliest admissible block start
    TimeStamp hi;  // latest admissible block start
};

// Admissible start positions for a block of length `dur` between already
// placed blocks, keeping g_min on both sides (work boundaries count as
// blocks).
std::vector<GapSlot> feasible_slots(const Interval& work, const std::vector<Interval>& placed,
                                    std::int64_t dur, std::int64_t g_min) {
    std::vector<GapSlot> slots;
    TimeStamp cursor = work.start;
    auto push = [&](TimeStamp gap_start, TimeStamp gap_end) {
        TimeStamp lo = gap_start + g_min;
        TimeStamp hi = gap_end - g_min - dur;
        if (lo <= hi) slots.push_back({lo, hi});
    };
    for (const auto& blk : placed) {
        push(cursor, blk.start);
        cursor = blk.end;
    }
    push(cursor, work.end);
    return slots;
}

bool place_rec(const Interval& work, std::span<const std::int64_t> durations, std::size_t idx,
               std::int64_t g_min, std::int64_t g_max, bool enforce_gmax,
               std::vector<Interval>& placed, Rng& rng) {
    if (idx == durations.size()) {
        if (!enforce_gmax || placed.size() < 2) return true;
        for (std::size_t i = 0; i + 1 < placed.size(); ++i)
            if (placed[i + 1].start - placed[i].end > g_max) return false;
        return true;
    }
    std::int64_t dur = durations[idx];
    for (int attempt = 0; attempt < kPlacementBacktracks; ++attempt) {
        auto slots = feasible_slots(work, placed, dur, g_min);
        if (slots.empty()) return false;
        // weight slots by their admissible measure
        std::int64_t total = 0;
        for (const auto& s : slots) total += s.hi - s.lo + 1;
        std::int64_t pickv = rng.uniform_int(0, total - 1);
        GapSlot chosen = slots.back();
        for (const auto& s : slots) {
            std::int64_t m = s.hi - s.lo + 1;
            if (pickv < m) {
                chosen = s;
                break;
            }
            pickv -= m;
        }
        TimeStamp at = chosen.lo + rng.uniform_int(0, chosen.hi - chosen.lo);
        Interval blk{at, at + dur};
        auto pos = std::upper_bound(placed.begin(), placed.end(), blk,
                                    [](const Interval& a, const Interval& b) { return a.start < b.start; });
        // recursion may reallocate the vector; keep an index, not an iterator
        std::size_t at_idx = static_cast<std::size_t>(pos - placed.begin());
        placed.insert(pos, blk);
        if (place_rec(work, durations, idx + 1, g_min, g_max, enforce_gmax, placed, rng)) return true;
        placed.erase(placed.begin() + static_cast<std::ptrdiff_t>(at_idx));
    }
    return false;
}

}  // namespace

std::optional<std::vector<Interval>> place_logouts(const Interval& work,
                                                   std::span<const std::int64_t> durations,
                                                   std::int64_t g_min, std::int64_t g_max,
                                                   Rng& rng) {
    if (durations.empty()) return std::vector<Interval>{};
    std::int64_t total_dur = 0;
    for (auto d : durations) {
        if (d <= 0) throw LmError("logout durations must be positive");
        total_dur += d;
    }
    auto n = static_cast<std::int64_t>(durations.size());
    if (total_dur + (n + 1) * g_min > work.length()) return std::nullopt;

    std::vector<std::int64_t> sorted(durations.begin(), durations.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());

    std::vector<Interval> placed;
    if (place_rec(work, sorted, 0, g_min, g_max, /*enforce_gmax=*/true, placed, rng)) return placed;
    // g_max is best-effort: retry with only the hard g_min constraint
    placed.clear();
    if (place_rec(work, sorted, 0, g_min, g_max, /*enforce_gmax=*/false, placed, rng)) return placed;
    return std::nullopt;
}

namespace {

// Complement of the blackout blocks within [t_start, t_end]; empty slices
// are dropped.
std::vector<Interval> sessions_from_blackouts(TimeStamp t_start, TimeStamp t_end,
                                              std::vector<Interval> blackouts) {
    std::sort(blackouts.begin(), blackouts.end(),
              [](const Interval& a, const Interval& b) { return a.start < b.start; });
    std::vector<Interval> sessions;
    TimeStamp cursor = t_start;
    for (const auto& b : blackouts) {
        if (b.start > cursor) sessions.push_back({cursor, b.start});
        cursor = std::max(cursor, b.end);
    }
    if (cursor < t_end) sessions.push_back({cursor, t_end});
    return sessions;
}

}  // namespace

DayPlan build_day_schedule(const SchedulerConfig& cfg, const std::string& employee_id,
                           const Date& day, Rng& rng) {
    DayPlan plan;
    plan.employee_id = employee_id;
    plan.day = day;
    plan.schedule.employee_id = employee_id;
    plan.schedule.day = day;

    if (decide_absence(cfg, employee_id, day, rng)) {
        plan.absent = true;
        return plan;
    }

    auto [start_of_day, start_cat] = pick_boundary(cfg.start, rng);
    plan.start_category = start_cat;

    TimeStamp t_end = 0;
    BoundaryCategory end_cat{};
    bool resolved = false;
    for (int i = 0; i < kEndRedrawBudget; ++i) {
        std::tie(t_end, end_cat) = pick_boundary(cfg.end, rng);
        if (t_end > start_of_day) {
            resolved = true;
            break;
        }
    }
    if (!resolved) {
        t_end = start_of_day + kMsPerHour;
        end_cat = BoundaryCategory::OnTime;
    }
    plan.end_category = end_cat;

    const TimeStamp day_ms = date_to_ms(day);
    const TimeStamp t_start_abs = day_ms + start_of_day;
    const TimeStamp t_end_abs = day_ms + t_end;

    std::vector<Interval> blackouts;
    std::optional<Interval> lunch;
    if (rng.bernoulli(draw_prob(cfg.lunch_prob, rng))) {
        TimeStamp ls = cfg.lunch_start_interval.start +
                       rng.uniform_int(0, cfg.lunch_start_interval.length());
        std::int64_t dur = rng.uniform_int(cfg.lunch_duration_min, cfg.lunch_duration_max);
        Interval cand{day_ms + ls, day_ms + ls + dur};
        // lunch must sit strictly inside the working day, otherwise skipped
        if (cand.start > t_start_abs && cand.end < t_end_abs) {
            lunch = cand;
            blackouts.push_back(cand);
        }
    }

    // Segments on either side of lunch receive logouts proportionally to
    // their length, remainder to the longer segment.
    std::vector<Interval> segments;
    if (lunch) {
        segments.push_back({t_start_abs, lunch->start});
        segments.push_back({lunch->end, t_end_abs});
    } else {
        segments.push_back({t_start_abs, t_end_abs});
    }

    int n_total = static_cast<int>(rng.uniform_int(cfg.logout_count_min, cfg.logout_count_max));
    std::vector<std::int64_t> durations;
    durations.reserve(static_cast<std::size_t>(n_total));
    for (int i = 0; i < n_total; ++i)
        durations.push_back(rng.uniform_int(cfg.logout_duration_min, cfg.logout_duration_max));

    std::vector<int> seg_counts(segments.size(), 0);
    if (segments.size() == 1) {
        seg_counts[0] = n_total;
    } else if (n_total > 0) {
        std::int64_t len0 = segments[0].length();
        std::int64_t len1 = segments[1].length();
        std::int64_t total_len = std::max<std::int64_t>(1, len0 + len1);
        int c0 = static_cast<int>((n_total * len0) / total_len);
        int c1 = static_cast<int>((n_total * len1) / total_len);
        int rem = n_total - c0 - c1;
        if (len0 >= len1)
            c0 += rem;
        else
            c1 += rem;
        seg_counts[0] = c0;
        seg_counts[1] = c1;
    }

    // Keep at least 1 ms to each boundary so sessions never collapse to
    // zero length at t_start/t_end.
    const std::int64_t g_min = std::max<std::int64_t>(cfg.gap_min, 1);
    std::size_t cursor = 0;
    for (std::size_t si = 0; si < segments.size(); ++si) {
        std::vector<std::int64_t> seg_durs(durations.begin() + cursor,
                                           durations.begin() + cursor + seg_counts[si]);
        cursor += seg_counts[si];
        while (!seg_durs.empty()) {
            auto placed = place_logouts(segments[si], seg_durs, g_min, cfg.gap_max, rng);
            if (placed) {
                blackouts.insert(blackouts.end(), placed->begin(), placed->end());
                break;
            }
            // infeasible: reduce n by dropping the largest duration
            seg_durs.erase(std::max_element(seg_durs.begin(), seg_durs.end()));
        }
    }

    plan.schedule.sessions = sessions_from_blackouts(t_start_abs, t_end_abs, std::move(blackouts));
    return plan;
}

std::vector<DayPlan> build_day_plans(const SchedulerConfig& cfg,
                                     const std::vector<EmployeeProfile>& employees,
                                     const std::vector<Date>& days) {
    std::vector<DayPlan> plans;
    plans.reserve(employees.size() * days.size());
    for (const auto& emp : employees) {
        for (const auto& day : days) {
            Rng rng(Rng::derive(cfg.seed, emp.employee_id, to_string(day)));
            plans.push_back(build_day_schedule(cfg, emp.employee_id, day, rng));
        }
    }
    return plans;
}

ScheduleSet build_schedule_set(const SchedulerConfig& cfg,
                               const std::vector<EmployeeProfile>& employees,
                               const std::vector<Date>& days) {
    ScheduleSet set;
    for (auto& plan : build_day_plans(cfg, employees, days)) set.schedules.push_back(plan.schedule);
    return set;
}

// --- config / plan JSON ---

namespace {

Interval time_of_day_interval(const nlohmann::json& j) {
    return Interval{parse_hhmm(j.at(0).get<std::string>()), parse_hhmm(j.at(1).get<std::string>())};
}

ProbInterval prob_interval(const nlohmann::json& j) {
    ProbInterval p{j.at(0).get<double>(), j.at(1).get<double>()};
    if (p.lo < 0 || p.hi > 1 || p.lo > p.hi) throw LmError("probability interval out of range");
    return p;
}

DistributionSpec dist_from_json(const nlohmann::json& j, const Interval& support,
                                LambdaUnit default_unit) {
    DistributionSpec d;
    d.support = support;
    std::string kind = j.value("kind", "uniform");
    if (kind == "uniform") {
        d.kind = DistKind::Uniform;
    } else if (kind == "exponential") {
        d.kind = DistKind::Exponential;
        LambdaUnit unit = j.contains("lambda_unit")
                              ? lambda_unit_from_string(j.at("lambda_unit").get<std::string>())
                              : default_unit;
        d.lambda_per_ms = lambda_to_per_ms(j.at("lambda").get<double>(), unit);
        if (d.lambda_per_ms <= 0) throw LmError("exponential lambda must be > 0");
    } else if (kind == "normal") {
        d.kind = DistKind::Normal;
        d.mu_ms = j.contains("mu") ? static_cast<double>(parse_hhmm(j.at("mu").get<std::string>()))
                                   : static_cast<double>((support.start + support.end) / 2);
        d.sigma_ms = j.value("sigma_minutes", 10.0) * static_cast<double>(kMsPerMinute);
        if (d.sigma_ms <= 0) throw LmError("normal sigma must be > 0");
    } else {
        throw LmError("unknown distribution kind '" + kind + "'");
    }
    return d;
}

CategoryConfig category_from_json(const nlohmann::json& j, LambdaUnit default_unit) {
    CategoryConfig c;
    c.time_interval = time_of_day_interval(j.at("time"));
    if (!c.time_interval.valid()) throw LmError("category time interval is malformed");
    c.prob = prob_interval(j.at("prob"));
    c.dist = j.contains("dist") ? dist_from_json(j.at("dist"), c.time_interval, default_unit)
                                : DistributionSpec{DistKind::Uniform, 0, 0, 0, c.time_interval};
    return c;
}

BoundaryConfig boundary_from_json(const nlohmann::json& j, LambdaUnit default_unit) {
    BoundaryConfig b;
    b.abnormal_early = category_from_json(j.at("abnormal_early"), default_unit);
    b.abnormal_late = category_from_json(j.at("abnormal_late"), default_unit);
    b.late = category_from_json(j.at("late"), default_unit);
    b.on_time = category_from_json(j.at("on_time"), default_unit);
    return b;
}

nlohmann::ordered_json dist_to_json(const DistributionSpec& d) {
    nlohmann::ordered_json j;
    switch (d.kind) {
        case DistKind::Uniform: j["kind"] = "uniform"; break;
        case DistKind::Exponential:
            j["kind"] = "exponential";
            j["lambda"] = d.lambda_per_ms;
            j["lambda_unit"] = "per_millisecond";
            break;
        case DistKind::Normal:
            j["kind"] = "normal";
            j["mu"] = format_hhmm(static_cast<TimeStamp>(d.mu_ms));
            j["sigma_minutes"] = d.sigma_ms / static_cast<double>(kMsPerMinute);
            break;
    }
    return j;
}

nlohmann::ordered_json category_to_json(const CategoryConfig& c) {
    nlohmann::ordered_json j;
    j["time"] = {format_hhmm(c.time_interval.start), format_hhmm(c.time_interval.end)};
    j["prob"] = {c.prob.lo, c.prob.hi};
    j["dist"] = dist_to_json(c.dist);
    return j;
}

nlohmann::ordered_json boundary_to_json(const BoundaryConfig& b) {
    nlohmann::ordered_json j;
    j["abnormal_early"] = category_to_json(b.abnormal_early);
    j["abnormal_late"] = category_to_json(b.abnormal_late);
    j["late"] = category_to_json(b.late);
    j["on_time"] = category_to_json(b.on_time);
    return j;
}

}  // namespace

SchedulerConfig scheduler_config_from_json(const nlohmann::json& j) {
    SchedulerConfig cfg;
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("lambda_unit"))
        cfg.lambda_unit = lambda_unit_from_string(j.at("lambda_unit").get<std::string>());
    cfg.absence_prob_weekday = prob_interval(j.at("absence_prob_weekday"));
    cfg.absence_prob_weekend = prob_interval(j.at("absence_prob_weekend"));
    cfg.start = boundary_from_json(j.at("start"), cfg.lambda_unit);
    cfg.end = boundary_from_json(j.at("end"), cfg.lambda_unit);
    cfg.lunch_prob = prob_interval(j.at("lunch_prob"));
    cfg.lunch_start_interval = time_of_day_interval(j.at("lunch_start"));
    cfg.lunch_duration_min = j.at("lunch_duration_minutes").at(0).get<std::int64_t>() * kMsPerMinute;
    cfg.lunch_duration_max = j.at("lunch_duration_minutes").at(1).get<std::int64_t>() * kMsPerMinute;
    cfg.logout_count_min = j.at("logout_count").at(0).get<int>();
    cfg.logout_count_max = j.at("logout_count").at(1).get<int>();
    cfg.logout_duration_min = j.at("logout_duration_minutes").at(0).get<std::int64_t>() * kMsPerMinute;
    cfg.logout_duration_max = j.at("logout_duration_minutes").at(1).get<std::int64_t>() * kMsPerMinute;
    cfg.gap_min = j.at("gap_minutes").at(0).get<std::int64_t>() * kMsPerMinute;
    cfg.gap_max = j.at("gap_minutes").at(1).get<std::int64_t>() * kMsPerMinute;
    if (j.contains("weekend_days")) {
        cfg.weekend_days.clear();
        for (const auto& d : j.at("weekend_days")) cfg.weekend_days.insert(d.get<int>());
    }
    if (cfg.logout_count_min > cfg.logout_count_max || cfg.logout_duration_min > cfg.logout_duration_max ||
        cfg.gap_min > cfg.gap_max || cfg.lunch_duration_min > cfg.lunch_duration_max)
        throw LmError("scheduler config: range bounds inverted");
    return cfg;
}

nlohmann::ordered_json scheduler_config_to_json(const SchedulerConfig& cfg) {
    nlohmann::ordered_json j;
    j["seed"] = cfg.seed;
    j["lambda_unit"] = to_string(cfg.lambda_unit);
    j["absence_prob_weekday"] = {cfg.absence_prob_weekday.lo, cfg.absence_prob_weekday.hi};
    j["absence_prob_weekend"] = {cfg.absence_prob_weekend.lo, cfg.absence_prob_weekend.hi};
    j["start"] = boundary_to_json(cfg.start);
    j["end"] = boundary_to_json(cfg.end);
    j["lunch_prob"] = {cfg.lunch_prob.lo, cfg.lunch_prob.hi};
    j["lunch_start"] = {format_hhmm(cfg.lunch_start_interval.start),
                        format_hhmm(cfg.lunch_start_interval.end)};
    j["lunch_duration_minutes"] = {cfg.lunch_duration_min / kMsPerMinute,
                                   cfg.lunch_duration_max / kMsPerMinute};
    j["logout_count"] = {cfg.logout_count_min, cfg.logout_count_max};
    j["logout_duration_minutes"] = {cfg.logout_duration_min / kMsPerMinute,
                                    cfg.logout_duration_max / kMsPerMinute};
    j["gap_minutes"] = {cfg.gap_min / kMsPerMinute, cfg.gap_max / kMsPerMinute};
    j["weekend_days"] = cfg.weekend_days;
    return j;
}

nlohmann::ordered_json day_plan_to_json(const DayPlan& p) {
    nlohmann::ordered_json j;
    j["employee_id"] = p.employee_id;
    j["day"] = to_string(p.day);
    j["absent"] = p.absent;
    if (p.start_category) j["start_category"] = to_string(*p.start_category);
    if (p.end_category) j["end_category"] = to_string(*p.end_category);
    nlohmann::ordered_json sessions = nlohmann::ordered_json::array();
    for (const auto& s : p.schedule.sessions) sessions.push_back({{"start", s.start}, {"end", s.end}});
    j["sessions"] = std::move(sessions);
    return j;
}

DayPlan day_plan_from_json(const nlohmann::json& j) {
    DayPlan p;
    p.employee_id = j.at("employee_id").get<std::string>();
    p.day = parse_date(j.at("day").get<std::string>());
    p.absent = j.at("absent").get<bool>();
    p.schedule.employee_id = p.employee_id;
    p.schedule.day = p.day;
    auto cat = [](const std::string& s) {
        if (s == "abnormal_early") return BoundaryCategory::AbnormalEarly;
        if (s == "abnormal_late") return BoundaryCategory::AbnormalLate;
        if (s == "late") return BoundaryCategory::Late;
        if (s == "on_time") return BoundaryCategory::OnTime;
        throw LmError("bad boundary category '" + s + "'");
    };
    if (j.contains("start_category")) p.start_category = cat(j.at("start_category").get<std::string>());
    if (j.contains("end_category")) p.end_category = cat(j.at("end_category").get<std::string>());
    for (const auto& sj : j.at("sessions"))
        p.schedule.sessions.push_back({sj.at("start").get<TimeStamp>(), sj.at("end").get<TimeStamp>()});
    return p;
}

}  // namespace lmforge
