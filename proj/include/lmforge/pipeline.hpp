#pragma once

#include <filesystem>

#include "lmforge/core.hpp"
#include "lmforge/forest.hpp"
#include "lmforge/netlabel.hpp"
#include "lmforge/scheduler.hpp"
#include "lmforge/telemetry.hpp"

namespace lmforge {

struct AttackPlanEntry {
    std::string scenario;
    std::string version = "v1";
    int trial = 1;
    int day_offset = 0;           // from start_day
    TimeStamp time_of_day = 0;    // ms after midnight
};

struct C2Config {
    bool enabled = false;
    ConnTarget orchestrator;
};

struct RunConfig {
    std::uint64_t seed = 1;
    Date start_day{2024, 10, 10};
    int num_days = 25;
    SchedulerConfig scheduler;
    std::vector<EmployeeProfile> employees;
    std::vector<BehaviorScript> behaviors;
    std::vector<ScenarioScript> scenarios;
    std::vector<AttackPlanEntry> attack_plan;
    TelemetryConfig telemetry;
    C2Config c2;
    std::int64_t end_extension_ms = 30'000;
    std::int64_t slack_ms = 2'000;
    std::vector<C2Endpoint> c2_filter;
    bool strict = false;

    std::vector<Date> days() const;
};

// Desk-scale counterpart of the published run: 11 active users over 25 days,
// seven scenarios replayed across the last 10 attack days.
RunConfig default_config();

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json run_config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

struct RunManifest {
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string lambda_unit;
    std::map<std::string, double> stage_timings_ms;
    std::size_t events = 0;
    std::size_t malicious_events = 0;
    std::size_t labels = 0;
    std::size_t flows = 0;
    std::size_t packets = 0;
    std::size_t packet_labels = 0;
    std::size_t c2_removed = 0;
    std::size_t pid_collisions = 0;
    double malicious_fraction = 0.0;
    std::int64_t end_extension_ms = 0;
    std::int64_t slack_ms = 0;
};

nlohmann::ordered_json manifest_to_json(const RunManifest& m);

// Stage entry points; each reads its inputs from and writes its artifacts to
// `out`. The pipeline composes all of them.
void stage_schedule(const RunConfig& cfg, const std::filesystem::path& out);
void stage_emit(const RunConfig& cfg, const std::filesystem::path& out);
void stage_merge(const RunConfig& cfg, const std::filesystem::path& out);
void stage_forest(const RunConfig& cfg, const std::filesystem::path& out);
std::size_t stage_label_sys(const RunConfig& cfg, const std::filesystem::path& out);
std::size_t stage_label_net(const RunConfig& cfg, const std::filesystem::path& out);
void stage_label_pcap(const RunConfig& cfg, const std::filesystem::path& out);
void stage_report(const RunConfig& cfg, const std::filesystem::path& out);

RunManifest run_pipeline(const RunConfig& cfg, const std::filesystem::path& out);

}  // namespace lmforge
