#pragma once

#include <filesystem>
#include <span>

#include "lmforge/core.hpp"

namespace lmforge {

// Reports join label records with the forest metadata to place each distinct
// step execution at its window start.

struct DailyStepRow {
    Date day;
    std::size_t steps = 0;  // distinct (scenario, version, trial, step) that day
};

struct TimelinePoint {
    Date day;
    TimeStamp time_of_day = 0;
    StepKey key;
};

struct ScenarioVersionRow {
    std::string scenario;
    std::string version;
    std::size_t trials = 0;
};

std::vector<DailyStepRow> report_daily_steps(std::span<const LabelRecord> labels,
                                             const Forest& forest);
std::vector<TimelinePoint> report_timeline(std::span<const LabelRecord> labels,
                                           const Forest& forest);
std::vector<ScenarioVersionRow> report_scenario_versions(std::span<const LabelRecord> labels);

struct SizeStats {
    double total_mb = 0;
    double average_mb = 0;
    double minimum_mb = 0;
    double maximum_mb = 0;
    std::size_t files = 0;
};

struct SizeTable {
    SizeStats pcap;
    SizeStats logs;
};

// *.pcap vs *.jsonl under the run directory; sizes in MiB.
SizeTable report_sizes(const std::filesystem::path& run_dir);

void write_daily_steps(const std::vector<DailyStepRow>& rows, const std::filesystem::path& csv,
                       const std::filesystem::path& svg);
void write_timeline(const std::vector<TimelinePoint>& points, const std::filesystem::path& csv,
                    const std::filesystem::path& svg);
void write_scenario_versions(const std::vector<ScenarioVersionRow>& rows,
                             const std::filesystem::path& csv, const std::filesystem::path& svg);
void write_sizes(const SizeTable& table, const std::filesystem::path& csv);

}  // namespace lmforge
