#include "lmforge/report.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace lmforge {

namespace {

// Window start per step identity; a step executes on one host, but if
// several trees share the identity the earliest start wins.
std::map<StepKey, TimeStamp> step_starts(const Forest& forest) {
    std::map<StepKey, TimeStamp> starts;
    for (const auto& t : forest.trees) {
        auto key = t.meta.label.key();
        auto [it, inserted] = starts.emplace(key, t.meta.window.start);
        if (!inserted) it->second = std::min(it->second, t.meta.window.start);
    }
    return starts;
}

std::set<StepKey> distinct_steps(std::span<const LabelRecord> labels) {
    std::set<StepKey> keys;
    for (const auto& l : labels) keys.insert(l.label.key());
    return keys;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p);
    if (!out) throw LmError("cannot write " + p.string());
    return out;
}

}  // namespace

std::vector<DailyStepRow> report_daily_steps(std::span<const LabelRecord> labels,
                                             const Forest& forest) {
    auto starts = step_starts(forest);
    std::map<Date, std::size_t> per_day;
    for (const auto& key : distinct_steps(labels)) {
        auto it = starts.find(key);
        if (it == starts.end())
            throw LmError("label references step absent from forest: " + key.scenario + "/" +
                          key.version + " trial " + std::to_string(key.trial) + " step " +
                          std::to_string(key.step));
        ++per_day[date_from_ms(it->second)];
    }
    std::vector<DailyStepRow> rows;
    for (const auto& [day, count] : per_day) rows.push_back({day, count});
    return rows;
}

std::vector<TimelinePoint> report_timeline(std::span<const LabelRecord> labels,
                                           const Forest& forest) {
    auto starts = step_starts(forest);
    std::vector<TimelinePoint> points;
    for (const auto& key : distinct_steps(labels)) {
        auto it = starts.find(key);
        if (it == starts.end())
            throw LmError("label references step absent from forest: " + key.scenario);
        TimelinePoint p;
        p.day = date_from_ms(it->second);
        p.time_of_day = it->second - date_to_ms(p.day);
        p.key = key;
        points.push_back(std::move(p));
    }
    std::sort(points.begin(), points.end(), [](const TimelinePoint& a, const TimelinePoint& b) {
        return std::tie(a.day, a.time_of_day, a.key) < std::tie(b.day, b.time_of_day, b.key);
    });
    return points;
}

std::vector<ScenarioVersionRow> report_scenario_versions(std::span<const LabelRecord> labels) {
    std::map<std::pair<std::string, std::string>, std::set<int>> trials;
    for (const auto& l : labels) trials[{l.label.scenario, l.label.version}].insert(l.label.trial);
    std::vector<ScenarioVersionRow> rows;
    for (const auto& [key, set] : trials) rows.push_back({key.first, key.second, set.size()});
    return rows;
}

namespace {

SizeStats stats_for(const std::vector<std::uintmax_t>& sizes) {
    SizeStats s;
    s.files = sizes.size();
    if (sizes.empty()) return s;
    constexpr double mb = 1024.0 * 1024.0;
    std::uintmax_t total = 0, mn = sizes.front(), mx = sizes.front();
    for (auto v : sizes) {
        total += v;
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    s.total_mb = static_cast<double>(total) / mb;
    s.average_mb = s.total_mb / static_cast<double>(sizes.size());
    s.minimum_mb = static_cast<double>(mn) / mb;
    s.maximum_mb = static_cast<double>(mx) / mb;
    return s;
}

}  // namespace

SizeTable report_sizes(const std::filesystem::path& run_dir) {
    std::vector<std::uintmax_t> pcap_sizes, log_sizes;
    if (std::filesystem::exists(run_dir)) {
        for (const auto& entry : std::filesystem::recursive_directory_iterator(run_dir)) {
            if (!entry.is_regular_file()) continue;
            auto ext = entry.path().extension();
            if (ext == ".pcap")
                pcap_sizes.push_back(entry.file_size());
            else if (ext == ".jsonl")
                log_sizes.push_back(entry.file_size());
        }
    }
    std::sort(pcap_sizes.begin(), pcap_sizes.end());
    std::sort(log_sizes.begin(), log_sizes.end());
    return SizeTable{stats_for(pcap_sizes), stats_for(log_sizes)};
}

// --- CSV + SVG emission. CSV is the contract, SVG is convenience. ---

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 400;
constexpr int kMarginLeft = 60;
constexpr int kMarginBottom = 50;
constexpr int kMarginTop = 20;
constexpr int kMarginRight = 20;

void svg_open(std::ofstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"14\" text-anchor=\"middle\" font-size=\"13\">"
        << title << "</text>\n";
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kHeight - kMarginBottom << "\" x2=\""
        << kWidth - kMarginRight << "\" y2=\"" << kHeight - kMarginBottom
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << kMarginLeft << "\" y1=\"" << kMarginTop << "\" x2=\"" << kMarginLeft
        << "\" y2=\"" << kHeight - kMarginBottom << "\" stroke=\"black\"/>\n";
}

void svg_close(std::ofstream& out) { out << "</svg>\n"; }

std::string color_for(std::size_t i) {
    static const char* palette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
                                    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
    return palette[i % (sizeof(palette) / sizeof(palette[0]))];
}

}  // namespace

void write_daily_steps(const std::vector<DailyStepRow>& rows, const std::filesystem::path& csv,
                       const std::filesystem::path& svg) {
    auto out = open_out(csv);
    out << "day,steps\n";
    for (const auto& r : rows) out << to_string(r.day) << ',' << r.steps << '\n';

    auto plot = open_out(svg);
    svg_open(plot, "Daily distribution of attack steps");
    if (!rows.empty()) {
        std::size_t max_count = 1;
        for (const auto& r : rows) max_count = std::max(max_count, r.steps);
        const double plot_w = kWidth - kMarginLeft - kMarginRight;
        const double plot_h = kHeight - kMarginTop - kMarginBottom;
        const double bar_w = plot_w / static_cast<double>(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            double h = plot_h * static_cast<double>(rows[i].steps) / static_cast<double>(max_count);
            double x = kMarginLeft + bar_w * static_cast<double>(i);
            plot << "<rect x=\"" << x + 2 << "\" y=\"" << kHeight - kMarginBottom - h << "\" width=\""
                 << std::max(1.0, bar_w - 4) << "\" height=\"" << h << "\" fill=\"#4e79a7\"/>\n";
            plot << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << kHeight - kMarginBottom + 14
                 << "\" text-anchor=\"middle\" font-size=\"8\" transform=\"rotate(45 " << x + bar_w / 2
                 << ' ' << kHeight - kMarginBottom + 14 << ")\">" << to_string(rows[i].day)
                 << "</text>\n";
        }
    }
    svg_close(plot);
}

void write_timeline(const std::vector<TimelinePoint>& points, const std::filesystem::path& csv,
                    const std::filesystem::path& svg) {
    auto out = open_out(csv);
    out << "day,time_of_day_ms,scenario,version,trial,step\n";
    for (const auto& p : points)
        out << to_string(p.day) << ',' << p.time_of_day << ',' << p.key.scenario << ','
            << p.key.version << ',' << p.key.trial << ',' << p.key.step << '\n';

    auto plot = open_out(svg);
    svg_open(plot, "Timeline of attack step occurrences by scenario");
    if (!points.empty()) {
        Date d0 = points.front().day, d1 = points.front().day;
        std::vector<std::string> scenarios;
        for (const auto& p : points) {
            d0 = std::min(d0, p.day);
            d1 = std::max(d1, p.day);
            if (std::find(scenarios.begin(), scenarios.end(), p.key.scenario) == scenarios.end())
                scenarios.push_back(p.key.scenario);
        }
        double day_span = std::max<double>(
            1.0, static_cast<double>((date_to_ms(d1) - date_to_ms(d0)) / kMsPerDay));
        const double plot_w = kWidth - kMarginLeft - kMarginRight;
        const double plot_h = kHeight - kMarginTop - kMarginBottom;
        for (const auto& p : points) {
            double dx = static_cast<double>((date_to_ms(p.day) - date_to_ms(d0)) / kMsPerDay);
            double x = kMarginLeft + plot_w * dx / day_span;
            double y = kMarginTop + plot_h * (1.0 - static_cast<double>(p.time_of_day) /
                                                        static_cast<double>(kMsPerDay));
            std::size_t ci = static_cast<std::size_t>(
                std::find(scenarios.begin(), scenarios.end(), p.key.scenario) - scenarios.begin());
            plot << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"" << color_for(ci)
                 << "\"/>\n";
        }
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            plot << "<circle cx=\"" << kMarginLeft + 8 << "\" cy=\"" << kMarginTop + 10 + 14 * i
                 << "\" r=\"4\" fill=\"" << color_for(i) << "\"/>\n";
            plot << "<text x=\"" << kMarginLeft + 16 << "\" y=\"" << kMarginTop + 14 + 14 * i
                 << "\" font-size=\"10\">" << scenarios[i] << "</text>\n";
        }
    }
    svg_close(plot);
}

void write_scenario_versions(const std::vector<ScenarioVersionRow>& rows,
                             const std::filesystem::path& csv, const std::filesystem::path& svg) {
    auto out = open_out(csv);
    out << "scenario,version,trials\n";
    for (const auto& r : rows) out << r.scenario << ',' << r.version << ',' << r.trials << '\n';

    auto plot = open_out(svg);
    svg_open(plot, "Frequency of scenario and version pairs");
    if (!rows.empty()) {
        std::size_t max_count = 1;
        for (const auto& r : rows) max_count = std::max(max_count, r.trials);
        const double plot_w = kWidth - kMarginLeft - kMarginRight;
        const double plot_h = kHeight - kMarginTop - kMarginBottom;
        const double bar_w = plot_w / static_cast<double>(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            double h = plot_h * static_cast<double>(rows[i].trials) / static_cast<double>(max_count);
            double x = kMarginLeft + bar_w * static_cast<double>(i);
            plot << "<rect x=\"" << x + 3 << "\" y=\"" << kHeight - kMarginBottom - h << "\" width=\""
                 << std::max(1.0, bar_w - 6) << "\" height=\"" << h << "\" fill=\"" << color_for(i)
                 << "\"/>\n";
            plot << "<text x=\"" << x + bar_w / 2 << "\" y=\"" << kHeight - kMarginBottom + 14
                 << "\" text-anchor=\"middle\" font-size=\"8\" transform=\"rotate(45 " << x + bar_w / 2
                 << ' ' << kHeight - kMarginBottom + 14 << ")\">" << rows[i].scenario << " "
                 << rows[i].version << "</text>\n";
        }
    }
    svg_close(plot);
}

void write_sizes(const SizeTable& table, const std::filesystem::path& csv) {
    auto out = open_out(csv);
    char buf[128];
    out << "Statistic,PCAP Size,Log Size\n";
    auto row = [&](const char* name, double p, double l) {
        std::snprintf(buf, sizeof buf, "%s,%.2f,%.2f\n", name, p, l);
        out << buf;
    };
    row("Total Size", table.pcap.total_mb, table.logs.total_mb);
    row("Average Size", table.pcap.average_mb, table.logs.average_mb);
    row("Minimum Size", table.pcap.minimum_mb, table.logs.minimum_mb);
    row("Maximum Size", table.pcap.maximum_mb, table.logs.maximum_mb);
}

}  // namespace lmforge
