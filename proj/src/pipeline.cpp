#include "lmforge/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "lmforge/labeling.hpp"
#include "lmforge/report.hpp"

namespace lmforge {

namespace fs = std::filesystem;

std::vector<Date> RunConfig::days() const {
    std::vector<Date> out;
    out.reserve(static_cast<std::size_t>(num_days));
    for (int i = 0; i < num_days; ++i) out.push_back(add_days(start_day, i));
    return out;
}

namespace {

CategoryConfig make_category(const char* lo, const char* hi, double p_lo, double p_hi,
                             DistributionSpec dist = {}) {
    CategoryConfig c;
    c.time_interval = {parse_hhmm(lo), parse_hhmm(hi)};
    c.prob = {p_lo, p_hi};
    dist.support = c.time_interval;
    c.dist = dist;
    return c;
}

DistributionSpec expo(double lambda_per_sec) {
    DistributionSpec d;
    d.kind = DistKind::Exponential;
    d.lambda_per_ms = lambda_to_per_ms(lambda_per_sec, LambdaUnit::PerSecond);
    return d;
}

DistributionSpec gauss(const char* mu, double sigma_minutes) {
    DistributionSpec d;
    d.kind = DistKind::Normal;
    d.mu_ms = static_cast<double>(parse_hhmm(mu));
    d.sigma_ms = sigma_minutes * static_cast<double>(kMsPerMinute);
    return d;
}

SchedulerConfig default_scheduler() {
    SchedulerConfig cfg;
    cfg.absence_prob_weekday = {0.05, 0.10};
    cfg.absence_prob_weekend = {0.92, 0.98};
    cfg.start.abnormal_early = make_category("03:30", "07:29", 0.01, 0.02, expo(0.00037));
    cfg.start.abnormal_late = make_category("11:01", "14:00", 0.01, 0.02);
    cfg.start.late = make_category("09:16", "11:00", 0.10, 0.18);
    cfg.start.on_time = make_category("08:30", "09:15", 0.70, 0.85, gauss("08:50", 8));
    cfg.end.abnormal_early = make_category("13:00", "15:59", 0.01, 0.02);
    cfg.end.abnormal_late = make_category("19:31", "23:00", 0.01, 0.02);
    cfg.end.late = make_category("17:31", "19:30", 0.10, 0.18);
    cfg.end.on_time = make_category("16:30", "17:30", 0.70, 0.85, gauss("17:00", 10));
    cfg.lunch_prob = {0.75, 0.90};
    cfg.lunch_start_interval = {parse_hhmm("11:45"), parse_hhmm("12:45")};
    cfg.lunch_duration_min = 30 * kMsPerMinute;
    cfg.lunch_duration_max = 60 * kMsPerMinute;
    cfg.logout_count_min = 0;
    cfg.logout_count_max = 3;
    cfg.logout_duration_min = 5 * kMsPerMinute;
    cfg.logout_duration_max = 25 * kMsPerMinute;
    cfg.gap_min = 45 * kMsPerMinute;
    cfg.gap_max = 300 * kMsPerMinute;
    cfg.weekend_days = {0, 6};
    cfg.lambda_unit = LambdaUnit::PerSecond;
    return cfg;
}

BehaviorScript office_behavior(const std::string& name, std::vector<std::string> images,
                               std::vector<std::string> paths) {
    BehaviorScript b;
    b.name = name;
    ActionSpec spawn;
    spawn.kind = ActionKind::SpawnProcess;
    spawn.weight = 0.5;
    spawn.images = std::move(images);
    ActionSpec conn;
    conn.kind = ActionKind::OpenConnection;
    conn.weight = 0.6;
    conn.targets = {
        ConnTarget{parse_ipv4("10.10.0.80"), 80, Protocol::Tcp},
        ConnTarget{parse_ipv4("10.10.0.81"), 443, Protocol::Tcp},
        ConnTarget{parse_ipv4("10.10.0.200"), 445, Protocol::Tcp},
        ConnTarget{parse_ipv4("10.10.0.53"), 53, Protocol::Udp},
    };
    ActionSpec file;
    file.kind = ActionKind::FileAccess;
    file.weight = 0.35;
    file.paths = std::move(paths);
    b.actions = {spawn, conn, file};
    return b;
}

ProcTemplate proc(std::string image, std::vector<ProcTemplate> children = {}) {
    return ProcTemplate{std::move(image), std::move(children)};
}

ConnTemplate conn_to(std::string host, std::uint16_t port, int count = 1,
                     Protocol proto = Protocol::Tcp) {
    ConnTemplate c;
    c.dst_host = std::move(host);
    c.dst_port = port;
    c.proto = proto;
    c.count = count;
    return c;
}

StepSpec make_step(int n, std::string host, std::string agent, std::vector<ProcTemplate> children,
                   std::vector<ConnTemplate> conns, bool success, std::vector<std::string> ttps) {
    StepSpec s;
    s.step = n;
    s.host_name = std::move(host);
    s.agent_image = std::move(agent);
    s.children = std::move(children);
    s.connections = std::move(conns);
    s.duration_min_ms = 15'000;
    s.duration_max_ms = 45'000;
    s.success = success;
    s.ttps = std::move(ttps);
    return s;
}

// Every scenario opens with the same two hops: the SSH server from outside,
// then one internal machine.
std::vector<ScenarioScript> default_scenarios() {
    std::vector<ScenarioScript> out;

    auto entry_steps = [](const std::string& target) {
        std::vector<StepSpec> steps;
        steps.push_back(make_step(1, "ssh-srv", "splunkd_A1.exe", {},
                                  {conn_to(target, 22)}, true, {"T1078", "T1021.004"}));
        return steps;
    };

    {
        ScenarioScript s;
        s.scenario = "Passing the Hash";
        s.version = "v1";
        s.steps = entry_steps("dc2");
        s.steps.push_back(make_step(2, "dc2", "splunkd_A2.exe",
                                    {proc("cmd.exe", {proc("mimikatz.exe")})}, {}, true,
                                    {"T1003.001"}));
        s.steps.push_back(make_step(3, "dc2", "splunkd_A3.exe", {proc("whoami.exe")}, {}, true,
                                    {"T1550.002"}));
        s.steps.push_back(make_step(4, "dc2", "splunkd_A3.exe", {proc("robocopy.exe")},
                                    {conn_to("fs01", 445, 2)}, true, {"T1550.002", "T1021.002"}));
        out.push_back(std::move(s));
    }
    {
        ScenarioScript s;
        s.scenario = "Passing the Hash";
        s.version = "v2";
        s.steps = entry_steps("dc3");
        s.steps.push_back(make_step(2, "dc3", "splunkd_A2.exe",
                                    {proc("cmd.exe", {proc("mimikatz.exe")})}, {}, true,
                                    {"T1003.001"}));
        s.steps.push_back(make_step(3, "dc3", "splunkd_A3.exe", {proc("whoami.exe")}, {}, true,
                                    {"T1550.002"}));
        s.steps.push_back(make_step(4, "dc3", "splunkd_A3.exe", {proc("robocopy.exe")},
                                    {conn_to("fs01", 445, 2)}, true, {"T1550.002", "T1021.002"}));
        out.push_back(std::move(s));
    }
    {
        ScenarioScript s;
        s.scenario = "Asreproastable";
        s.steps = entry_steps("dc1");
        s.steps.push_back(make_step(2, "dc1", "splunkd_A2.exe", {proc("rubeus.exe")},
                                    {conn_to("dc1", 88)}, true, {"T1558.004"}));
        s.steps.push_back(make_step(3, "dc1", "splunkd_A2.exe", {proc("cmd.exe")},
                                    {conn_to("fs01", 445)}, false, {"T1078.002"}));
        out.push_back(std::move(s));
    }
    {
        ScenarioScript s;
        s.scenario = "Pass the TGT";
        s.steps = entry_steps("dc3");
        s.steps.push_back(make_step(2, "dc3", "splunkd_A2.exe",
                                    {proc("cmd.exe", {proc("mimikatz.exe")})}, {}, true,
                                    {"T1003.001"}));
        s.steps.push_back(make_step(3, "dc3", "splunkd_A3.exe", {proc("klist.exe")},
                                    {conn_to("fs01", 445)}, true, {"T1550.003"}));
        out.push_back(std::move(s));
    }
    {
        ScenarioScript s;
        s.scenario = "Attack Delegation";
        s.steps = entry_steps("dc1");
        s.steps.push_back(make_step(2, "dc1", "splunkd_A2.exe", {proc("rubeus.exe")},
                                    {conn_to("dc1", 88)}, true, {"T1558.004"}));
        s.steps.push_back(make_step(3, "dc1", "splunkd_A2.exe", {proc("powershell.exe")},
                                    {conn_to("dc2", 389)}, true, {"T1484"}));
        s.steps.push_back(make_step(4, "dc1", "splunkd_A2.exe", {},
                                    {conn_to("dc2", 445, 2)}, false, {"T1003.006"}));
        out.push_back(std::move(s));
    }
    {
        ScenarioScript s;
        s.scenario = "Password Spray";
        s.steps = entry_steps("ws03");
        s.steps.push_back(make_step(2, "ws03", "splunkd_A2.exe", {proc("7z.exe")}, {}, true,
                                    {"T1110.002"}));
        s.steps.push_back(make_step(3, "ws03", "splunkd_A2.exe", {},
                                    {conn_to("dc2", 445, 3)}, false, {"T1110.003"}));
        out.push_back(std::move(s));
    }
    {
        ScenarioScript s;
        s.scenario = "Silver Ticket";
        s.steps = entry_steps("dc2");
        s.steps.push_back(make_step(2, "dc2", "splunkd_A2.exe",
                                    {proc("cmd.exe", {proc("mimikatz.exe")})}, {}, true,
                                    {"T1003.001"}));
        s.steps.push_back(make_step(3, "dc2", "splunkd_A3.exe", {proc("klist.exe")},
                                    {conn_to("fs01", 445)}, false, {"T1558.002"}));
        out.push_back(std::move(s));
    }
    {
        ScenarioScript s;
        s.scenario = "Golden Ticket";
        s.steps = entry_steps("dc1");
        s.steps.push_back(make_step(2, "dc1", "splunkd_A2.exe",
                                    {proc("cmd.exe", {proc("mimikatz.exe")})}, {}, true,
                                    {"T1003.001"}));
        s.steps.push_back(make_step(3, "dc1", "splunkd_A3.exe", {proc("klist.exe")},
                                    {conn_to("fs01", 445, 2)}, true, {"T1558.001"}));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<AttackPlanEntry> default_attack_plan() {
    // attacks span the final 10 days of the run
    return {
        {"Passing the Hash", "v1", 1, 13, parse_hhmm("10:15")},
        {"Asreproastable", "v1", 1, 14, parse_hhmm("14:30")},
        {"Pass the TGT", "v1", 1, 15, parse_hhmm("09:45")},
        {"Passing the Hash", "v2", 1, 16, parse_hhmm("13:20")},
        {"Attack Delegation", "v1", 1, 17, parse_hhmm("11:05")},
        {"Password Spray", "v1", 1, 18, parse_hhmm("15:40")},
        {"Silver Ticket", "v1", 1, 19, parse_hhmm("10:50")},
        {"Golden Ticket", "v1", 1, 20, parse_hhmm("14:10")},
        {"Passing the Hash", "v1", 2, 20, parse_hhmm("16:30")},
        {"Pass the TGT", "v1", 2, 21, parse_hhmm("11:25")},
        {"Golden Ticket", "v1", 2, 22, parse_hhmm("09:55")},
        {"Password Spray", "v1", 2, 22, parse_hhmm("13:45")},
    };
}

}  // namespace

RunConfig default_config() {
    RunConfig cfg;
    cfg.seed = 1;
    cfg.start_day = Date{2024, 10, 10};
    cfg.num_days = 25;
    cfg.scheduler = default_scheduler();

    const char* departments[] = {"sales", "hr", "it", "finance", "dev"};
    for (int i = 1; i <= 11; ++i) {
        char id[8], host[8];
        std::snprintf(id, sizeof id, "u%02d", i);
        std::snprintf(host, sizeof host, "ws%02d", i);
        cfg.employees.push_back(EmployeeProfile{id, host, departments[(i - 1) % 5],
                                                std::string(departments[(i - 1) % 5]) + "-behavior"});
    }
    cfg.behaviors = {
        office_behavior("sales-behavior", {"outlook.exe", "excel.exe", "chrome.exe"},
                        {"\\\\fs01\\sales\\pipeline.xlsx", "\\\\fs01\\sales\\quota.docx"}),
        office_behavior("hr-behavior", {"outlook.exe", "winword.exe", "chrome.exe"},
                        {"\\\\fs01\\hr\\roster.xlsx", "\\\\fs01\\hr\\policy.docx"}),
        office_behavior("it-behavior", {"powershell.exe", "mmc.exe", "chrome.exe", "ssh.exe"},
                        {"\\\\fs01\\it\\runbook.md", "\\\\fs01\\it\\inventory.csv"}),
        office_behavior("finance-behavior", {"excel.exe", "outlook.exe", "edge.exe"},
                        {"\\\\fs01\\finance\\ledger.xlsx", "\\\\fs01\\finance\\budget.xlsx"}),
        office_behavior("dev-behavior", {"code.exe", "git.exe", "chrome.exe", "cmake.exe"},
                        {"\\\\fs01\\dev\\spec.md", "\\\\fs01\\dev\\notes.txt"}),
    };
    cfg.scenarios = default_scenarios();
    cfg.attack_plan = default_attack_plan();
    cfg.c2.enabled = true;
    cfg.c2.orchestrator = ConnTarget{parse_ipv4("10.10.9.9"), 8888, Protocol::Tcp};
    cfg.c2_filter = {C2Endpoint{parse_ipv4("10.10.9.9"), 8888, 8888}};
    return cfg;
}

// --- config JSON ---

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg = default_config();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("start_day")) cfg.start_day = parse_date(j.at("start_day").get<std::string>());
    if (j.contains("num_days")) cfg.num_days = j.at("num_days").get<int>();
    if (cfg.num_days < 1) throw LmError("num_days must be >= 1");
    if (j.contains("scheduler")) cfg.scheduler = scheduler_config_from_json(j.at("scheduler"));
    if (j.contains("employees")) {
        cfg.employees.clear();
        for (const auto& ej : j.at("employees"))
            cfg.employees.push_back(EmployeeProfile{
                ej.at("employee_id").get<std::string>(), ej.at("host").get<std::string>(),
                ej.value("department", ""), ej.at("behavior").get<std::string>()});
    }
    if (j.contains("behaviors")) {
        cfg.behaviors.clear();
        for (const auto& bj : j.at("behaviors")) cfg.behaviors.push_back(behavior_from_json(bj));
    }
    if (j.contains("scenarios")) {
        cfg.scenarios.clear();
        for (const auto& sj : j.at("scenarios")) cfg.scenarios.push_back(scenario_from_json(sj));
    }
    if (j.contains("attack_plan")) {
        cfg.attack_plan.clear();
        for (const auto& aj : j.at("attack_plan")) {
            AttackPlanEntry e;
            e.scenario = aj.at("scenario").get<std::string>();
            e.version = aj.value("version", "v1");
            e.trial = aj.value("trial", 1);
            e.day_offset = aj.at("day_offset").get<int>();
            e.time_of_day = parse_hhmm(aj.value("time", "10:00"));
            cfg.attack_plan.push_back(std::move(e));
        }
    }
    if (j.contains("telemetry")) {
        const auto& tj = j.at("telemetry");
        if (tj.contains("action_slot_minutes"))
            cfg.telemetry.action_slot_ms = tj.at("action_slot_minutes").get<std::int64_t>() * kMsPerMinute;
        cfg.telemetry.background_noise_weight =
            tj.value("background_noise_weight", cfg.telemetry.background_noise_weight);
        cfg.telemetry.force_pid_reuse = tj.value("force_pid_reuse", cfg.telemetry.force_pid_reuse);
        cfg.telemetry.pid_reuse_modulus = tj.value("pid_reuse_modulus", cfg.telemetry.pid_reuse_modulus);
        if (tj.contains("step_gap_ms")) {
            cfg.telemetry.step_gap_min_ms = tj.at("step_gap_ms").at(0).get<std::int64_t>();
            cfg.telemetry.step_gap_max_ms = tj.at("step_gap_ms").at(1).get<std::int64_t>();
        }
        cfg.telemetry.beacons_per_step = tj.value("beacons_per_step", cfg.telemetry.beacons_per_step);
    }
    if (j.contains("c2")) {
        const auto& cj = j.at("c2");
        cfg.c2.enabled = cj.value("enabled", cfg.c2.enabled);
        if (cj.contains("orchestrator")) {
            const auto& oj = cj.at("orchestrator");
            cfg.c2.orchestrator = ConnTarget{parse_ipv4(oj.at("ip").get<std::string>()),
                                             oj.at("port").get<std::uint16_t>(),
                                             protocol_from_string(oj.value("proto", "tcp"))};
        }
        cfg.c2_filter = {C2Endpoint{cfg.c2.orchestrator.ip, cfg.c2.orchestrator.port,
                                    cfg.c2.orchestrator.port}};
    }
    if (j.contains("c2_endpoints")) {
        cfg.c2_filter.clear();
        for (const auto& ej : j.at("c2_endpoints")) cfg.c2_filter.push_back(parse_c2_endpoint(ej.get<std::string>()));
    }
    if (j.contains("end_extension_ms")) cfg.end_extension_ms = j.at("end_extension_ms").get<std::int64_t>();
    if (j.contains("slack_ms")) cfg.slack_ms = j.at("slack_ms").get<std::int64_t>();
    if (j.contains("strict")) cfg.strict = j.at("strict").get<bool>();
    return cfg;
}

nlohmann::ordered_json run_config_to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["seed"] = cfg.seed;
    j["start_day"] = to_string(cfg.start_day);
    j["num_days"] = cfg.num_days;
    j["scheduler"] = scheduler_config_to_json(cfg.scheduler);
    nlohmann::ordered_json employees = nlohmann::ordered_json::array();
    for (const auto& e : cfg.employees)
        employees.push_back({{"employee_id", e.employee_id},
                             {"host", e.host_name},
                             {"department", e.department},
                             {"behavior", e.behavior_ref}});
    j["employees"] = std::move(employees);
    nlohmann::ordered_json behaviors = nlohmann::ordered_json::array();
    for (const auto& b : cfg.behaviors) behaviors.push_back(behavior_to_json(b));
    j["behaviors"] = std::move(behaviors);
    nlohmann::ordered_json scenarios = nlohmann::ordered_json::array();
    for (const auto& s : cfg.scenarios) scenarios.push_back(scenario_to_json(s));
    j["scenarios"] = std::move(scenarios);
    nlohmann::ordered_json plan = nlohmann::ordered_json::array();
    for (const auto& e : cfg.attack_plan)
        plan.push_back({{"scenario", e.scenario},
                        {"version", e.version},
                        {"trial", e.trial},
                        {"day_offset", e.day_offset},
                        {"time", format_hhmm(e.time_of_day)}});
    j["attack_plan"] = std::move(plan);
    j["telemetry"] = {{"action_slot_minutes", cfg.telemetry.action_slot_ms / kMsPerMinute},
                      {"background_noise_weight", cfg.telemetry.background_noise_weight},
                      {"force_pid_reuse", cfg.telemetry.force_pid_reuse},
                      {"pid_reuse_modulus", cfg.telemetry.pid_reuse_modulus},
                      {"step_gap_ms", {cfg.telemetry.step_gap_min_ms, cfg.telemetry.step_gap_max_ms}},
                      {"beacons_per_step", cfg.telemetry.beacons_per_step}};
    j["c2"] = {{"enabled", cfg.c2.enabled},
               {"orchestrator",
                {{"ip", to_string(cfg.c2.orchestrator.ip)},
                 {"port", cfg.c2.orchestrator.port},
                 {"proto", to_string(cfg.c2.orchestrator.proto)}}}};
    nlohmann::ordered_json eps = nlohmann::ordered_json::array();
    for (const auto& ep : cfg.c2_filter)
        eps.push_back(to_string(ep.ip) + ":" + std::to_string(ep.port_lo) + "-" +
                      std::to_string(ep.port_hi));
    j["c2_endpoints"] = std::move(eps);
    j["end_extension_ms"] = cfg.end_extension_ms;
    j["slack_ms"] = cfg.slack_ms;
    j["strict"] = cfg.strict;
    return j;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LmError("cannot open config " + path.string());
    return run_config_from_json(nlohmann::json::parse(in));
}

nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
    nlohmann::ordered_json j;
    j["seed"] = m.seed;
    j["config_digest"] = m.config_digest;
    j["lambda_unit"] = m.lambda_unit;
    j["counts"] = {{"events", m.events},
                   {"malicious_events", m.malicious_events},
                   {"labels", m.labels},
                   {"flows", m.flows},
                   {"packets", m.packets},
                   {"packet_labels", m.packet_labels}};
    j["malicious_fraction"] = m.malicious_fraction;
    j["c2_removed"] = m.c2_removed;
    j["pid_collisions"] = m.pid_collisions;
    j["end_extension_ms"] = m.end_extension_ms;
    j["slack_ms"] = m.slack_ms;
    j["timings_ms"] = m.stage_timings_ms;
    return j;
}

// --- stages ---

namespace {

void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw LmError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LmError("cannot open " + path.string());
    return nlohmann::json::parse(in);
}

std::vector<TaggedEvent> read_stream(const fs::path& jsonl, const fs::path* tags_path) {
    std::vector<TaggedEvent> out;
    if (!fs::exists(jsonl)) return out;
    std::ifstream in(jsonl);
    if (!in) throw LmError("cannot open " + jsonl.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back({event_from_json(nlohmann::json::parse(line)), std::nullopt});
    }
    if (tags_path && fs::exists(*tags_path)) apply_tags_json(out, read_json_file(*tags_path));
    return out;
}

void write_stream(const fs::path& jsonl, const fs::path* tags_path,
                  std::span<const TaggedEvent> events) {
    fs::create_directories(jsonl.parent_path());
    std::ofstream out(jsonl);
    if (!out) throw LmError("cannot write " + jsonl.string());
    for (const auto& te : events) out << event_to_json(te.event).dump() << '\n';
    if (tags_path) write_json_file(*tags_path, tags_to_json(events));
}

std::vector<std::string> all_hosts(const RunConfig& cfg) {
    std::vector<std::string> hosts;
    for (const auto& e : cfg.employees) hosts.push_back(e.host_name);
    for (const auto& s : cfg.scenarios)
        for (const auto& step : s.steps) {
            hosts.push_back(step.host_name);
            for (const auto& c : step.connections)
                if (c.dst_host) hosts.push_back(*c.dst_host);
        }
    return hosts;
}

const ScenarioScript& find_scenario(const RunConfig& cfg, const AttackPlanEntry& entry) {
    for (const auto& s : cfg.scenarios)
        if (s.scenario == entry.scenario && s.version == entry.version) return s;
    throw LmError("attack plan references unknown scenario '" + entry.scenario + "' version '" +
                  entry.version + "'");
}

}  // namespace

void stage_schedule(const RunConfig& cfg, const fs::path& out) {
    SchedulerConfig sched = cfg.scheduler;
    sched.seed = cfg.seed;
    auto plans = build_day_plans(sched, cfg.employees, cfg.days());
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& p : plans) arr.push_back(day_plan_to_json(p));
    write_json_file(out / "schedules.json", arr);
}

void stage_emit(const RunConfig& cfg, const fs::path& out) {
    // schedules
    ScheduleSet schedules;
    for (const auto& pj : read_json_file(out / "schedules.json"))
        schedules.schedules.push_back(day_plan_from_json(pj).schedule);

    std::map<std::string, BehaviorScript> scripts;
    for (const auto& b : cfg.behaviors) scripts[b.name] = b;

    TelemetryContext ctx(all_hosts(cfg), cfg.telemetry);

    auto benign = emit_benign(schedules, cfg.employees, scripts, ctx, cfg.seed);

    // attack replays, in plan order
    std::set<std::tuple<std::string, std::string, int>> plan_keys;
    std::vector<TaggedEvent> attack_events;
    std::map<std::string, std::vector<AttackStepDescriptor>> inputs_by_host;
    for (const auto& entry : cfg.attack_plan) {
        if (!plan_keys.insert({entry.scenario, entry.version, entry.trial}).second)
            throw LmError("attack plan repeats trial " + std::to_string(entry.trial) + " of " +
                          entry.scenario + "/" + entry.version);
        if (entry.day_offset < 0 || entry.day_offset >= cfg.num_days)
            throw LmError("attack plan day_offset outside the run span");
        const ScenarioScript& scenario = find_scenario(cfg, entry);
        TimeStamp base = date_to_ms(add_days(cfg.start_day, entry.day_offset)) + entry.time_of_day;
        Rng rng(Rng::derive(cfg.seed, "attack/" + entry.scenario + "/" + entry.version,
                            "trial" + std::to_string(entry.trial)));
        auto emission = emit_attack(scenario, entry.trial, base, ctx, rng);
        attack_events.insert(attack_events.end(), emission.events.begin(), emission.events.end());
        for (auto& host : emission.inputs) {
            auto& dst = inputs_by_host[host.host_name];
            dst.insert(dst.end(), host.steps.begin(), host.steps.end());
        }
    }
    finalize_stream(attack_events);

    std::vector<HostAttackInput> inputs;
    for (auto& [host, steps] : inputs_by_host) inputs.push_back({host, std::move(steps)});

    std::vector<TaggedEvent> cc;
    if (cfg.c2.enabled) {
        Rng rng(Rng::derive(cfg.seed, "cc"));
        cc = emit_cc_traffic(inputs, cfg.c2.orchestrator, ctx, rng);
    }

    fs::path private_dir = out / "private";
    write_stream(out / "events_benign.jsonl", nullptr, benign);
    fs::path attack_tags = private_dir / "attack_tags.json";
    write_stream(out / "events_attack.jsonl", &attack_tags, attack_events);
    fs::path cc_tags = private_dir / "cc_tags.json";
    write_stream(out / "events_cc.jsonl", &cc_tags, cc);
    write_json_file(out / "attack_input.json", attack_input_to_json(inputs));
}

void stage_merge(const RunConfig&, const fs::path& out) {
    fs::path private_dir = out / "private";
    fs::path attack_tags = private_dir / "attack_tags.json";
    fs::path cc_tags = private_dir / "cc_tags.json";
    auto benign = read_stream(out / "events_benign.jsonl", nullptr);
    auto attacks = read_stream(out / "events_attack.jsonl", &attack_tags);
    auto cc = read_stream(out / "events_cc.jsonl", &cc_tags);

    auto merged = merge_streams(benign, attacks, cc);
    write_events_jsonl(out / "events.jsonl", strip_tags(merged));

    GroundTruth gt = ground_truth_from_stream(merged);
    auto pcaps = write_host_pcaps(merged, out / "pcap");
    merge_packet_truth(gt, pcaps);
    write_json_file(private_dir / "ground_truth.json", ground_truth_to_json(gt));
}

void stage_forest(const RunConfig& cfg, const fs::path& out) {
    auto store = EventStore::load(out / "events.jsonl");
    auto inputs = attack_input_from_json(read_json_file(out / "attack_input.json"));
    auto result = build_forest(inputs, store, cfg.end_extension_ms);
    write_json_file(out / "forest.json", forest_to_json(result.forest));
    write_json_file(out / "collisions.json", collisions_to_json(result.collisions));
}

std::size_t stage_label_sys(const RunConfig&, const fs::path& out) {
    auto store = EventStore::load(out / "events.jsonl");
    Forest forest = forest_from_json(read_json_file(out / "forest.json"));
    auto labels = label_system_logs(forest, store);
    write_labels_jsonl(out / "labels.jsonl", labels);
    if (fs::exists(out / "collisions.json"))
        return collisions_from_json(read_json_file(out / "collisions.json")).size();
    return 0;
}

std::size_t stage_label_net(const RunConfig& cfg, const fs::path& out) {
    auto store = EventStore::load(out / "events.jsonl");
    Forest forest = forest_from_json(read_json_file(out / "forest.json"));
    auto wfp = label_wfp(forest, store);
    auto filtered = filter_c2_labels(wfp, store, cfg.c2_filter);
    write_labels_jsonl(out / "labels_net.jsonl", filtered.labels);
    auto flows = derive_flows(filtered.labels, store, cfg.slack_ms);
    auto flow_filtered = filter_c2_flows(flows, cfg.c2_filter);
    write_flows_json(out / "flows.json", flow_filtered.flows);
    write_json_file(out / "net_stats.json",
                    {{"c2_removed", filtered.removed},
                     {"c2_removed_flows", flow_filtered.removed},
                     {"slack_ms", cfg.slack_ms}});
    return filtered.removed;
}

void stage_label_pcap(const RunConfig&, const fs::path& out) {
    std::vector<LabeledFlow> flows = load_flows_json(out / "flows.json");
    std::vector<PacketLabel> all;
    fs::path pcap_dir = out / "pcap";
    if (fs::exists(pcap_dir)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(pcap_dir))
            if (entry.path().extension() == ".pcap") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const auto& file : files) {
            auto parsed = load_pcap(file);
            auto labels = label_packets(file.stem().string(), parsed.packets, flows);
            all.insert(all.end(), labels.begin(), labels.end());
        }
    }
    write_packet_labels_jsonl(out / "packet_labels.jsonl", all);
}

void stage_report(const RunConfig&, const fs::path& out) {
    auto labels = load_labels_jsonl(out / "labels.jsonl");
    Forest forest = forest_from_json(read_json_file(out / "forest.json"));
    fs::path dir = out / "report";
    write_daily_steps(report_daily_steps(labels, forest), dir / "daily_steps.csv",
                      dir / "daily_steps.svg");
    write_timeline(report_timeline(labels, forest), dir / "timeline.csv", dir / "timeline.svg");
    write_scenario_versions(report_scenario_versions(labels), dir / "scenario_versions.csv",
                            dir / "scenario_versions.svg");
    write_sizes(report_sizes(out), dir / "sizes.csv");
}

RunManifest run_pipeline(const RunConfig& cfg, const fs::path& out) {
    fs::create_directories(out);
    RunManifest m;
    m.seed = cfg.seed;
    m.config_digest = fnv1a_hex(run_config_to_json(cfg).dump());
    m.lambda_unit = to_string(cfg.scheduler.lambda_unit);
    m.end_extension_ms = cfg.end_extension_ms;
    m.slack_ms = cfg.slack_ms;

    auto timed = [&m](const char* name, auto&& fn) {
        auto t0 = std::chrono::steady_clock::now();
        try {
            fn();
        } catch (const std::exception& ex) {
            throw LmError(std::string("stage ") + name + ": " + ex.what());
        }
        auto t1 = std::chrono::steady_clock::now();
        m.stage_timings_ms[name] =
            std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(t1 - t0).count();
    };

    std::size_t c2_removed = 0;
    timed("schedule", [&] { stage_schedule(cfg, out); });
    timed("emit", [&] { stage_emit(cfg, out); });
    timed("merge", [&] { stage_merge(cfg, out); });
    timed("forest", [&] { stage_forest(cfg, out); });
    timed("label-sys", [&] { m.pid_collisions = stage_label_sys(cfg, out); });
    timed("label-net", [&] { c2_removed = stage_label_net(cfg, out); });
    timed("label-pcap", [&] { stage_label_pcap(cfg, out); });
    timed("report", [&] { stage_report(cfg, out); });
    m.c2_removed = c2_removed;

    auto store = EventStore::load(out / "events.jsonl");
    m.events = store.total_events();
    auto labels = load_labels_jsonl(out / "labels.jsonl");
    m.labels = labels.size();
    std::set<EventRef> malicious;
    for (const auto& l : labels) malicious.insert(l.ref());
    m.malicious_events = malicious.size();
    m.malicious_fraction =
        m.events == 0 ? 0.0 : static_cast<double>(m.malicious_events) / static_cast<double>(m.events);
    m.flows = load_flows_json(out / "flows.json").size();
    fs::path pcap_dir = out / "pcap";
    if (fs::exists(pcap_dir))
        for (const auto& entry : fs::directory_iterator(pcap_dir))
            if (entry.path().extension() == ".pcap") m.packets += load_pcap(entry.path()).packets.size();
    m.packet_labels = load_packet_labels_jsonl(out / "packet_labels.jsonl").size();

    write_json_file(out / "manifest.json", manifest_to_json(m));
    return m;
}

}  // namespace lmforge
