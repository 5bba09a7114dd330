#include "lmforge/telemetry.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "lmforge/ingest.hpp"

namespace lmforge {

TelemetryContext::TelemetryContext(std::vector<std::string> hosts, TelemetryConfig cfg)
    : cfg_(cfg), hosts_(std::move(hosts)) {
    std::sort(hosts_.begin(), hosts_.end());
    hosts_.erase(std::unique(hosts_.begin(), hosts_.end()), hosts_.end());
    std::uint32_t base = (10u << 24) | (10u << 16);  // 10.10.0.0/16
    std::uint32_t n = 10;
    for (const auto& h : hosts_) {
        addresses_[h] = IPv4{base | ((n / 200) << 8) | (10 + n % 200)};
        ++n;
    }
}

IPv4 TelemetryContext::ip_for(const std::string& host) const {
    auto it = addresses_.find(host);
    if (it == addresses_.end()) throw LmError("unknown host '" + host + "'");
    return it->second;
}

Pid TelemetryContext::alloc_pid(const std::string& host) {
    if (cfg_.force_pid_reuse) {
        auto& serial = pid_serial_[host];
        return 1000 + static_cast<Pid>(serial++ % static_cast<std::uint64_t>(cfg_.pid_reuse_modulus));
    }
    auto it = next_pid_.emplace(host, 1000).first;
    return it->second++;
}

std::uint16_t TelemetryContext::alloc_port(const std::string& host) {
    auto it = next_port_.emplace(host, 49152u).first;
    std::uint32_t p = it->second++;
    if (it->second > 65535u) it->second = 49152u;
    return static_cast<std::uint16_t>(p);
}

void finalize_stream(std::vector<TaggedEvent>& events) {
    std::stable_sort(events.begin(), events.end(), [](const TaggedEvent& a, const TaggedEvent& b) {
        return std::tie(a.event.host_name, a.event.log_name, a.event.timestamp) <
               std::tie(b.event.host_name, b.event.log_name, b.event.timestamp);
    });
    std::map<std::pair<std::string, std::string>, std::uint64_t> counters;
    for (auto& te : events)
        te.event.record_id = ++counters[{te.event.host_name, te.event.log_name}];
}

std::vector<HostEvent> strip_tags(std::span<const TaggedEvent> events) {
    std::vector<HostEvent> out;
    out.reserve(events.size());
    for (const auto& te : events) out.push_back(te.event);
    return out;
}

namespace {

HostEvent make_4688(const std::string& host, TimeStamp ts, Pid pid, Pid ppid, std::string image) {
    HostEvent e;
    e.host_name = host;
    e.event_id = kEventProcessCreate;
    e.timestamp = ts;
    e.pid = pid;
    e.parent_pid = ppid;
    e.image = std::move(image);
    return e;
}

HostEvent make_5156(const std::string& host, TimeStamp ts, Pid pid, ConnectionFields net) {
    HostEvent e;
    e.host_name = host;
    e.event_id = kEventWfpConnection;
    e.timestamp = ts;
    e.pid = pid;
    e.net = net;
    return e;
}

ConnectionFields outbound(TelemetryContext& ctx, const std::string& host, const ConnTarget& target) {
    ConnectionFields c;
    c.direction = Direction::Outbound;
    c.src_ip = ctx.ip_for(host);
    c.src_port = ctx.alloc_port(host);
    c.dst_ip = target.ip;
    c.dst_port = target.port;
    c.protocol = target.proto;
    return c;
}

const std::vector<ConnTarget> kNoiseTargets = {
    {IPv4{(10u << 24) | (10u << 16) | 53}, 53, Protocol::Udp},
    {IPv4{(10u << 24) | (10u << 16) | 200}, 445, Protocol::Tcp},
    {IPv4{(10u << 24) | (10u << 16) | 80}, 80, Protocol::Tcp},
};

}  // namespace

std::vector<TaggedEvent> emit_benign(const ScheduleSet& schedules,
                                     const std::vector<EmployeeProfile>& profiles,
                                     const std::map<std::string, BehaviorScript>& scripts,
                                     TelemetryContext& ctx, std::uint64_t seed) {
    std::map<std::string, const EmployeeProfile*> by_id;
    for (const auto& p : profiles) by_id[p.employee_id] = &p;

    std::vector<TaggedEvent> out;
    for (const auto& sched : schedules.schedules) {
        auto pit = by_id.find(sched.employee_id);
        if (pit == by_id.end())
            throw LmError("schedule references unknown employee '" + sched.employee_id + "'");
        const EmployeeProfile& prof = *pit->second;
        auto sit = scripts.find(prof.behavior_ref);
        if (sit == scripts.end())
            throw LmError("employee '" + prof.employee_id + "' references unknown behavior '" +
                          prof.behavior_ref + "'");
        const BehaviorScript& script = sit->second;
        const std::string& host = prof.host_name;

        Rng rng(Rng::derive(seed, "benign/" + sched.employee_id, to_string(sched.day)));
        for (const auto& session : sched.sessions) {
            Pid shell = ctx.alloc_pid(host);
            HostEvent logon;
            logon.host_name = host;
            logon.event_id = kEventLogon;
            logon.timestamp = session.start;
            logon.pid = shell;
            logon.attrs["employee"] = sched.employee_id;
            out.push_back({logon, std::nullopt});
            out.push_back(
                {make_4688(host, session.start, shell, TelemetryContext::kWinlogonPid, "explorer.exe"),
                 std::nullopt});

            const std::int64_t slot = ctx.config().action_slot_ms;
            for (TimeStamp t = session.start; t < session.end; t += slot) {
                TimeStamp slot_end = std::min<TimeStamp>(t + slot, session.end);
                for (const auto& action : script.actions) {
                    if (!rng.bernoulli(action.weight)) continue;
                    TimeStamp ts = t + rng.uniform_int(0, slot_end - t);
                    switch (action.kind) {
                        case ActionKind::SpawnProcess: {
                            if (action.images.empty()) break;
                            const auto& image = action.images[static_cast<std::size_t>(
                                rng.uniform_int(0, static_cast<std::int64_t>(action.images.size()) - 1))];
                            out.push_back({make_4688(host, ts, ctx.alloc_pid(host), shell, image),
                                           std::nullopt});
                            break;
                        }
                        case ActionKind::OpenConnection: {
                            if (action.targets.empty()) break;
                            const auto& target = action.targets[static_cast<std::size_t>(
                                rng.uniform_int(0, static_cast<std::int64_t>(action.targets.size()) - 1))];
                            out.push_back(
                                {make_5156(host, ts, shell, outbound(ctx, host, target)), std::nullopt});
                            break;
                        }
                        case ActionKind::FileAccess: {
                            if (action.paths.empty()) break;
                            HostEvent e;
                            e.host_name = host;
                            e.event_id = kEventObjectAccess;
                            e.timestamp = ts;
                            e.pid = shell;
                            e.attrs["object"] = action.paths[static_cast<std::size_t>(
                                rng.uniform_int(0, static_cast<std::int64_t>(action.paths.size()) - 1))];
                            out.push_back({e, std::nullopt});
                            break;
                        }
                    }
                }
                // background 5156 noise keeps network labeling honest even
                // for connection-free scripts
                if (rng.bernoulli(ctx.config().background_noise_weight)) {
                    TimeStamp ts = t + rng.uniform_int(0, slot_end - t);
                    const auto& target = kNoiseTargets[static_cast<std::size_t>(
                        rng.uniform_int(0, static_cast<std::int64_t>(kNoiseTargets.size()) - 1))];
                    out.push_back(
                        {make_5156(host, ts, shell, outbound(ctx, host, target)), std::nullopt});
                }
            }

            HostEvent logoff;
            logoff.host_name = host;
            logoff.event_id = kEventLogoff;
            logoff.timestamp = session.end;
            logoff.pid = shell;
            logoff.attrs["employee"] = sched.employee_id;
            out.push_back({logoff, std::nullopt});
        }
    }
    finalize_stream(out);
    return out;
}

namespace {

struct StepEmitState {
    TimeStamp min_ts = 0;
    TimeStamp max_ts = 0;
    bool any = false;

    void see(TimeStamp ts) {
        if (!any) {
            min_ts = max_ts = ts;
            any = true;
        } else {
            min_ts = std::min(min_ts, ts);
            max_ts = std::max(max_ts, ts);
        }
    }
};

void spawn_subtree(const ProcTemplate& tpl, const std::string& host, Pid parent, TimeStamp parent_ts,
                   TimeStamp hard_end, const StepKey& key, TelemetryContext& ctx, Rng& rng,
                   std::vector<TaggedEvent>& out, StepEmitState& state, Pid& last_child,
                   TimeStamp& last_child_ts) {
    TimeStamp lo = std::min(parent_ts + 1, hard_end);
    TimeStamp ts = lo + rng.uniform_int(0, std::max<std::int64_t>(0, hard_end - lo));
    Pid pid = ctx.alloc_pid(host);
    out.push_back({make_4688(host, ts, pid, parent, tpl.image), key});
    state.see(ts);
    last_child = pid;
    last_child_ts = ts;
    for (const auto& child : tpl.children)
        spawn_subtree(child, host, pid, ts, hard_end, key, ctx, rng, out, state, last_child,
                      last_child_ts);
}

}  // namespace

AttackEmission emit_attack(const ScenarioScript& scenario, int trial, TimeStamp base_time,
                           TelemetryContext& ctx, Rng& rng) {
    for (std::size_t i = 0; i < scenario.steps.size(); ++i)
        if (scenario.steps[i].step != static_cast<int>(i) + 1)
            throw LmError("scenario '" + scenario.scenario + "' step numbering not contiguous from 1");

    AttackEmission result;
    std::map<std::string, std::vector<AttackStepDescriptor>> per_host;
    // (host, agent image) -> (pid, creation ts); one trial = one intrusion,
    // agents persist across its steps
    std::map<std::pair<std::string, std::string>, std::pair<Pid, TimeStamp>> agents;
    std::map<std::string, Pid> last_agent_on_host;

    TimeStamp t = base_time;
    for (const auto& step : scenario.steps) {
        StepKey key{scenario.scenario, scenario.version, trial, step.step};
        StepLabel label{scenario.scenario, scenario.version, trial, step.step, step.success,
                        step.ttps};
        std::int64_t duration = rng.uniform_int(step.duration_min_ms, step.duration_max_ms);
        TimeStamp hard_end = t + duration;
        StepEmitState state;

        auto agent_key = std::make_pair(step.host_name, step.agent_image);
        auto ait = agents.find(agent_key);
        Pid agent_pid;
        TimeStamp agent_ts;
        if (ait == agents.end()) {
            agent_pid = ctx.alloc_pid(step.host_name);
            agent_ts = t;
            Pid parent = TelemetryContext::kServicesPid;
            if (auto pit = last_agent_on_host.find(step.host_name); pit != last_agent_on_host.end())
                parent = pit->second;
            result.events.push_back(
                {make_4688(step.host_name, agent_ts, agent_pid, parent, step.agent_image), key});
            state.see(agent_ts);
            agents[agent_key] = {agent_pid, agent_ts};
        } else {
            agent_pid = ait->second.first;
            agent_ts = ait->second.second;
        }
        last_agent_on_host[step.host_name] = agent_pid;

        Pid last_child = agent_pid;
        TimeStamp last_child_ts = t;
        for (const auto& tpl : step.children)
            spawn_subtree(tpl, step.host_name, agent_pid, t, hard_end, key, ctx, rng, result.events,
                          state, last_child, last_child_ts);

        for (const auto& conn : step.connections) {
            ConnTarget target;
            if (conn.dst_ip)
                target.ip = *conn.dst_ip;
            else if (conn.dst_host)
                target.ip = ctx.ip_for(*conn.dst_host);
            else
                throw LmError("connection template without destination in scenario '" +
                              scenario.scenario + "'");
            target.port = conn.dst_port;
            target.proto = conn.proto;
            Pid src = conn.from_agent ? agent_pid : last_child;
            // the connection must postdate its source process
            TimeStamp src_ts = conn.from_agent ? t : last_child_ts;
            for (int i = 0; i < conn.count; ++i) {
                TimeStamp lo = std::min<TimeStamp>(src_ts + 1, hard_end);
                TimeStamp ts = lo + rng.uniform_int(0, std::max<std::int64_t>(0, hard_end - lo));
                result.events.push_back(
                    {make_5156(step.host_name, ts, src, outbound(ctx, step.host_name, target)), key});
                state.see(ts);
            }
        }

        if (!state.any)
            throw LmError("step " + std::to_string(step.step) + " of scenario '" + scenario.scenario +
                          "' emits no telemetry");

        AttackStepDescriptor d;
        d.pid = agent_pid;
        d.window = {state.min_ts, state.max_ts};
        d.label = label;
        per_host[step.host_name].push_back(d);

        t = state.max_ts + rng.uniform_int(ctx.config().step_gap_min_ms, ctx.config().step_gap_max_ms);
    }

    for (auto& [host, steps] : per_host) result.inputs.push_back({host, std::move(steps)});
    return result;
}

std::vector<TaggedEvent> emit_cc_traffic(const std::vector<HostAttackInput>& attack_hosts,
                                         const ConnTarget& orchestrator, TelemetryContext& ctx,
                                         Rng& rng) {
    std::vector<TaggedEvent> out;
    const int beacons = ctx.config().beacons_per_step;
    for (const auto& host : attack_hosts) {
        for (const auto& d : host.steps) {
            std::int64_t len = d.window.length();
            for (int k = 0; k < beacons; ++k) {
                // one beacon per equal slice of the window, jittered
                TimeStamp slice_lo = d.window.start + (len * k) / beacons;
                TimeStamp slice_hi = d.window.start + (len * (k + 1)) / beacons;
                TimeStamp ts = slice_lo + rng.uniform_int(0, std::max<std::int64_t>(0, slice_hi - slice_lo));
                out.push_back({make_5156(host.host_name, ts, d.pid,
                                         outbound(ctx, host.host_name, orchestrator)),
                               d.label.key()});
            }
        }
    }
    finalize_stream(out);
    return out;
}

std::vector<TaggedEvent> merge_streams(std::span<const TaggedEvent> benign,
                                       std::span<const TaggedEvent> attacks,
                                       std::span<const TaggedEvent> cc) {
    struct Entry {
        const TaggedEvent* te;
        int priority;
        std::size_t pos;
    };
    std::vector<Entry> entries;
    entries.reserve(benign.size() + attacks.size() + cc.size());
    auto add = [&entries](std::span<const TaggedEvent> stream, int priority) {
        for (std::size_t i = 0; i < stream.size(); ++i) entries.push_back({&stream[i], priority, i});
    };
    add(benign, 0);
    add(attacks, 1);
    add(cc, 2);
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.te->event.host_name, a.te->event.log_name, a.te->event.timestamp,
                        a.priority, a.pos) < std::tie(b.te->event.host_name, b.te->event.log_name,
                                                      b.te->event.timestamp, b.priority, b.pos);
    });
    std::vector<TaggedEvent> out;
    out.reserve(entries.size());
    std::map<std::pair<std::string, std::string>, std::uint64_t> counters;
    for (const auto& e : entries) {
        out.push_back(*e.te);
        out.back().event.record_id = ++counters[{e.te->event.host_name, e.te->event.log_name}];
    }
    return out;
}

GroundTruth ground_truth_from_stream(std::span<const TaggedEvent> finalized) {
    GroundTruth gt;
    for (const auto& te : finalized) {
        if (!te.step) continue;
        gt.events[EventRef{te.event.host_name, te.event.log_name, te.event.record_id}] = *te.step;
        if (te.event.event_id == kEventWfpConnection && te.event.net) {
            auto key = std::make_pair(canonicalize_flow_key(*te.event.net), *te.step);
            auto [it, inserted] = gt.flows.emplace(key, Interval{te.event.timestamp, te.event.timestamp});
            if (!inserted) {
                it->second.start = std::min(it->second.start, te.event.timestamp);
                it->second.end = std::max(it->second.end, te.event.timestamp);
            }
        }
    }
    return gt;
}

PcapSynthesis write_host_pcaps(std::span<const TaggedEvent> merged,
                               const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    struct Pending {
        RawPacket pkt;
        std::optional<StepKey> tag;
    };
    std::map<std::string, std::vector<Pending>> per_host;
    std::size_t serial = 0;
    for (const auto& te : merged) {
        if (te.event.event_id != kEventWfpConnection || !te.event.net) continue;
        const ConnectionFields& c = *te.event.net;
        TimeStamp reply_delta = 1 + static_cast<TimeStamp>(serial % 40);
        per_host[te.event.host_name].push_back({{te.event.timestamp, build_frame(c)}, te.step});
        per_host[te.event.host_name].push_back(
            {{te.event.timestamp + reply_delta, build_frame(reversed(c))}, te.step});
        ++serial;
    }

    PcapSynthesis synth;
    for (auto& [host, pending] : per_host) {
        std::stable_sort(pending.begin(), pending.end(),
                         [](const Pending& a, const Pending& b) { return a.pkt.ts < b.pkt.ts; });
        std::vector<RawPacket> packets;
        auto& tags = synth.packet_tags[host];
        packets.reserve(pending.size());
        tags.reserve(pending.size());
        for (auto& p : pending) {
            packets.push_back(std::move(p.pkt));
            tags.push_back(p.tag);
        }
        auto bytes = encode_pcap(packets);
        std::ofstream out(dir / (host + ".pcap"), std::ios::binary);
        if (!out) throw LmError("cannot write pcap for host " + host);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    return synth;
}

void merge_packet_truth(GroundTruth& gt, const PcapSynthesis& pcaps) {
    for (const auto& [host, tags] : pcaps.packet_tags)
        for (std::size_t i = 0; i < tags.size(); ++i)
            if (tags[i]) gt.packets[host][i] = *tags[i];
}

// --- JSON ---

namespace {

ActionKind action_kind_from_string(const std::string& s) {
    if (s == "spawn_process") return ActionKind::SpawnProcess;
    if (s == "open_connection") return ActionKind::OpenConnection;
    if (s == "file_access") return ActionKind::FileAccess;
    throw LmError("bad action kind '" + s + "'");
}

std::string to_string(ActionKind k) {
    switch (k) {
        case ActionKind::SpawnProcess: return "spawn_process";
        case ActionKind::OpenConnection: return "open_connection";
        case ActionKind::FileAccess: return "file_access";
    }
    return "spawn_process";
}

ProcTemplate proc_template_from_json(const nlohmann::json& j) {
    ProcTemplate t;
    t.image = j.at("image").get<std::string>();
    if (j.contains("children"))
        for (const auto& c : j.at("children")) t.children.push_back(proc_template_from_json(c));
    return t;
}

nlohmann::ordered_json proc_template_to_json(const ProcTemplate& t) {
    nlohmann::ordered_json j;
    j["image"] = t.image;
    if (!t.children.empty()) {
        nlohmann::ordered_json kids = nlohmann::ordered_json::array();
        for (const auto& c : t.children) kids.push_back(proc_template_to_json(c));
        j["children"] = std::move(kids);
    }
    return j;
}

}  // namespace

BehaviorScript behavior_from_json(const nlohmann::json& j) {
    BehaviorScript b;
    b.name = j.at("name").get<std::string>();
    for (const auto& aj : j.at("actions")) {
        ActionSpec a;
        a.kind = action_kind_from_string(aj.at("kind").get<std::string>());
        a.weight = aj.at("weight").get<double>();
        if (a.weight < 0 || a.weight > 1) throw LmError("action weight out of [0,1]");
        if (aj.contains("images")) a.images = aj.at("images").get<std::vector<std::string>>();
        if (aj.contains("paths")) a.paths = aj.at("paths").get<std::vector<std::string>>();
        if (aj.contains("targets"))
            for (const auto& tj : aj.at("targets"))
                a.targets.push_back(ConnTarget{parse_ipv4(tj.at("ip").get<std::string>()),
                                               tj.at("port").get<std::uint16_t>(),
                                               protocol_from_string(tj.value("proto", "tcp"))});
        b.actions.push_back(std::move(a));
    }
    return b;
}

nlohmann::ordered_json behavior_to_json(const BehaviorScript& b) {
    nlohmann::ordered_json j;
    j["name"] = b.name;
    nlohmann::ordered_json actions = nlohmann::ordered_json::array();
    for (const auto& a : b.actions) {
        nlohmann::ordered_json aj;
        aj["kind"] = to_string(a.kind);
        aj["weight"] = a.weight;
        if (!a.images.empty()) aj["images"] = a.images;
        if (!a.paths.empty()) aj["paths"] = a.paths;
        if (!a.targets.empty()) {
            nlohmann::ordered_json targets = nlohmann::ordered_json::array();
            for (const auto& t : a.targets)
                targets.push_back({{"ip", to_string(t.ip)},
                                   {"port", t.port},
                                   {"proto", to_string(t.proto)}});
            aj["targets"] = std::move(targets);
        }
        actions.push_back(std::move(aj));
    }
    j["actions"] = std::move(actions);
    return j;
}

ScenarioScript scenario_from_json(const nlohmann::json& j) {
    ScenarioScript s;
    s.scenario = j.at("scenario").get<std::string>();
    s.version = j.value("version", "v1");
    for (const auto& sj : j.at("steps")) {
        StepSpec step;
        step.step = sj.at("step").get<int>();
        step.host_name = sj.at("host").get<std::string>();
        step.agent_image = sj.at("agent_image").get<std::string>();
        if (sj.contains("children"))
            for (const auto& cj : sj.at("children")) step.children.push_back(proc_template_from_json(cj));
        if (sj.contains("connections")) {
            for (const auto& cj : sj.at("connections")) {
                ConnTemplate c;
                if (cj.contains("dst_host")) c.dst_host = cj.at("dst_host").get<std::string>();
                if (cj.contains("dst_ip")) c.dst_ip = parse_ipv4(cj.at("dst_ip").get<std::string>());
                c.dst_port = cj.at("dst_port").get<std::uint16_t>();
                c.proto = protocol_from_string(cj.value("proto", "tcp"));
                c.count = cj.value("count", 1);
                c.from_agent = cj.value("from_agent", true);
                step.connections.push_back(std::move(c));
            }
        }
        if (sj.contains("duration_ms")) {
            step.duration_min_ms = sj.at("duration_ms").at(0).get<std::int64_t>();
            step.duration_max_ms = sj.at("duration_ms").at(1).get<std::int64_t>();
        }
        step.success = sj.value("success", true);
        if (sj.contains("ttps")) step.ttps = sj.at("ttps").get<std::vector<std::string>>();
        s.steps.push_back(std::move(step));
    }
    return s;
}

nlohmann::ordered_json scenario_to_json(const ScenarioScript& s) {
    nlohmann::ordered_json j;
    j["scenario"] = s.scenario;
    j["version"] = s.version;
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const auto& step : s.steps) {
        nlohmann::ordered_json sj;
        sj["step"] = step.step;
        sj["host"] = step.host_name;
        sj["agent_image"] = step.agent_image;
        if (!step.children.empty()) {
            nlohmann::ordered_json kids = nlohmann::ordered_json::array();
            for (const auto& c : step.children) kids.push_back(proc_template_to_json(c));
            sj["children"] = std::move(kids);
        }
        if (!step.connections.empty()) {
            nlohmann::ordered_json conns = nlohmann::ordered_json::array();
            for (const auto& c : step.connections) {
                nlohmann::ordered_json cj;
                if (c.dst_host) cj["dst_host"] = *c.dst_host;
                if (c.dst_ip) cj["dst_ip"] = to_string(*c.dst_ip);
                cj["dst_port"] = c.dst_port;
                cj["proto"] = to_string(c.proto);
                cj["count"] = c.count;
                cj["from_agent"] = c.from_agent;
                conns.push_back(std::move(cj));
            }
            sj["connections"] = std::move(conns);
        }
        sj["duration_ms"] = {step.duration_min_ms, step.duration_max_ms};
        sj["success"] = step.success;
        sj["ttps"] = step.ttps;
        steps.push_back(std::move(sj));
    }
    j["steps"] = std::move(steps);
    return j;
}

namespace {

nlohmann::ordered_json step_key_to_json(const StepKey& k) {
    return {{"scenario", k.scenario}, {"version", k.version}, {"trial", k.trial}, {"step", k.step}};
}

StepKey step_key_from_json(const nlohmann::json& j) {
    return StepKey{j.at("scenario").get<std::string>(), j.at("version").get<std::string>(),
                   j.at("trial").get<int>(), j.at("step").get<int>()};
}

}  // namespace

nlohmann::ordered_json ground_truth_to_json(const GroundTruth& gt) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json events = nlohmann::ordered_json::array();
    for (const auto& [ref, key] : gt.events) {
        nlohmann::ordered_json ej;
        ej["host"] = ref.host_name;
        ej["log"] = ref.log_name;
        ej["record_id"] = ref.record_id;
        nlohmann::ordered_json kj = step_key_to_json(key);
        for (auto& [k, v] : kj.items()) ej[k] = v;
        events.push_back(std::move(ej));
    }
    j["events"] = std::move(events);

    nlohmann::ordered_json flows = nlohmann::ordered_json::array();
    for (const auto& [key, window] : gt.flows) {
        nlohmann::ordered_json fj;
        fj["ip_a"] = to_string(key.first.a.ip);
        fj["port_a"] = key.first.a.port;
        fj["ip_b"] = to_string(key.first.b.ip);
        fj["port_b"] = key.first.b.port;
        fj["proto"] = to_string(key.first.protocol);
        fj["t_s"] = window.start;
        fj["t_e"] = window.end;
        nlohmann::ordered_json kj = step_key_to_json(key.second);
        for (auto& [k, v] : kj.items()) fj[k] = v;
        flows.push_back(std::move(fj));
    }
    j["flows"] = std::move(flows);

    nlohmann::ordered_json packets = nlohmann::ordered_json::array();
    for (const auto& [pcap, indexes] : gt.packets) {
        for (const auto& [idx, key] : indexes) {
            nlohmann::ordered_json pj;
            pj["pcap"] = pcap;
            pj["index"] = idx;
            nlohmann::ordered_json kj = step_key_to_json(key);
            for (auto& [k, v] : kj.items()) pj[k] = v;
            packets.push_back(std::move(pj));
        }
    }
    j["packets"] = std::move(packets);
    return j;
}

GroundTruth ground_truth_from_json(const nlohmann::json& j) {
    GroundTruth gt;
    for (const auto& ej : j.at("events"))
        gt.events[EventRef{ej.at("host").get<std::string>(), ej.at("log").get<std::string>(),
                           ej.at("record_id").get<std::uint64_t>()}] = step_key_from_json(ej);
    for (const auto& fj : j.at("flows")) {
        FlowKey key;
        key.a = Endpoint{parse_ipv4(fj.at("ip_a").get<std::string>()),
                         fj.at("port_a").get<std::uint16_t>()};
        key.b = Endpoint{parse_ipv4(fj.at("ip_b").get<std::string>()),
                         fj.at("port_b").get<std::uint16_t>()};
        key.protocol = protocol_from_string(fj.at("proto").get<std::string>());
        gt.flows[{key, step_key_from_json(fj)}] =
            Interval{fj.at("t_s").get<TimeStamp>(), fj.at("t_e").get<TimeStamp>()};
    }
    for (const auto& pj : j.at("packets"))
        gt.packets[pj.at("pcap").get<std::string>()][pj.at("index").get<std::size_t>()] =
            step_key_from_json(pj);
    return gt;
}

nlohmann::ordered_json tags_to_json(std::span<const TaggedEvent> events) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& te : events) {
        if (te.step)
            arr.push_back(step_key_to_json(*te.step));
        else
            arr.push_back(nullptr);
    }
    return arr;
}

void apply_tags_json(std::vector<TaggedEvent>& events, const nlohmann::json& j) {
    if (j.size() != events.size()) throw LmError("tag sidecar does not match stream length");
    for (std::size_t i = 0; i < events.size(); ++i)
        events[i].step = j[i].is_null() ? std::nullopt : std::optional<StepKey>(step_key_from_json(j[i]));
}

}  // namespace lmforge
