#include "lmforge/core.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lmforge {

namespace {

std::chrono::year_month_day to_ymd(const Date& d) {
    return std::chrono::year_month_day{std::chrono::year{d.year}, std::chrono::month{d.month},
                                       std::chrono::day{d.day}};
}

int parse_int_field(const std::string& s, std::size_t pos, std::size_t len, const char* what) {
    int out = 0;
    auto first = s.data() + pos;
    auto [ptr, ec] = std::from_chars(first, first + len, out);
    if (ec != std::errc{} || ptr != first + len)
        throw LmError(std::string("bad ") + what + " in '" + s + "'");
    return out;
}

}  // namespace

TimeStamp date_to_ms(const Date& d) {
    auto ymd = to_ymd(d);
    if (!ymd.ok()) throw LmError("invalid date " + to_string(d));
    std::chrono::sys_days sd{ymd};
    return static_cast<TimeStamp>(sd.time_since_epoch().count()) * kMsPerDay;
}

Date date_from_ms(TimeStamp ms) {
    auto days = ms >= 0 ? ms / kMsPerDay : (ms - (kMsPerDay - 1)) / kMsPerDay;
    std::chrono::sys_days sd{std::chrono::days{days}};
    std::chrono::year_month_day ymd{sd};
    return Date{int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day())};
}

Date add_days(const Date& d, int n) {
    std::chrono::sys_days sd{to_ymd(d)};
    std::chrono::year_month_day ymd{sd + std::chrono::days{n}};
    return Date{int(ymd.year()), unsigned(ymd.month()), unsigned(ymd.day())};
}

int weekday_index(const Date& d) {
    std::chrono::weekday wd{std::chrono::sys_days{to_ymd(d)}};
    return static_cast<int>(wd.c_encoding());
}

std::string to_string(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", d.year, d.month, d.day);
    return buf;
}

Date parse_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw LmError("bad date '" + s + "', want YYYY-MM-DD");
    Date d;
    d.year = parse_int_field(s, 0, 4, "year");
    d.month = static_cast<unsigned>(parse_int_field(s, 5, 2, "month"));
    d.day = static_cast<unsigned>(parse_int_field(s, 8, 2, "day"));
    if (!to_ymd(d).ok()) throw LmError("invalid date '" + s + "'");
    return d;
}

TimeStamp parse_hhmm(const std::string& s) {
    if (s.size() != 5 || s[2] != ':') throw LmError("bad time '" + s + "', want HH:MM");
    int h = parse_int_field(s, 0, 2, "hour");
    int m = parse_int_field(s, 3, 2, "minute");
    if (h < 0 || h > 23 || m < 0 || m > 59) throw LmError("time out of range '" + s + "'");
    return h * kMsPerHour + m * kMsPerMinute;
}

std::string format_hhmm(TimeStamp ms_of_day) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld", static_cast<long long>(ms_of_day / kMsPerHour),
                  static_cast<long long>((ms_of_day % kMsPerHour) / kMsPerMinute));
    return buf;
}

IPv4 parse_ipv4(const std::string& s) {
    std::uint32_t value = 0;
    std::size_t pos = 0;
    for (int octet = 0; octet < 4; ++octet) {
        if (pos >= s.size()) throw LmError("bad IPv4 '" + s + "'");
        std::uint32_t part = 0;
        auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), part);
        if (ec != std::errc{} || part > 255) throw LmError("bad IPv4 '" + s + "'");
        value = (value << 8) | part;
        pos = static_cast<std::size_t>(ptr - s.data());
        if (octet < 3) {
            if (pos >= s.size() || s[pos] != '.') throw LmError("bad IPv4 '" + s + "'");
            ++pos;
        }
    }
    if (pos != s.size()) throw LmError("bad IPv4 '" + s + "'");
    return IPv4{value};
}

std::string to_string(const IPv4& ip) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (ip.value >> 24) & 0xff, (ip.value >> 16) & 0xff,
                  (ip.value >> 8) & 0xff, ip.value & 0xff);
    return buf;
}

std::string to_string(Direction d) { return d == Direction::Inbound ? "inbound" : "outbound"; }
std::string to_string(Protocol p) { return p == Protocol::Tcp ? "tcp" : "udp"; }

Direction direction_from_string(const std::string& s) {
    if (s == "inbound") return Direction::Inbound;
    if (s == "outbound") return Direction::Outbound;
    throw LmError("bad direction '" + s + "'");
}

Protocol protocol_from_string(const std::string& s) {
    if (s == "tcp") return Protocol::Tcp;
    if (s == "udp") return Protocol::Udp;
    throw LmError("bad protocol '" + s + "'");
}

ConnectionFields reversed(const ConnectionFields& c) {
    ConnectionFields r = c;
    r.direction = c.direction == Direction::Inbound ? Direction::Outbound : Direction::Inbound;
    std::swap(r.src_ip, r.dst_ip);
    std::swap(r.src_port, r.dst_port);
    return r;
}

FlowKey canonicalize_flow_key(const ConnectionFields& c) {
    Endpoint src{c.src_ip, c.src_port};
    Endpoint dst{c.dst_ip, c.dst_port};
    FlowKey key;
    key.protocol = c.protocol;
    if (dst < src) std::swap(src, dst);
    key.a = src;
    key.b = dst;
    return key;
}

std::vector<Violation> validate_host_attack_input(const std::vector<HostAttackInput>& input) {
    std::vector<Violation> out;
    std::set<std::string> seen_hosts;
    for (const auto& host : input) {
        if (!seen_hosts.insert(host.host_name).second)
            out.push_back({host.host_name, "duplicate-host", "host appears more than once"});
        std::set<StepKey> seen_steps;
        for (const auto& d : host.steps) {
            if (!d.window.valid())
                out.push_back({host.host_name, "malformed-window",
                               "t_e < t_s for step " + std::to_string(d.label.step) + " of " +
                                   d.label.scenario + "/" + d.label.version});
            if (d.label.step < 1)
                out.push_back({host.host_name, "bad-step", "step must be >= 1"});
            if (d.label.trial < 1)
                out.push_back({host.host_name, "bad-trial", "trial must be >= 1"});
            if (!seen_steps.insert(d.label.key()).second)
                out.push_back({host.host_name, "duplicate-step-identity",
                               d.label.scenario + "/" + d.label.version + " trial " +
                                   std::to_string(d.label.trial) + " step " +
                                   std::to_string(d.label.step)});
        }
    }
    return out;
}

Interval AttackStepTree::label_span(Pid pid) const {
    auto it = members.find(pid);
    if (it == members.end()) return Interval{1, 0};
    return Interval{it->second, extended_end};
}

// --- JSON encodings ---

using ojson = nlohmann::ordered_json;

ojson event_to_json(const HostEvent& e) {
    ojson j;
    j["host"] = e.host_name;
    j["log"] = e.log_name;
    j["record_id"] = e.record_id;
    j["event_id"] = e.event_id;
    j["ts"] = e.timestamp;
    j["pid"] = e.pid;
    if (e.parent_pid) j["ppid"] = *e.parent_pid;
    if (e.image) j["image"] = *e.image;
    if (e.net) {
        j["direction"] = to_string(e.net->direction);
        j["src_ip"] = to_string(e.net->src_ip);
        j["src_port"] = e.net->src_port;
        j["dst_ip"] = to_string(e.net->dst_ip);
        j["dst_port"] = e.net->dst_port;
        j["proto"] = to_string(e.net->protocol);
    }
    j["attrs"] = e.attrs;
    return j;
}

HostEvent event_from_json(const nlohmann::json& j) {
    HostEvent e;
    e.host_name = j.at("host").get<std::string>();
    e.log_name = j.at("log").get<std::string>();
    e.record_id = j.at("record_id").get<std::uint64_t>();
    e.event_id = j.at("event_id").get<int>();
    e.timestamp = j.at("ts").get<TimeStamp>();
    e.pid = j.at("pid").get<Pid>();
    if (j.contains("ppid")) e.parent_pid = j.at("ppid").get<Pid>();
    if (j.contains("image")) e.image = j.at("image").get<std::string>();
    if (j.contains("direction")) {
        ConnectionFields c;
        c.direction = direction_from_string(j.at("direction").get<std::string>());
        c.src_ip = parse_ipv4(j.at("src_ip").get<std::string>());
        c.src_port = j.at("src_port").get<std::uint16_t>();
        c.dst_ip = parse_ipv4(j.at("dst_ip").get<std::string>());
        c.dst_port = j.at("dst_port").get<std::uint16_t>();
        c.protocol = protocol_from_string(j.at("proto").get<std::string>());
        e.net = c;
    }
    if (j.contains("attrs")) e.attrs = j.at("attrs").get<std::map<std::string, std::string>>();
    if (e.event_id == kEventProcessCreate && (!e.parent_pid || !e.image))
        throw LmError("4688 event missing ppid/image (host " + e.host_name + ", record " +
                      std::to_string(e.record_id) + ")");
    if (e.event_id == kEventWfpConnection && !e.net)
        throw LmError("5156 event missing connection fields (host " + e.host_name + ", record " +
                      std::to_string(e.record_id) + ")");
    return e;
}

ojson step_label_to_json(const StepLabel& l) {
    ojson j;
    j["scenario"] = l.scenario;
    j["version"] = l.version;
    j["trial"] = l.trial;
    j["step"] = l.step;
    j["success"] = l.success;
    j["ttps"] = l.ttps;
    return j;
}

StepLabel step_label_from_json(const nlohmann::json& j) {
    StepLabel l;
    l.scenario = j.at("scenario").get<std::string>();
    l.version = j.at("version").get<std::string>();
    l.trial = j.at("trial").get<int>();
    l.step = j.at("step").get<int>();
    l.success = j.at("success").get<bool>();
    if (j.contains("ttps")) l.ttps = j.at("ttps").get<std::vector<std::string>>();
    return l;
}

ojson attack_input_to_json(const std::vector<HostAttackInput>& input) {
    ojson arr = ojson::array();
    for (const auto& host : input) {
        ojson hj;
        hj["host"] = host.host_name;
        ojson steps = ojson::array();
        for (const auto& d : host.steps) {
            ojson sj;
            sj["pid"] = d.pid;
            sj["t_s"] = d.window.start;
            sj["t_e"] = d.window.end;
            sj["scenario"] = d.label.scenario;
            sj["version"] = d.label.version;
            sj["trial"] = d.label.trial;
            sj["step"] = d.label.step;
            sj["success"] = d.label.success;
            sj["ttps"] = d.label.ttps;
            steps.push_back(std::move(sj));
        }
        hj["steps"] = std::move(steps);
        arr.push_back(std::move(hj));
    }
    return arr;
}

std::vector<HostAttackInput> attack_input_from_json(const nlohmann::json& j) {
    std::vector<HostAttackInput> out;
    for (const auto& hj : j) {
        HostAttackInput host;
        host.host_name = hj.at("host").get<std::string>();
        for (const auto& sj : hj.at("steps")) {
            AttackStepDescriptor d;
            d.pid = sj.at("pid").get<Pid>();
            d.window.start = sj.at("t_s").get<TimeStamp>();
            d.window.end = sj.at("t_e").get<TimeStamp>();
            d.label = step_label_from_json(sj);
            host.steps.push_back(std::move(d));
        }
        out.push_back(std::move(host));
    }
    return out;
}

ojson label_to_json(const LabelRecord& r) {
    ojson j;
    j["host"] = r.host_name;
    j["log"] = r.log_name;
    j["record_id"] = r.record_id;
    ojson lj = step_label_to_json(r.label);
    for (auto& [k, v] : lj.items()) j[k] = v;
    return j;
}

LabelRecord label_from_json(const nlohmann::json& j) {
    LabelRecord r;
    r.host_name = j.at("host").get<std::string>();
    r.log_name = j.at("log").get<std::string>();
    r.record_id = j.at("record_id").get<std::uint64_t>();
    r.label = step_label_from_json(j);
    return r;
}

ojson flow_to_json(const LabeledFlow& f) {
    ojson j;
    j["ip_a"] = to_string(f.key.a.ip);
    j["port_a"] = f.key.a.port;
    j["ip_b"] = to_string(f.key.b.ip);
    j["port_b"] = f.key.b.port;
    j["proto"] = to_string(f.key.protocol);
    j["t_s"] = f.window.start;
    j["t_e"] = f.window.end;
    ojson lj = step_label_to_json(f.label);
    for (auto& [k, v] : lj.items()) j[k] = v;
    return j;
}

LabeledFlow flow_from_json(const nlohmann::json& j) {
    LabeledFlow f;
    f.key.a = Endpoint{parse_ipv4(j.at("ip_a").get<std::string>()), j.at("port_a").get<std::uint16_t>()};
    f.key.b = Endpoint{parse_ipv4(j.at("ip_b").get<std::string>()), j.at("port_b").get<std::uint16_t>()};
    f.key.protocol = protocol_from_string(j.at("proto").get<std::string>());
    f.window.start = j.at("t_s").get<TimeStamp>();
    f.window.end = j.at("t_e").get<TimeStamp>();
    f.label = step_label_from_json(j);
    return f;
}

ojson forest_to_json(const Forest& f) {
    ojson arr = ojson::array();
    for (const auto& t : f.trees) {
        ojson tj;
        tj["host"] = t.host_name;
        tj["root_pid"] = t.root_pid;
        ojson members = ojson::array();
        for (const auto& [pid, first_seen] : t.members) {
            ojson mj;
            mj["pid"] = pid;
            mj["first_seen"] = first_seen;
            members.push_back(std::move(mj));
        }
        tj["members"] = std::move(members);
        ojson meta;
        ojson lj = step_label_to_json(t.meta.label);
        for (auto& [k, v] : lj.items()) meta[k] = v;
        meta["t_s"] = t.meta.window.start;
        meta["t_e_extended"] = t.extended_end;
        tj["meta"] = std::move(meta);
        arr.push_back(std::move(tj));
    }
    return arr;
}

Forest forest_from_json(const nlohmann::json& j) {
    Forest f;
    for (const auto& tj : j) {
        AttackStepTree t;
        t.host_name = tj.at("host").get<std::string>();
        t.root_pid = tj.at("root_pid").get<Pid>();
        for (const auto& mj : tj.at("members"))
            t.members[mj.at("pid").get<Pid>()] = mj.at("first_seen").get<TimeStamp>();
        const auto& meta = tj.at("meta");
        t.meta.pid = t.root_pid;
        t.meta.label = step_label_from_json(meta);
        t.meta.window.start = meta.at("t_s").get<TimeStamp>();
        t.extended_end = meta.at("t_e_extended").get<TimeStamp>();
        t.meta.window.end = t.extended_end;
        f.trees.push_back(std::move(t));
    }
    return f;
}

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace lmforge
