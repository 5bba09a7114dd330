#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace lmforge {

// All timestamps are integer milliseconds since the Unix epoch, UTC.
using TimeStamp = std::int64_t;
using Pid = std::int64_t;

constexpr TimeStamp kMsPerSecond = 1000;
constexpr TimeStamp kMsPerMinute = 60 * kMsPerSecond;
constexpr TimeStamp kMsPerHour = 60 * kMsPerMinute;
constexpr TimeStamp kMsPerDay = 24 * kMsPerHour;

struct LmError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Closed interval [start, end], start <= end.
struct Interval {
    TimeStamp start = 0;
    TimeStamp end = 0;

    bool valid() const { return start <= end; }
    TimeStamp length() const { return end - start; }
    bool contains(TimeStamp t) const { return start <= t && t <= end; }
    bool overlaps(const Interval& o) const { return start <= o.end && o.start <= end; }
    auto operator<=>(const Interval&) const = default;
};

// Calendar date, UTC. Kept separate from TimeStamp so schedules stay
// day-addressable without time-of-day arithmetic leaking everywhere.
struct Date {
    int year = 1970;
    unsigned month = 1;
    unsigned day = 1;

    auto operator<=>(const Date&) const = default;
};

TimeStamp date_to_ms(const Date& d);
Date date_from_ms(TimeStamp ms);
Date add_days(const Date& d, int n);
int weekday_index(const Date& d);  // 0=Sunday .. 6=Saturday
std::string to_string(const Date& d);
Date parse_date(const std::string& s);  // "YYYY-MM-DD"

// "HH:MM" -> milliseconds after midnight.
TimeStamp parse_hhmm(const std::string& s);
std::string format_hhmm(TimeStamp ms_of_day);

struct IPv4 {
    std::uint32_t value = 0;  // host byte order

    auto operator<=>(const IPv4&) const = default;
};

IPv4 parse_ipv4(const std::string& s);
std::string to_string(const IPv4& ip);

enum class Direction { Inbound, Outbound };
enum class Protocol { Tcp, Udp };

std::string to_string(Direction d);
std::string to_string(Protocol p);
Direction direction_from_string(const std::string& s);
Protocol protocol_from_string(const std::string& s);

struct ConnectionFields {
    Direction direction = Direction::Outbound;
    IPv4 src_ip;
    std::uint16_t src_port = 0;
    IPv4 dst_ip;
    std::uint16_t dst_port = 0;
    Protocol protocol = Protocol::Tcp;

    auto operator<=>(const ConnectionFields&) const = default;
};

ConnectionFields reversed(const ConnectionFields& c);

struct Endpoint {
    IPv4 ip;
    std::uint16_t port = 0;

    auto operator<=>(const Endpoint&) const = default;
};

// Direction-free flow identity: endpoint_a <= endpoint_b lexicographically.
struct FlowKey {
    Endpoint a;
    Endpoint b;
    Protocol protocol = Protocol::Tcp;

    auto operator<=>(const FlowKey&) const = default;
};

FlowKey canonicalize_flow_key(const ConnectionFields& c);

struct EmployeeProfile {
    std::string employee_id;
    std::string host_name;
    std::string department;
    std::string behavior_ref;
};

struct SessionSchedule {
    std::string employee_id;
    Date day;
    std::vector<Interval> sessions;  // disjoint, strictly increasing by start
};

struct ScheduleSet {
    std::vector<SessionSchedule> schedules;
};

// Canonical host telemetry record. event_id 4688 carries parent_pid/image,
// event_id 5156 carries net.
struct HostEvent {
    std::string host_name;
    std::string log_name = "Security";
    std::uint64_t record_id = 0;  // strictly increasing within (host, log)
    int event_id = 0;
    TimeStamp timestamp = 0;
    Pid pid = 0;
    std::optional<Pid> parent_pid;
    std::optional<std::string> image;
    std::optional<ConnectionFields> net;
    std::map<std::string, std::string> attrs;

    bool operator==(const HostEvent&) const = default;
};

constexpr int kEventProcessCreate = 4688;
constexpr int kEventWfpConnection = 5156;
constexpr int kEventLogon = 4624;
constexpr int kEventLogoff = 4634;
constexpr int kEventObjectAccess = 4663;

struct EventRef {
    std::string host_name;
    std::string log_name;
    std::uint64_t record_id = 0;

    auto operator<=>(const EventRef&) const = default;
};

// (scenario, version, trial, step) identity of one attack-step execution.
struct StepKey {
    std::string scenario;
    std::string version;
    int trial = 1;
    int step = 1;

    auto operator<=>(const StepKey&) const = default;
};

// Label metadata carried from descriptors onto events, flows and packets.
struct StepLabel {
    std::string scenario;
    std::string version;
    int trial = 1;
    int step = 1;
    bool success = true;
    std::vector<std::string> ttps;

    StepKey key() const { return StepKey{scenario, version, trial, step}; }
    bool operator==(const StepLabel&) const = default;
};

struct AttackStepDescriptor {
    Pid pid = 0;          // agent process id
    Interval window;      // [t_s, t_e]
    StepLabel label;

    bool operator==(const AttackStepDescriptor&) const = default;
};

struct HostAttackInput {
    std::string host_name;
    std::vector<AttackStepDescriptor> steps;
};

struct Violation {
    std::string host_name;
    std::string kind;
    std::string detail;
};

std::vector<Violation> validate_host_attack_input(const std::vector<HostAttackInput>& input);

// Time-bounded process tree for one attack step. Root's first_seen is the
// window start; children carry their creation timestamp. extended_end is
// window.end plus the configured end extension.
struct AttackStepTree {
    std::string host_name;
    Pid root_pid = 0;
    std::map<Pid, TimeStamp> members;  // pid -> first_seen
    AttackStepDescriptor meta;
    TimeStamp extended_end = 0;

    Interval label_span(Pid pid) const;  // [first_seen, extended_end]
};

struct Forest {
    std::vector<AttackStepTree> trees;
};

struct LabelRecord {
    std::string host_name;
    std::string log_name;
    std::uint64_t record_id = 0;
    StepLabel label;

    EventRef ref() const { return EventRef{host_name, log_name, record_id}; }
    bool operator==(const LabelRecord&) const = default;
};

struct LabeledFlow {
    FlowKey key;
    Interval window;
    StepLabel label;

    bool operator==(const LabeledFlow&) const = default;
};

// --- canonical JSON encodings (events.jsonl / attack_input.json / labels.jsonl) ---

nlohmann::ordered_json event_to_json(const HostEvent& e);
HostEvent event_from_json(const nlohmann::json& j);

nlohmann::ordered_json attack_input_to_json(const std::vector<HostAttackInput>& input);
std::vector<HostAttackInput> attack_input_from_json(const nlohmann::json& j);

nlohmann::ordered_json label_to_json(const LabelRecord& r);
LabelRecord label_from_json(const nlohmann::json& j);

nlohmann::ordered_json flow_to_json(const LabeledFlow& f);
LabeledFlow flow_from_json(const nlohmann::json& j);

nlohmann::ordered_json step_label_to_json(const StepLabel& l);
StepLabel step_label_from_json(const nlohmann::json& j);

nlohmann::ordered_json forest_to_json(const Forest& f);
Forest forest_from_json(const nlohmann::json& j);

std::string fnv1a_hex(std::string_view data);

}  // namespace lmforge
