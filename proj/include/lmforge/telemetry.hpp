#pragma once

#include <filesystem>
#include <span>

#include "lmforge/core.hpp"
#include "lmforge/rng.hpp"
#include "lmforge/scheduler.hpp"

namespace lmforge {

enum class ActionKind { SpawnProcess, OpenConnection, FileAccess };

struct ConnTarget {
    IPv4 ip;
    std::uint16_t port = 0;
    Protocol proto = Protocol::Tcp;
};

struct ActionSpec {
    ActionKind kind = ActionKind::SpawnProcess;
    double weight = 0.0;  // per-slot firing probability
    std::vector<std::string> images;   // spawn_process
    std::vector<ConnTarget> targets;   // open_connection
    std::vector<std::string> paths;    // file_access
};

struct BehaviorScript {
    std::string name;
    std::vector<ActionSpec> actions;
};

struct ProcTemplate {
    std::string image;
    std::vector<ProcTemplate> children;
};

struct ConnTemplate {
    std::optional<std::string> dst_host;  // resolved via the host directory
    std::optional<IPv4> dst_ip;
    std::uint16_t dst_port = 0;
    Protocol proto = Protocol::Tcp;
    int count = 1;
    bool from_agent = true;  // otherwise from the last spawned child
};

struct StepSpec {
    int step = 1;
    std::string host_name;
    std::string agent_image;
    std::vector<ProcTemplate> children;
    std::vector<ConnTemplate> connections;
    std::int64_t duration_min_ms = 10'000;
    std::int64_t duration_max_ms = 30'000;
    bool success = true;
    std::vector<std::string> ttps;
};

struct ScenarioScript {
    std::string scenario;
    std::string version = "v1";
    std::vector<StepSpec> steps;  // step numbering contiguous from 1
};

struct TelemetryConfig {
    std::int64_t action_slot_ms = 6 * kMsPerMinute;
    double background_noise_weight = 0.4;
    bool force_pid_reuse = false;
    Pid pid_reuse_modulus = 37;
    std::int64_t step_gap_min_ms = 60'000;  // kept above the end extension
    std::int64_t step_gap_max_ms = 120'000;
    int beacons_per_step = 2;
};

// Shared allocators and addressing for one generation run. Hosts get stable
// addresses; pids come from a per-host monotonic counter starting at 1000,
// optionally wrapped to force pid reuse.
class TelemetryContext {
  public:
    TelemetryContext(std::vector<std::string> hosts, TelemetryConfig cfg);

    const TelemetryConfig& config() const { return cfg_; }
    IPv4 ip_for(const std::string& host) const;
    Pid alloc_pid(const std::string& host);
    std::uint16_t alloc_port(const std::string& host);
    const std::vector<std::string>& hosts() const { return hosts_; }

    static constexpr Pid kWinlogonPid = 500;   // parent of session shells
    static constexpr Pid kServicesPid = 600;   // parent of first agents
    static constexpr Pid kSystemPid = 4;

  private:
    TelemetryConfig cfg_;
    std::vector<std::string> hosts_;
    std::map<std::string, IPv4> addresses_;
    std::map<std::string, Pid> next_pid_;
    std::map<std::string, std::uint64_t> pid_serial_;
    std::map<std::string, std::uint32_t> next_port_;
};

// Event plus the attack-step identity it was emitted for; benign events are
// untagged. Ground truth is derived from the tags after merging, never
// written into the event itself.
struct TaggedEvent {
    HostEvent event;
    std::optional<StepKey> step;
};

struct GroundTruth {
    std::map<EventRef, StepKey> events;
    std::map<std::pair<FlowKey, StepKey>, Interval> flows;
    std::map<std::string, std::map<std::size_t, StepKey>> packets;  // pcap id -> index -> step
};

// Sorts per (host, log) by timestamp (ties keep emission order) and assigns
// record ids 1..N.
void finalize_stream(std::vector<TaggedEvent>& events);

std::vector<HostEvent> strip_tags(std::span<const TaggedEvent> events);

// Session markers (4624/4634), a session shell creation, weighted script
// actions and low-rate background connection noise, all inside the session
// intervals. Per-(employee, day) substreams are derived from `seed`.
std::vector<TaggedEvent> emit_benign(const ScheduleSet& schedules,
                                     const std::vector<EmployeeProfile>& profiles,
                                     const std::map<std::string, BehaviorScript>& scripts,
                                     TelemetryContext& ctx, std::uint64_t seed);

struct AttackEmission {
    std::vector<TaggedEvent> events;  // not finalized; tags carry step identity
    std::vector<HostAttackInput> inputs;
};

// Replays one scenario trial starting at base_time: per step an agent-root
// 4688 (first step the agent appears in), a child subtree per template, and
// 5156 connections attributed to tree pids. Step windows derive from the
// emitted events. Steps sharing one agent reuse its pid with disjoint
// windows.
AttackEmission emit_attack(const ScenarioScript& scenario, int trial, TimeStamp base_time,
                           TelemetryContext& ctx, Rng& rng);

// Periodic 5156 beacons from each descriptor's agent pid to the orchestrator
// endpoint, placed inside the step window.
std::vector<TaggedEvent> emit_cc_traffic(const std::vector<HostAttackInput>& attack_hosts,
                                         const ConnTarget& orchestrator, TelemetryContext& ctx,
                                         Rng& rng);

// Per (host, log) timestamp merge with stable tie-break benign < attack < cc;
// record ids reassigned to restore monotonicity.
std::vector<TaggedEvent> merge_streams(std::span<const TaggedEvent> benign,
                                       std::span<const TaggedEvent> attacks,
                                       std::span<const TaggedEvent> cc);

GroundTruth ground_truth_from_stream(std::span<const TaggedEvent> finalized);

// Synthesizes one classic pcap per host mirroring its 5156 events: a request
// frame at the event timestamp and a reply frame (reversed tuple) shortly
// after. Returns per-packet tags aligned with packet indexes.
struct PcapSynthesis {
    std::map<std::string, std::vector<std::optional<StepKey>>> packet_tags;
};

PcapSynthesis write_host_pcaps(std::span<const TaggedEvent> merged,
                               const std::filesystem::path& dir);

void merge_packet_truth(GroundTruth& gt, const PcapSynthesis& pcaps);

// --- JSON ---

BehaviorScript behavior_from_json(const nlohmann::json& j);
nlohmann::ordered_json behavior_to_json(const BehaviorScript& b);

ScenarioScript scenario_from_json(const nlohmann::json& j);
nlohmann::ordered_json scenario_to_json(const ScenarioScript& s);

nlohmann::ordered_json ground_truth_to_json(const GroundTruth& gt);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

nlohmann::ordered_json tags_to_json(std::span<const TaggedEvent> events);
void apply_tags_json(std::vector<TaggedEvent>& events, const nlohmann::json& j);

}  // namespace lmforge
