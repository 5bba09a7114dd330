#pragma once

#include <span>

#include "lmforge/core.hpp"
#include "lmforge/ingest.hpp"

namespace lmforge {

// A pid with at least two creation events observed up to a tree's extended
// window end: membership for that window is ambiguous, so the tree
// over-includes and this report flags it.
struct PidCollisionReport {
    std::string host_name;
    Pid pid = 0;
    std::vector<TimeStamp> creation_timestamps;
    std::vector<StepKey> affected_steps;
};

// Windowed transitive closure of child processes rooted at `root`. An event
// whose parent pid is already in the tree and whose timestamp falls inside
// the window adds its new pid, recursively; a visited set guards against
// parent-pid cycles. The root's first_seen is window.start; children carry
// their earliest in-window creation time.
std::map<Pid, TimeStamp> get_process_tree(Pid root, const Interval& window,
                                          std::span<const HostEvent* const> events4688);

struct ForestBuildResult {
    Forest forest;
    std::vector<PidCollisionReport> collisions;
};

// One tree per descriptor over [t_s, t_e + end_extension_ms], built from the
// host's 4688 view. Throws LmError when a host named in the input has no
// events in the store.
ForestBuildResult build_forest(const std::vector<HostAttackInput>& input, const EventStore& store,
                               std::int64_t end_extension_ms);

nlohmann::ordered_json collisions_to_json(const std::vector<PidCollisionReport>& reports);
std::vector<PidCollisionReport> collisions_from_json(const nlohmann::json& j);

}  // namespace lmforge
