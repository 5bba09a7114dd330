#include "lmforge/forest.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace lmforge {

namespace {

// Closure walk shared by the public entry points. `children_of` yields the
// 4688 events with a given parent pid.
template <typename ChildrenFn>
std::map<Pid, TimeStamp> closure(Pid root, const Interval& window, ChildrenFn&& children_of) {
    std::map<Pid, TimeStamp> members;
    members[root] = window.start;
    std::vector<Pid> worklist{root};
    std::set<Pid> visited{root};
    while (!worklist.empty()) {
        Pid current = worklist.back();
        worklist.pop_back();
        for (const HostEvent* e : children_of(current)) {
            if (!window.contains(e->timestamp)) continue;
            auto [it, inserted] = members.emplace(e->pid, e->timestamp);
            if (!inserted && e->pid != root) it->second = std::min(it->second, e->timestamp);
            if (visited.insert(e->pid).second) worklist.push_back(e->pid);
        }
    }
    return members;
}

}  // namespace

std::map<Pid, TimeStamp> get_process_tree(Pid root, const Interval& window,
                                          std::span<const HostEvent* const> events4688) {
    if (!window.valid()) throw LmError("process tree window is malformed");
    std::map<Pid, std::vector<const HostEvent*>> by_parent;
    for (const HostEvent* e : events4688)
        if (e->parent_pid) by_parent[*e->parent_pid].push_back(e);
    return closure(root, window, [&](Pid p) -> const std::vector<const HostEvent*>& {
        static const std::vector<const HostEvent*> empty;
        auto it = by_parent.find(p);
        return it == by_parent.end() ? empty : it->second;
    });
}

ForestBuildResult build_forest(const std::vector<HostAttackInput>& input, const EventStore& store,
                               std::int64_t end_extension_ms) {
    auto violations = validate_host_attack_input(input);
    if (!violations.empty())
        throw LmError("attack input invalid: " + violations.front().kind + " on host '" +
                      violations.front().host_name + "' (" + violations.front().detail + ")");

    ForestBuildResult result;
    // aggregated by (host, pid)
    std::map<std::pair<std::string, Pid>, PidCollisionReport> collisions;

    for (const auto& host : input) {
        if (!store.has_host(host.host_name))
            throw LmError("attack input names host '" + host.host_name +
                          "' absent from the event store");
        auto events4688 = store.view_4688(host.host_name);
        std::map<Pid, std::vector<const HostEvent*>> by_parent;
        std::map<Pid, std::vector<const HostEvent*>> by_pid;
        for (const HostEvent* e : events4688) {
            if (e->parent_pid) by_parent[*e->parent_pid].push_back(e);
            by_pid[e->pid].push_back(e);
        }

        for (const auto& d : host.steps) {
            AttackStepTree tree;
            tree.host_name = host.host_name;
            tree.root_pid = d.pid;
            tree.meta = d;
            tree.extended_end = d.window.end + end_extension_ms;
            Interval window{d.window.start, tree.extended_end};
            tree.members = closure(d.pid, window, [&](Pid p) -> const std::vector<const HostEvent*>& {
                static const std::vector<const HostEvent*> empty;
                auto it = by_parent.find(p);
                return it == by_parent.end() ? empty : it->second;
            });

            // Ambiguity scan: a member pid created more than once up to the
            // extended end may mix instances; over-label and warn.
            for (const auto& [pid, first_seen] : tree.members) {
                auto it = by_pid.find(pid);
                if (it == by_pid.end()) continue;
                std::vector<TimeStamp> creations;
                for (const HostEvent* e : it->second)
                    if (e->timestamp <= tree.extended_end) creations.push_back(e->timestamp);
                if (creations.size() < 2) continue;
                auto& rep = collisions[{host.host_name, pid}];
                rep.host_name = host.host_name;
                rep.pid = pid;
                rep.creation_timestamps = creations;
                rep.affected_steps.push_back(d.label.key());
            }

            result.forest.trees.push_back(std::move(tree));
        }
    }

    for (auto& [_, rep] : collisions) {
        std::sort(rep.affected_steps.begin(), rep.affected_steps.end());
        rep.affected_steps.erase(std::unique(rep.affected_steps.begin(), rep.affected_steps.end()),
                                 rep.affected_steps.end());
        result.collisions.push_back(std::move(rep));
    }
    return result;
}

nlohmann::ordered_json collisions_to_json(const std::vector<PidCollisionReport>& reports) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        nlohmann::ordered_json j;
        j["host"] = r.host_name;
        j["pid"] = r.pid;
        j["creation_timestamps"] = r.creation_timestamps;
        nlohmann::ordered_json steps = nlohmann::ordered_json::array();
        for (const auto& s : r.affected_steps)
            steps.push_back({{"scenario", s.scenario},
                             {"version", s.version},
                             {"trial", s.trial},
                             {"step", s.step}});
        j["affected_steps"] = std::move(steps);
        arr.push_back(std::move(j));
    }
    return arr;
}

std::vector<PidCollisionReport> collisions_from_json(const nlohmann::json& j) {
    std::vector<PidCollisionReport> out;
    for (const auto& rj : j) {
        PidCollisionReport r;
        r.host_name = rj.at("host").get<std::string>();
        r.pid = rj.at("pid").get<Pid>();
        r.creation_timestamps = rj.at("creation_timestamps").get<std::vector<TimeStamp>>();
        for (const auto& sj : rj.at("affected_steps"))
            r.affected_steps.push_back(StepKey{sj.at("scenario").get<std::string>(),
                                               sj.at("version").get<std::string>(),
                                               sj.at("trial").get<int>(), sj.at("step").get<int>()});
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace lmforge
