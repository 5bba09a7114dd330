#include "lmforge/labeling.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace lmforge {

namespace {

bool creation_part_of_tree(const HostEvent& e, const AttackStepTree& tree) {
    if (e.pid == tree.root_pid) return true;
    return e.parent_pid && tree.members.count(*e.parent_pid) > 0;
}

}  // namespace

std::vector<LabelRecord> label_system_logs(const Forest& forest, const EventStore& store) {
    std::vector<LabelRecord> out;
    for (const auto& tree : forest.trees) {
        for (const auto& [pid, first_seen] : tree.members) {
            for (const HostEvent* e : store.events_for_pid(tree.host_name, pid)) {
                if (e->timestamp < first_seen || e->timestamp > tree.extended_end) continue;
                if (e->event_id == kEventProcessCreate && !creation_part_of_tree(*e, tree)) continue;
                out.push_back(LabelRecord{e->host_name, e->log_name, e->record_id, tree.meta.label});
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const LabelRecord& a, const LabelRecord& b) {
        return std::tie(a.host_name, a.log_name, a.record_id, a.label.scenario, a.label.version,
                        a.label.trial, a.label.step) <
               std::tie(b.host_name, b.log_name, b.record_id, b.label.scenario, b.label.version,
                        b.label.trial, b.label.step);
    });
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::map<StepKey, std::size_t> summarize_labels(std::span<const LabelRecord> labels) {
    std::map<StepKey, std::size_t> counts;
    for (const auto& l : labels) ++counts[l.label.key()];
    return counts;
}

void write_labels_jsonl(const std::filesystem::path& path, std::span<const LabelRecord> labels) {
    std::ofstream out(path);
    if (!out) throw LmError("cannot write " + path.string());
    for (const auto& l : labels) out << label_to_json(l).dump() << '\n';
}

std::vector<LabelRecord> load_labels_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LmError("cannot open " + path.string());
    std::vector<LabelRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(label_from_json(nlohmann::json::parse(line)));
        } catch (const std::exception& ex) {
            throw LmError(path.filename().string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

}  // namespace lmforge
