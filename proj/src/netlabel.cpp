#include "lmforge/netlabel.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace lmforge {

C2Endpoint parse_c2_endpoint(const std::string& spec) {
    auto colon = spec.rfind(':');
    if (colon == std::string::npos) throw LmError("bad c2 endpoint '" + spec + "', want ip:port[-port]");
    C2Endpoint ep;
    ep.ip = parse_ipv4(spec.substr(0, colon));
    std::string ports = spec.substr(colon + 1);
    auto dash = ports.find('-');
    try {
        if (dash == std::string::npos) {
            ep.port_lo = ep.port_hi = static_cast<std::uint16_t>(std::stoul(ports));
        } else {
            ep.port_lo = static_cast<std::uint16_t>(std::stoul(ports.substr(0, dash)));
            ep.port_hi = static_cast<std::uint16_t>(std::stoul(ports.substr(dash + 1)));
        }
    } catch (const std::exception&) {
        throw LmError("bad c2 endpoint '" + spec + "', want ip:port[-port]");
    }
    if (ep.port_lo > ep.port_hi) throw LmError("bad c2 endpoint '" + spec + "': inverted port range");
    return ep;
}

std::vector<LabelRecord> label_wfp(const Forest& forest, const EventStore& store) {
    std::vector<LabelRecord> out;
    for (const auto& tree : forest.trees) {
        for (const auto& [pid, first_seen] : tree.members) {
            for (const HostEvent* e : store.events_for_pid(tree.host_name, pid)) {
                if (e->event_id != kEventWfpConnection) continue;
                if (e->timestamp < first_seen || e->timestamp > tree.extended_end) continue;
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

std::vector<LabeledFlow> derive_flows(std::span<const LabelRecord> labeled5156,
                                      const EventStore& store, std::int64_t slack_ms) {
    struct Group {
        Interval span{0, 0};
        bool first = true;
        StepLabel label;
    };
    std::map<std::pair<FlowKey, StepKey>, Group> groups;
    for (const auto& l : labeled5156) {
        const HostEvent* e = store.lookup(l.ref());
        if (!e) throw LmError("label references missing event (host " + l.host_name + ", record " +
                              std::to_string(l.record_id) + ")");
        if (!e->net) continue;
        auto& g = groups[{canonicalize_flow_key(*e->net), l.label.key()}];
        if (g.first) {
            g.span = {e->timestamp, e->timestamp};
            g.label = l.label;
            g.first = false;
        } else {
            g.span.start = std::min(g.span.start, e->timestamp);
            g.span.end = std::max(g.span.end, e->timestamp);
        }
    }
    std::vector<LabeledFlow> out;
    out.reserve(groups.size());
    for (const auto& [key, g] : groups)
        out.push_back(LabeledFlow{key.first, {g.span.start - slack_ms, g.span.end + slack_ms}, g.label});
    return out;
}

std::vector<PacketLabel> label_packets(const std::string& pcap_id,
                                       std::span<const PacketRecord> packets,
                                       std::span<const LabeledFlow> flows) {
    std::map<FlowKey, std::vector<const LabeledFlow*>> by_key;
    for (const auto& f : flows) by_key[f.key].push_back(&f);

    std::vector<PacketLabel> out;
    for (std::size_t i = 0; i < packets.size(); ++i) {
        if (!packets[i].five_tuple) continue;
        auto it = by_key.find(canonicalize_flow_key(*packets[i].five_tuple));
        if (it == by_key.end()) continue;
        for (const LabeledFlow* f : it->second)
            if (f->window.contains(packets[i].ts))
                out.push_back(PacketLabel{pcap_id, i, f->label});
    }
    return out;
}

FilterResult filter_c2_labels(std::span<const LabelRecord> labels, const EventStore& store,
                              std::span<const C2Endpoint> endpoints) {
    FilterResult result;
    for (const auto& l : labels) {
        const HostEvent* e = store.lookup(l.ref());
        bool drop = false;
        if (e && e->net && !endpoints.empty()) {
            Endpoint remote = e->net->direction == Direction::Outbound
                                  ? Endpoint{e->net->dst_ip, e->net->dst_port}
                                  : Endpoint{e->net->src_ip, e->net->src_port};
            for (const auto& ep : endpoints)
                if (ep.matches(remote)) {
                    drop = true;
                    break;
                }
        }
        if (drop)
            ++result.removed;
        else
            result.labels.push_back(l);
    }
    return result;
}

FilterResult filter_c2_flows(std::span<const LabeledFlow> flows,
                             std::span<const C2Endpoint> endpoints) {
    FilterResult result;
    for (const auto& f : flows) {
        bool drop = false;
        for (const auto& ep : endpoints)
            if (ep.matches(f.key.a) || ep.matches(f.key.b)) {
                drop = true;
                break;
            }
        if (drop)
            ++result.removed;
        else
            result.flows.push_back(f);
    }
    return result;
}

void write_flows_json(const std::filesystem::path& path, std::span<const LabeledFlow> flows) {
    std::ofstream out(path);
    if (!out) throw LmError("cannot write " + path.string());
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& f : flows) arr.push_back(flow_to_json(f));
    out << arr.dump(2) << '\n';
}

std::vector<LabeledFlow> load_flows_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LmError("cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<LabeledFlow> out;
    for (const auto& fj : j) out.push_back(flow_from_json(fj));
    return out;
}

void write_packet_labels_jsonl(const std::filesystem::path& path,
                               std::span<const PacketLabel> labels) {
    std::ofstream out(path);
    if (!out) throw LmError("cannot write " + path.string());
    for (const auto& l : labels) {
        nlohmann::ordered_json j;
        j["pcap"] = l.pcap_id;
        j["index"] = l.packet_index;
        nlohmann::ordered_json lj = step_label_to_json(l.label);
        for (auto& [k, v] : lj.items()) j[k] = v;
        out << j.dump() << '\n';
    }
}

std::vector<PacketLabel> load_packet_labels_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LmError("cannot open " + path.string());
    std::vector<PacketLabel> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        PacketLabel l;
        l.pcap_id = j.at("pcap").get<std::string>();
        l.packet_index = j.at("index").get<std::size_t>();
        l.label = step_label_from_json(j);
        out.push_back(std::move(l));
    }
    return out;
}

}  // namespace lmforge
