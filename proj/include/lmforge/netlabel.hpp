#pragma once

#include <span>

#include "lmforge/core.hpp"
#include "lmforge/forest.hpp"
#include "lmforge/ingest.hpp"

namespace lmforge {

struct PacketLabel {
    std::string pcap_id;
    std::size_t packet_index = 0;
    StepLabel label;

    bool operator==(const PacketLabel&) const = default;
};

// Marks an orchestrator<->agent endpoint whose traffic must not appear in
// published outputs. Matches a single ip and an inclusive port range.
struct C2Endpoint {
    IPv4 ip;
    std::uint16_t port_lo = 0;
    std::uint16_t port_hi = 0;

    bool matches(const Endpoint& e) const {
        return e.ip == ip && e.port >= port_lo && e.port <= port_hi;
    }
};

C2Endpoint parse_c2_endpoint(const std::string& spec);  // "ip:port" or "ip:lo-hi"

// 5156 events joined against the forest, same membership/time rule as
// system-log labeling.
std::vector<LabelRecord> label_wfp(const Forest& forest, const EventStore& store);

// Groups labeled 5156 events by (canonical flow key, step identity); each
// group becomes one flow spanning [min ts - slack, max ts + slack].
std::vector<LabeledFlow> derive_flows(std::span<const LabelRecord> labeled5156,
                                      const EventStore& store, std::int64_t slack_ms);

// A packet is labeled by every flow whose key matches its canonicalized
// five-tuple and whose window contains the packet timestamp.
std::vector<PacketLabel> label_packets(const std::string& pcap_id,
                                       std::span<const PacketRecord> packets,
                                       std::span<const LabeledFlow> flows);

struct FilterResult {
    std::vector<LabelRecord> labels;
    std::vector<LabeledFlow> flows;
    std::size_t removed = 0;
};

// Drops labeled 5156 records whose remote endpoint (per event direction)
// matches an orchestrator endpoint.
FilterResult filter_c2_labels(std::span<const LabelRecord> labels, const EventStore& store,
                              std::span<const C2Endpoint> endpoints);

// Drops flows with either canonical endpoint matching an orchestrator
// endpoint.
FilterResult filter_c2_flows(std::span<const LabeledFlow> flows,
                             std::span<const C2Endpoint> endpoints);

void write_flows_json(const std::filesystem::path& path, std::span<const LabeledFlow> flows);
std::vector<LabeledFlow> load_flows_json(const std::filesystem::path& path);

void write_packet_labels_jsonl(const std::filesystem::path& path,
                               std::span<const PacketLabel> labels);
std::vector<PacketLabel> load_packet_labels_jsonl(const std::filesystem::path& path);

}  // namespace lmforge
