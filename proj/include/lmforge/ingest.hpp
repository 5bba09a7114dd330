#pragma once

#include <filesystem>
#include <span>

#include "lmforge/core.hpp"

namespace lmforge {

// Immutable, indexed view over canonical host events. Ordering by record_id
// within each (host, log) is validated on construction and preserved by all
// accessors.
class EventStore {
  public:
    EventStore() = default;

    static EventStore from_events(std::vector<HostEvent> events);
    static EventStore load(const std::filesystem::path& jsonl_path);

    std::vector<std::string> hosts() const;
    std::vector<std::string> logs(const std::string& host) const;
    bool has_host(const std::string& host) const;

    // All events of one (host, log), record_id order.
    const std::vector<HostEvent>& events(const std::string& host, const std::string& log) const;

    // Host-wide slices in (log, record_id) order.
    std::vector<const HostEvent*> view_by_event_id(const std::string& host, int event_id) const;
    std::vector<const HostEvent*> view_4688(const std::string& host) const;
    std::vector<const HostEvent*> view_5156(const std::string& host) const;
    std::vector<const HostEvent*> events_for_pid(const std::string& host, Pid pid) const;

    const HostEvent* lookup(const EventRef& ref) const;

    std::size_t total_events() const { return total_; }

  private:
    void index();

    // key: (host, log)
    std::map<std::pair<std::string, std::string>, std::vector<HostEvent>> logs_;
    std::map<std::string, std::map<int, std::vector<const HostEvent*>>> by_event_id_;
    std::map<std::string, std::map<Pid, std::vector<const HostEvent*>>> by_pid_;
    std::size_t total_ = 0;
};

void write_events_jsonl(const std::filesystem::path& path, std::span<const HostEvent> events);

// --- classic pcap ---

constexpr std::uint32_t kPcapMagicNative = 0xa1b2c3d4;
constexpr std::uint32_t kPcapMagicSwapped = 0xd4c3b2a1;
constexpr std::uint32_t kLinkTypeEthernet = 1;

struct PacketRecord {
    TimeStamp ts = 0;  // capture time truncated to ms
    std::uint32_t caplen = 0;
    std::uint32_t origlen = 0;
    std::uint32_t link_type = kLinkTypeEthernet;
    std::optional<ConnectionFields> five_tuple;  // absent for non-IP / non-TCP/UDP

    bool operator==(const PacketRecord&) const = default;
};

struct PcapFile {
    std::uint32_t link_type = kLinkTypeEthernet;
    std::vector<PacketRecord> packets;
};

PcapFile parse_pcap(std::span<const std::uint8_t> bytes);
PcapFile load_pcap(const std::filesystem::path& path);

// Raw frame plus capture timestamp, for synthesizing capture files.
struct RawPacket {
    TimeStamp ts = 0;
    std::vector<std::uint8_t> frame;
};

std::vector<std::uint8_t> encode_pcap(std::span<const RawPacket> packets,
                                      std::uint32_t link_type = kLinkTypeEthernet,
                                      bool swapped = false);

// Ethernet/IPv4/TCP|UDP frame carrying `payload_len` zero bytes.
std::vector<std::uint8_t> build_frame(const ConnectionFields& c, std::size_t payload_len = 8);

}  // namespace lmforge
