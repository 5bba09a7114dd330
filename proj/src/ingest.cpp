#include "lmforge/ingest.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

namespace lmforge {

EventStore EventStore::from_events(std::vector<HostEvent> events) {
    EventStore store;
    for (auto& e : events) {
        auto& vec = store.logs_[{e.host_name, e.log_name}];
        if (!vec.empty() && e.record_id <= vec.back().record_id)
            throw LmError("record_id regression in host '" + e.host_name + "' log '" + e.log_name +
                          "': " + std::to_string(e.record_id) + " after " +
                          std::to_string(vec.back().record_id));
        vec.push_back(std::move(e));
    }
    store.index();
    return store;
}

EventStore EventStore::load(const std::filesystem::path& jsonl_path) {
    std::ifstream in(jsonl_path);
    if (!in) throw LmError("cannot open " + jsonl_path.string());
    EventStore store;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        HostEvent e;
        try {
            e = event_from_json(nlohmann::json::parse(line));
        } catch (const std::exception& ex) {
            throw LmError(jsonl_path.filename().string() + ":" + std::to_string(line_no) + ": " +
                          ex.what());
        }
        auto& vec = store.logs_[{e.host_name, e.log_name}];
        if (!vec.empty() && e.record_id <= vec.back().record_id)
            throw LmError(jsonl_path.filename().string() + ":" + std::to_string(line_no) +
                          ": record_id regression in host '" + e.host_name + "' log '" + e.log_name +
                          "'");
        vec.push_back(std::move(e));
    }
    store.index();
    return store;
}

void EventStore::index() {
    total_ = 0;
    by_event_id_.clear();
    by_pid_.clear();
    for (const auto& [key, vec] : logs_) {
        total_ += vec.size();
        for (const auto& e : vec) {
            by_event_id_[key.first][e.event_id].push_back(&e);
            by_pid_[key.first][e.pid].push_back(&e);
        }
    }
}

std::vector<std::string> EventStore::hosts() const {
    std::vector<std::string> out;
    for (const auto& [key, _] : logs_)
        if (out.empty() || out.back() != key.first) out.push_back(key.first);
    return out;
}

std::vector<std::string> EventStore::logs(const std::string& host) const {
    std::vector<std::string> out;
    for (const auto& [key, _] : logs_)
        if (key.first == host) out.push_back(key.second);
    return out;
}

bool EventStore::has_host(const std::string& host) const {
    auto it = logs_.lower_bound({host, ""});
    return it != logs_.end() && it->first.first == host;
}

const std::vector<HostEvent>& EventStore::events(const std::string& host,
                                                 const std::string& log) const {
    static const std::vector<HostEvent> empty;
    auto it = logs_.find({host, log});
    return it == logs_.end() ? empty : it->second;
}

std::vector<const HostEvent*> EventStore::view_by_event_id(const std::string& host,
                                                           int event_id) const {
    auto hit = by_event_id_.find(host);
    if (hit == by_event_id_.end()) return {};
    auto it = hit->second.find(event_id);
    return it == hit->second.end() ? std::vector<const HostEvent*>{} : it->second;
}

std::vector<const HostEvent*> EventStore::view_4688(const std::string& host) const {
    return view_by_event_id(host, kEventProcessCreate);
}

std::vector<const HostEvent*> EventStore::view_5156(const std::string& host) const {
    return view_by_event_id(host, kEventWfpConnection);
}

std::vector<const HostEvent*> EventStore::events_for_pid(const std::string& host, Pid pid) const {
    auto hit = by_pid_.find(host);
    if (hit == by_pid_.end()) return {};
    auto it = hit->second.find(pid);
    return it == hit->second.end() ? std::vector<const HostEvent*>{} : it->second;
}

const HostEvent* EventStore::lookup(const EventRef& ref) const {
    auto it = logs_.find({ref.host_name, ref.log_name});
    if (it == logs_.end()) return nullptr;
    const auto& vec = it->second;
    auto pos = std::lower_bound(vec.begin(), vec.end(), ref.record_id,
                                [](const HostEvent& e, std::uint64_t id) { return e.record_id < id; });
    if (pos == vec.end() || pos->record_id != ref.record_id) return nullptr;
    return &*pos;
}

void write_events_jsonl(const std::filesystem::path& path, std::span<const HostEvent> events) {
    std::ofstream out(path);
    if (!out) throw LmError("cannot write " + path.string());
    for (const auto& e : events) out << event_to_json(e).dump() << '\n';
}

// --- classic pcap ---

namespace {

struct ByteReader {
    std::span<const std::uint8_t> data;
    std::size_t pos = 0;
    bool swap = false;

    bool has(std::size_t n) const { return pos + n <= data.size(); }

    std::uint32_t u32() {
        std::uint32_t v = static_cast<std::uint32_t>(data[pos]) |
                          static_cast<std::uint32_t>(data[pos + 1]) << 8 |
                          static_cast<std::uint32_t>(data[pos + 2]) << 16 |
                          static_cast<std::uint32_t>(data[pos + 3]) << 24;
        pos += 4;
        if (swap) v = __builtin_bswap32(v);
        return v;
    }

    std::uint16_t u16() {
        std::uint16_t v = static_cast<std::uint16_t>(data[pos] | data[pos + 1] << 8);
        pos += 2;
        if (swap) v = __builtin_bswap16(v);
        return v;
    }

    void skip(std::size_t n) { pos += n; }
};

std::uint16_t be16(std::span<const std::uint8_t> p, std::size_t at) {
    return static_cast<std::uint16_t>(p[at] << 8 | p[at + 1]);
}

std::uint32_t be32(std::span<const std::uint8_t> p, std::size_t at) {
    return static_cast<std::uint32_t>(p[at]) << 24 | static_cast<std::uint32_t>(p[at + 1]) << 16 |
           static_cast<std::uint32_t>(p[at + 2]) << 8 | static_cast<std::uint32_t>(p[at + 3]);
}

// Ethernet -> IPv4 -> TCP/UDP. One VLAN tag (0x8100) is unwrapped. Returns
// nothing for anything else; never reads past the capture length.
std::optional<ConnectionFields> decode_five_tuple(std::span<const std::uint8_t> frame) {
    std::size_t off = 0;
    if (frame.size() < off + 14) return std::nullopt;
    std::uint16_t ethertype = be16(frame, off + 12);
    off += 14;
    if (ethertype == 0x8100) {
        if (frame.size() < off + 4) return std::nullopt;
        ethertype = be16(frame, off + 2);
        off += 4;
    }
    if (ethertype != 0x0800) return std::nullopt;
    if (frame.size() < off + 20) return std::nullopt;
    std::uint8_t ver_ihl = frame[off];
    if ((ver_ihl >> 4) != 4) return std::nullopt;
    std::size_t ihl = static_cast<std::size_t>(ver_ihl & 0x0f) * 4;
    if (ihl < 20 || frame.size() < off + ihl) return std::nullopt;
    std::uint8_t proto = frame[off + 9];
    if (proto != 6 && proto != 17) return std::nullopt;
    ConnectionFields c;
    c.src_ip = IPv4{be32(frame, off + 12)};
    c.dst_ip = IPv4{be32(frame, off + 16)};
    c.protocol = proto == 6 ? Protocol::Tcp : Protocol::Udp;
    std::size_t l4 = off + ihl;
    if (frame.size() < l4 + 4) return std::nullopt;
    c.src_port = be16(frame, l4);
    c.dst_port = be16(frame, l4 + 2);
    c.direction = Direction::Outbound;  // capture records carry no host-relative direction
    return c;
}

}  // namespace

PcapFile parse_pcap(std::span<const std::uint8_t> bytes) {
    ByteReader r{bytes};
    if (!r.has(24)) throw LmError("pcap: truncated global header");
    std::uint32_t magic = r.u32();
    if (magic == kPcapMagicNative) {
        r.swap = false;
    } else if (magic == kPcapMagicSwapped) {
        r.swap = true;
    } else {
        throw LmError("pcap: unsupported magic");
    }
    r.u16();  // version major
    r.u16();  // version minor
    r.u32();  // thiszone
    r.u32();  // sigfigs
    r.u32();  // snaplen
    std::uint32_t link_type = r.u32();

    PcapFile out;
    out.link_type = link_type;
    std::size_t idx = 0;
    while (r.pos < bytes.size()) {
        if (!r.has(16))
            throw LmError("pcap: truncated record header at packet " + std::to_string(idx));
        std::uint32_t ts_sec = r.u32();
        std::uint32_t ts_usec = r.u32();
        std::uint32_t incl_len = r.u32();
        std::uint32_t orig_len = r.u32();
        if (!r.has(incl_len))
            throw LmError("pcap: truncated packet data at packet " + std::to_string(idx));
        if (incl_len > orig_len)
            throw LmError("pcap: caplen exceeds original length at packet " + std::to_string(idx));
        PacketRecord rec;
        rec.ts = static_cast<TimeStamp>(ts_sec) * 1000 + ts_usec / 1000;
        rec.caplen = incl_len;
        rec.origlen = orig_len;
        rec.link_type = link_type;
        if (link_type == kLinkTypeEthernet)
            rec.five_tuple = decode_five_tuple(bytes.subspan(r.pos, incl_len));
        r.skip(incl_len);
        out.packets.push_back(std::move(rec));
        ++idx;
    }
    return out;
}

PcapFile load_pcap(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LmError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return parse_pcap(bytes);
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v, bool swapped) {
    if (swapped) v = __builtin_bswap32(v);
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v, bool swapped) {
    if (swapped) v = __builtin_bswap16(v);
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
}

void put_be16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(v >> 8);
    out.push_back(v & 0xff);
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back((v >> 24) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back(v & 0xff);
}

}  // namespace

std::vector<std::uint8_t> encode_pcap(std::span<const RawPacket> packets, std::uint32_t link_type,
                                      bool swapped) {
    std::vector<std::uint8_t> out;
    put_u32(out, swapped ? kPcapMagicSwapped : kPcapMagicNative, false);
    put_u16(out, 2, swapped);   // version major
    put_u16(out, 4, swapped);   // version minor
    put_u32(out, 0, swapped);   // thiszone
    put_u32(out, 0, swapped);   // sigfigs
    put_u32(out, 65535, swapped);
    put_u32(out, link_type, swapped);
    for (const auto& p : packets) {
        put_u32(out, static_cast<std::uint32_t>(p.ts / 1000), swapped);
        put_u32(out, static_cast<std::uint32_t>(p.ts % 1000) * 1000, swapped);
        put_u32(out, static_cast<std::uint32_t>(p.frame.size()), swapped);
        put_u32(out, static_cast<std::uint32_t>(p.frame.size()), swapped);
        out.insert(out.end(), p.frame.begin(), p.frame.end());
    }
    return out;
}

std::vector<std::uint8_t> build_frame(const ConnectionFields& c, std::size_t payload_len) {
    std::vector<std::uint8_t> f;
    // MAC addresses derived from the IPs; cosmetic only.
    auto put_mac = [&f](IPv4 ip) {
        f.push_back(0x02);
        f.push_back(0x00);
        put_be32(f, ip.value);
    };
    put_mac(c.dst_ip);
    put_mac(c.src_ip);
    put_be16(f, 0x0800);

    std::size_t l4_len = (c.protocol == Protocol::Tcp ? 20 : 8) + payload_len;
    std::size_t ip_total = 20 + l4_len;
    f.push_back(0x45);  // v4, ihl 5
    f.push_back(0);
    put_be16(f, static_cast<std::uint16_t>(ip_total));
    put_be16(f, 0);      // identification
    put_be16(f, 0x4000); // don't fragment
    f.push_back(64);     // ttl
    f.push_back(c.protocol == Protocol::Tcp ? 6 : 17);
    put_be16(f, 0);  // checksum left zero; parser does not verify
    put_be32(f, c.src_ip.value);
    put_be32(f, c.dst_ip.value);

    put_be16(f, c.src_port);
    put_be16(f, c.dst_port);
    if (c.protocol == Protocol::Tcp) {
        put_be32(f, 1);  // seq
        put_be32(f, 0);  // ack
        f.push_back(0x50);  // data offset 5
        f.push_back(0x18);  // PSH|ACK
        put_be16(f, 8192);  // window
        put_be16(f, 0);     // checksum
        put_be16(f, 0);     // urgent
    } else {
        put_be16(f, static_cast<std::uint16_t>(8 + payload_len));
        put_be16(f, 0);  // checksum
    }
    f.insert(f.end(), payload_len, 0);
    return f;
}

}  // namespace lmforge
