// Python bindings for the main operations. Structured data crosses the
// boundary as plain dicts/lists built from the canonical JSON encodings, so
// the python surface matches the file formats exactly.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "lmforge/labeling.hpp"
#include "lmforge/netlabel.hpp"
#include "lmforge/pipeline.hpp"

namespace py = pybind11;
using namespace lmforge;

namespace {

py::object json_to_py(const nlohmann::json& j) {
    py::object loads = py::module_::import("json").attr("loads");
    return loads(j.dump());
}

nlohmann::json py_to_json(const py::object& obj) {
    py::object dumps = py::module_::import("json").attr("dumps");
    return nlohmann::json::parse(dumps(obj).cast<std::string>());
}

ConnectionFields connection_from_dict(const py::dict& d) {
    ConnectionFields c;
    c.direction = direction_from_string(d.contains("direction")
                                            ? d["direction"].cast<std::string>()
                                            : "outbound");
    c.src_ip = parse_ipv4(d["src_ip"].cast<std::string>());
    c.src_port = d["src_port"].cast<std::uint16_t>();
    c.dst_ip = parse_ipv4(d["dst_ip"].cast<std::string>());
    c.dst_port = d["dst_port"].cast<std::uint16_t>();
    c.protocol = protocol_from_string(d.contains("proto") ? d["proto"].cast<std::string>() : "tcp");
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "labeled lateral-movement dataset toolkit";

    m.def("canonicalize_flow_key", [](const py::dict& conn) {
        FlowKey key = canonicalize_flow_key(connection_from_dict(conn));
        py::dict out;
        out["ip_a"] = to_string(key.a.ip);
        out["port_a"] = key.a.port;
        out["ip_b"] = to_string(key.b.ip);
        out["port_b"] = key.b.port;
        out["proto"] = to_string(key.protocol);
        return out;
    }, py::arg("connection"),
       "Direction-free flow key for a five-tuple dict (src_ip/src_port/dst_ip/dst_port/proto).");

    m.def("validate_attack_input", [](const py::object& input) {
        auto parsed = attack_input_from_json(py_to_json(input));
        py::list out;
        for (const auto& v : validate_host_attack_input(parsed)) {
            py::dict d;
            d["host"] = v.host_name;
            d["kind"] = v.kind;
            d["detail"] = v.detail;
            out.append(d);
        }
        return out;
    }, py::arg("attack_input"), "Violation report for an attack_input structure; empty if valid.");

    m.def("build_schedule_set", [](const py::object& scheduler_config, const py::object& employees,
                                   const std::string& start_day, int num_days) {
        SchedulerConfig cfg = scheduler_config_from_json(py_to_json(scheduler_config));
        std::vector<EmployeeProfile> profiles;
        for (const auto& e : py_to_json(employees))
            profiles.push_back(EmployeeProfile{e.at("employee_id").get<std::string>(),
                                               e.at("host").get<std::string>(),
                                               e.value("department", ""),
                                               e.value("behavior", "")});
        std::vector<Date> days;
        Date d0 = parse_date(start_day);
        for (int i = 0; i < num_days; ++i) days.push_back(add_days(d0, i));
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& plan : build_day_plans(cfg, profiles, days))
            arr.push_back(day_plan_to_json(plan));
        return json_to_py(arr);
    }, py::arg("scheduler_config"), py::arg("employees"), py::arg("start_day"), py::arg("num_days"));

    m.def("build_forest", [](const std::string& events_jsonl, const py::object& attack_input,
                             std::int64_t end_extension_ms) {
        auto store = EventStore::load(events_jsonl);
        auto input = attack_input_from_json(py_to_json(attack_input));
        auto result = build_forest(input, store, end_extension_ms);
        py::dict out;
        out["forest"] = json_to_py(forest_to_json(result.forest));
        out["collisions"] = json_to_py(collisions_to_json(result.collisions));
        return out;
    }, py::arg("events_jsonl"), py::arg("attack_input"), py::arg("end_extension_ms") = 30'000);

    m.def("label_system_logs", [](const std::string& events_jsonl, const py::object& forest_json) {
        auto store = EventStore::load(events_jsonl);
        Forest forest = forest_from_json(py_to_json(forest_json));
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& l : label_system_logs(forest, store)) arr.push_back(label_to_json(l));
        return json_to_py(arr);
    }, py::arg("events_jsonl"), py::arg("forest"));

    m.def("parse_pcap", [](const py::bytes& data) {
        std::string buf = data;
        auto parsed = parse_pcap(std::span<const std::uint8_t>(
            reinterpret_cast<const std::uint8_t*>(buf.data()), buf.size()));
        py::list packets;
        for (const auto& p : parsed.packets) {
            py::dict d;
            d["ts"] = p.ts;
            d["caplen"] = p.caplen;
            d["origlen"] = p.origlen;
            if (p.five_tuple) {
                py::dict t;
                t["src_ip"] = to_string(p.five_tuple->src_ip);
                t["src_port"] = p.five_tuple->src_port;
                t["dst_ip"] = to_string(p.five_tuple->dst_ip);
                t["dst_port"] = p.five_tuple->dst_port;
                t["proto"] = to_string(p.five_tuple->protocol);
                d["five_tuple"] = t;
            } else {
                d["five_tuple"] = py::none();
            }
            packets.append(d);
        }
        py::dict out;
        out["link_type"] = parsed.link_type;
        out["packets"] = packets;
        return out;
    }, py::arg("data"));

    m.def("default_config", [] { return json_to_py(run_config_to_json(default_config())); },
          "The built-in desk-scale run configuration.");

    m.def("run_pipeline", [](const py::object& config, const std::string& out_dir) {
        RunConfig cfg = run_config_from_json(py_to_json(config));
        RunManifest manifest = run_pipeline(cfg, out_dir);
        return json_to_py(manifest_to_json(manifest));
    }, py::arg("config"), py::arg("out_dir"),
       "Run schedule/emit/merge/forest/label/report end to end; returns the manifest.");
}
