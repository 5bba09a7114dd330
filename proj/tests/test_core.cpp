#include <doctest.h>

#include <nlohmann/json.hpp>

#include "lmforge/core.hpp"
#include "lmforge/rng.hpp"
#include "test_support.hpp"

using namespace lmforge;

TEST_CASE("flow key canonicalization is direction free") {
    ConnectionFields c;
    c.direction = Direction::Outbound;
    c.src_ip = parse_ipv4("10.0.0.1");
    c.src_port = 50000;
    c.dst_ip = parse_ipv4("10.0.0.2");
    c.dst_port = 445;
    c.protocol = Protocol::Tcp;

    FlowKey key = canonicalize_flow_key(c);
    CHECK(key.a.ip == parse_ipv4("10.0.0.1"));
    CHECK(key.a.port == 50000);
    CHECK(key.b.ip == parse_ipv4("10.0.0.2"));
    CHECK(key.b.port == 445);

    CHECK(canonicalize_flow_key(reversed(c)) == key);

    // port tiebreak on equal ips
    ConnectionFields same_ip;
    same_ip.src_ip = parse_ipv4("10.0.0.1");
    same_ip.src_port = 2;
    same_ip.dst_ip = parse_ipv4("10.0.0.1");
    same_ip.dst_port = 1;
    same_ip.protocol = Protocol::Udp;
    FlowKey tie = canonicalize_flow_key(same_ip);
    CHECK(tie.a.port == 1);
    CHECK(tie.b.port == 2);
}

TEST_CASE("flow key symmetry holds for random tuples") {
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        ConnectionFields c;
        c.direction = rng.bernoulli(0.5) ? Direction::Inbound : Direction::Outbound;
        c.src_ip = IPv4{static_cast<std::uint32_t>(rng.next_u64())};
        c.dst_ip = IPv4{static_cast<std::uint32_t>(rng.next_u64())};
        c.src_port = static_cast<std::uint16_t>(rng.uniform_int(0, 65535));
        c.dst_port = static_cast<std::uint16_t>(rng.uniform_int(0, 65535));
        c.protocol = rng.bernoulli(0.5) ? Protocol::Tcp : Protocol::Udp;
        CHECK(canonicalize_flow_key(c) == canonicalize_flow_key(reversed(c)));
    }
}

TEST_CASE("attack input validation") {
    AttackStepDescriptor d;
    d.pid = 1200;
    d.window = {100, 200};
    d.label = StepLabel{"PtH", "v1", 1, 1, true, {"T1550.002"}};

    SUBCASE("well formed input is clean") {
        AttackStepDescriptor d2 = d;
        d2.label.step = 2;
        d2.window = {300, 400};
        std::vector<HostAttackInput> input = {{"dc1", {d}}, {"dc2", {d2}}};
        CHECK(validate_host_attack_input(input).empty());
    }
    SUBCASE("duplicate step identity on one host") {
        std::vector<HostAttackInput> input = {{"dc1", {d, d}}};
        auto report = validate_host_attack_input(input);
        REQUIRE(report.size() == 1);
        CHECK(report[0].kind == "duplicate-step-identity");
    }
    SUBCASE("inverted window") {
        AttackStepDescriptor bad = d;
        bad.window = {200, 100};
        auto report = validate_host_attack_input({{"dc1", {bad}}});
        REQUIRE(report.size() == 1);
        CHECK(report[0].kind == "malformed-window");
    }
    SUBCASE("duplicate host") {
        auto report = validate_host_attack_input({{"dc1", {d}}, {"dc1", {}}});
        REQUIRE(report.size() == 1);
        CHECK(report[0].kind == "duplicate-host");
    }
}

TEST_CASE("event json round trip") {
    HostEvent e;
    e.host_name = "ws01";
    e.log_name = "Security";
    e.record_id = 42;
    e.event_id = kEventWfpConnection;
    e.timestamp = 1728554400123;
    e.pid = 1340;
    ConnectionFields c;
    c.direction = Direction::Inbound;
    c.src_ip = parse_ipv4("10.10.0.12");
    c.src_port = 49152;
    c.dst_ip = parse_ipv4("10.10.0.200");
    c.dst_port = 445;
    c.protocol = Protocol::Tcp;
    e.net = c;
    e.attrs["note"] = "x";

    auto j = event_to_json(e);
    CHECK(j.contains("host"));
    CHECK(j.contains("src_ip"));
    CHECK(event_from_json(j) == e);

    HostEvent p;
    p.host_name = "ws01";
    p.record_id = 43;
    p.event_id = kEventProcessCreate;
    p.timestamp = 5;
    p.pid = 1341;
    p.parent_pid = 1340;
    p.image = "cmd.exe";
    CHECK(event_from_json(event_to_json(p)) == p);
}

TEST_CASE("4688 and 5156 schema requirements enforced on decode") {
    nlohmann::json j = {{"host", "a"}, {"log", "Security"}, {"record_id", 1},
                        {"event_id", 4688}, {"ts", 0},      {"pid", 10}};
    CHECK_THROWS_AS((void)event_from_json(j), LmError);
    j["event_id"] = 5156;
    CHECK_THROWS_AS((void)event_from_json(j), LmError);
}

TEST_CASE("attack input and label json round trips") {
    AttackStepDescriptor d;
    d.pid = 7;
    d.window = {10, 20};
    d.label = StepLabel{"Golden Ticket", "v1", 2, 3, false, {"T1558.001"}};
    std::vector<HostAttackInput> input = {{"dc1", {d}}};
    auto parsed = attack_input_from_json(attack_input_to_json(input));
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0].host_name == "dc1");
    REQUIRE(parsed[0].steps.size() == 1);
    CHECK(parsed[0].steps[0] == d);

    LabelRecord r{"dc1", "Security", 99, d.label};
    CHECK(label_from_json(label_to_json(r)) == r);

    LabeledFlow f;
    f.key = canonicalize_flow_key(ConnectionFields{Direction::Outbound, parse_ipv4("10.0.0.9"), 1111,
                                                   parse_ipv4("10.0.0.8"), 445, Protocol::Tcp});
    f.window = {1, 2};
    f.label = d.label;
    CHECK(flow_from_json(flow_to_json(f)) == f);
}

TEST_CASE("dates and times") {
    Date d{2024, 10, 10};
    CHECK(to_string(d) == "2024-10-10");
    CHECK(parse_date("2024-10-10") == d);
    CHECK(weekday_index(d) == 4);  // Thursday
    CHECK(add_days(d, 22) == Date{2024, 11, 1});
    CHECK(date_from_ms(date_to_ms(d) + 5 * kMsPerHour) == d);
    CHECK(parse_hhmm("03:30") == 3 * kMsPerHour + 30 * kMsPerMinute);
    CHECK(format_hhmm(parse_hhmm("17:05")) == "17:05");
    CHECK_THROWS_AS(parse_date("2024-13-01"), LmError);
    CHECK_THROWS_AS(parse_hhmm("25:00"), LmError);
    CHECK(to_string(parse_ipv4("192.168.59.7")) == "192.168.59.7");
    CHECK_THROWS_AS(parse_ipv4("10.0.0.256"), LmError);
}
