#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "lmforge/labeling.hpp"
#include "lmforge/pipeline.hpp"
#include "test_support.hpp"

using namespace lmforge;

TEST_CASE("pipeline runs a small corpus end to end with exact oracle labels") {
    testing::TempDir tmp("pipe");
    RunConfig cfg = testing::random_small_config(1234, /*force_pid_reuse=*/false);
    RunManifest m = run_pipeline(cfg, tmp.path);

    CHECK(m.events > 0);
    CHECK(m.labels >= m.malicious_events);
    CHECK(m.malicious_events <= m.events);

    // withheld oracle
    auto gt = ground_truth_from_json(
        nlohmann::json::parse(std::ifstream(tmp.path / "private" / "ground_truth.json")));
    auto labels = load_labels_jsonl(tmp.path / "labels.jsonl");
    std::set<EventRef> labeled;
    for (const auto& l : labels) labeled.insert(l.ref());
    std::set<EventRef> truth;
    for (const auto& [ref, _] : gt.events) truth.insert(ref);
    CHECK(labeled == truth);

    for (const char* artifact :
         {"schedules.json", "events.jsonl", "attack_input.json", "forest.json", "collisions.json",
          "labels.jsonl", "labels_net.jsonl", "flows.json", "packet_labels.jsonl", "manifest.json"})
        CHECK(std::filesystem::exists(tmp.path / artifact));
    CHECK(std::filesystem::exists(tmp.path / "report" / "daily_steps.csv"));
    CHECK(std::filesystem::exists(tmp.path / "report" / "sizes.csv"));
}

TEST_CASE("pipeline determinism: same seed, byte-identical artifacts") {
    testing::TempDir a("det_a"), b("det_b");
    RunConfig cfg = testing::random_small_config(777, false);
    run_pipeline(cfg, a.path);
    run_pipeline(cfg, b.path);

    for (const char* artifact :
         {"schedules.json", "events.jsonl", "events_attack.jsonl", "attack_input.json",
          "forest.json", "labels.jsonl", "labels_net.jsonl", "flows.json", "packet_labels.jsonl",
          "report/daily_steps.csv", "report/timeline.csv", "report/scenario_versions.csv"}) {
        CAPTURE(artifact);
        CHECK(testing::read_file(a.path / artifact) == testing::read_file(b.path / artifact));
    }

    // manifests agree once timings are dropped
    auto ma = nlohmann::json::parse(std::ifstream(a.path / "manifest.json"));
    auto mb = nlohmann::json::parse(std::ifstream(b.path / "manifest.json"));
    ma.erase("timings_ms");
    mb.erase("timings_ms");
    CHECK(ma == mb);
}

TEST_CASE("pipeline aborts naming the failing stage") {
    testing::TempDir tmp("stagefail");
    RunConfig cfg = testing::random_small_config(5, false);
    cfg.attack_plan[0].scenario = "no-such-scenario";
    CHECK_THROWS_WITH_AS(run_pipeline(cfg, tmp.path), doctest::Contains("stage emit"), LmError);
}

TEST_CASE("run config json round trip and overrides") {
    RunConfig cfg = default_config();
    auto j = run_config_to_json(cfg);
    RunConfig back = run_config_from_json(j);
    CHECK(back.seed == cfg.seed);
    CHECK(back.employees.size() == cfg.employees.size());
    CHECK(back.scenarios.size() == cfg.scenarios.size());
    CHECK(back.attack_plan.size() == cfg.attack_plan.size());
    CHECK(back.end_extension_ms == cfg.end_extension_ms);
    CHECK(run_config_to_json(back) == j);

    nlohmann::json partial = {{"seed", 99}, {"num_days", 3}};
    RunConfig merged = run_config_from_json(partial);
    CHECK(merged.seed == 99);
    CHECK(merged.num_days == 3);
    CHECK(merged.employees.size() == 11);  // defaults fill the rest
}

TEST_CASE("ground truth and collision sidecars round trip") {
    GroundTruth gt;
    gt.events[EventRef{"h1", "Security", 7}] = StepKey{"s", "v1", 1, 2};
    FlowKey key = canonicalize_flow_key(ConnectionFields{Direction::Outbound,
                                                         parse_ipv4("10.10.0.12"), 49200,
                                                         parse_ipv4("10.10.0.200"), 445,
                                                         Protocol::Tcp});
    gt.flows[{key, StepKey{"s", "v1", 1, 2}}] = Interval{100, 200};
    gt.packets["h1"][3] = StepKey{"s", "v1", 1, 2};
    auto back = ground_truth_from_json(ground_truth_to_json(gt));
    CHECK(back.events == gt.events);
    CHECK(back.flows == gt.flows);
    CHECK(back.packets == gt.packets);

    PidCollisionReport r{"h1", 1003, {10, 20}, {StepKey{"s", "v1", 1, 2}}};
    auto reports = collisions_from_json(collisions_to_json({r}));
    REQUIRE(reports.size() == 1);
    CHECK(reports[0].host_name == r.host_name);
    CHECK(reports[0].pid == r.pid);
    CHECK(reports[0].creation_timestamps == r.creation_timestamps);
    CHECK(reports[0].affected_steps == r.affected_steps);
}

TEST_CASE("manifest counts stay mutually consistent") {
    testing::TempDir tmp("counts");
    RunConfig cfg = testing::random_small_config(31, false);
    RunManifest m = run_pipeline(cfg, tmp.path);
    CHECK(m.malicious_events <= m.events);
    CHECK(m.labels <= m.events);
    CHECK(m.malicious_fraction == doctest::Approx(double(m.malicious_events) / double(m.events)));
    CHECK(m.packet_labels <= m.packets);
}

TEST_CASE("default config mirrors the desk-scale shape") {
    RunConfig cfg = default_config();
    CHECK(cfg.employees.size() == 11);
    CHECK(cfg.num_days == 25);
    CHECK(cfg.start_day == Date{2024, 10, 10});
    std::set<std::string> scenario_names;
    for (const auto& s : cfg.scenarios) scenario_names.insert(s.scenario);
    CHECK(scenario_names.size() == 7);
    std::set<int> attack_days;
    for (const auto& e : cfg.attack_plan) attack_days.insert(e.day_offset);
    CHECK(attack_days.size() == 10);
    for (const auto& s : cfg.scenarios) {
        REQUIRE(!s.steps.empty());
        CHECK(s.steps[0].host_name == "ssh-srv");  // shared first hop
        for (std::size_t i = 0; i < s.steps.size(); ++i)
            CHECK(s.steps[i].step == static_cast<int>(i) + 1);
    }
}
