#include <doctest.h>

#include "lmforge/forest.hpp"
#include "lmforge/rng.hpp"
#include "test_support.hpp"

using namespace lmforge;

namespace {

std::vector<const HostEvent*> ptrs(const std::vector<HostEvent>& events) {
    std::vector<const HostEvent*> out;
    for (const auto& e : events) out.push_back(&e);
    return out;
}

std::set<Pid> pid_set(const std::map<Pid, TimeStamp>& members) {
    std::set<Pid> out;
    for (const auto& [pid, _] : members) out.insert(pid);
    return out;
}

}  // namespace

TEST_CASE("windowed closure over a simple chain") {
    std::vector<HostEvent> events;
    events.push_back(testing::make_creation("h", 1, 5, 101, 100));
    events.push_back(testing::make_creation("h", 2, 8, 102, 101));

    auto wide = get_process_tree(100, {0, 10}, ptrs(events));
    CHECK(pid_set(wide) == std::set<Pid>{100, 101, 102});
    CHECK(wide.at(100) == 0);
    CHECK(wide.at(101) == 5);
    CHECK(wide.at(102) == 8);

    auto narrow = get_process_tree(100, {0, 6}, ptrs(events));
    CHECK(pid_set(narrow) == std::set<Pid>{100, 101});

    SUBCASE("no events yields the root singleton") {
        auto lone = get_process_tree(100, {0, 10}, {});
        CHECK(pid_set(lone) == std::set<Pid>{100});
        CHECK(lone.at(100) == 0);
    }
    SUBCASE("parent cycles terminate") {
        events.push_back(testing::make_creation("h", 3, 9, 100, 102));
        auto cyclic = get_process_tree(100, {0, 10}, ptrs(events));
        CHECK(pid_set(cyclic) == std::set<Pid>{100, 101, 102});
        // the root's first_seen never moves off the window start
        CHECK(cyclic.at(100) == 0);
    }
}

TEST_CASE("closure equals the fixpoint oracle on random instances") {
    Rng rng(404);
    for (int iter = 0; iter < 1'000; ++iter) {
        int n = static_cast<int>(rng.uniform_int(0, 50));
        std::vector<HostEvent> events;
        for (int i = 0; i < n; ++i) {
            Pid child = rng.uniform_int(1, 24);
            Pid parent = rng.uniform_int(1, 24);
            TimeStamp ts = rng.uniform_int(0, 120);
            events.push_back(testing::make_creation(
                "h", static_cast<std::uint64_t>(i + 1), ts, child, parent));
        }
        Pid root = rng.uniform_int(1, 24);
        TimeStamp w0 = rng.uniform_int(0, 100);
        Interval window{w0, w0 + rng.uniform_int(0, 60)};

        auto got = get_process_tree(root, window, ptrs(events));
        auto want = testing::oracle_closure(root, window, events);
        CHECK(got == want);
    }
}

TEST_CASE("tree membership is monotone in the window") {
    Rng rng(777);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<HostEvent> events;
        int n = static_cast<int>(rng.uniform_int(1, 40));
        for (int i = 0; i < n; ++i)
            events.push_back(testing::make_creation("h", static_cast<std::uint64_t>(i + 1),
                                                    rng.uniform_int(0, 100), rng.uniform_int(1, 20),
                                                    rng.uniform_int(1, 20)));
        Interval small{20, 60};
        Interval big{10, 90};
        auto inner = pid_set(get_process_tree(5, small, ptrs(events)));
        auto outer = pid_set(get_process_tree(5, big, ptrs(events)));
        CHECK(std::includes(outer.begin(), outer.end(), inner.begin(), inner.end()));
    }
}

TEST_CASE("build_forest produces one tree per descriptor") {
    std::vector<HostEvent> events;
    events.push_back(testing::make_creation("dc2", 1, 1000, 5100, 600, "splunkd_A3.exe"));
    events.push_back(testing::make_creation("dc2", 2, 1500, 5200, 5100, "whoami.exe"));
    events.push_back(testing::make_creation("dc2", 3, 9000, 5300, 5100, "robocopy.exe"));
    auto store = EventStore::from_events(events);

    AttackStepDescriptor step3;
    step3.pid = 5100;
    step3.window = {1000, 2000};
    step3.label = StepLabel{"Passing the Hash", "v1", 1, 3, true, {"T1550.002"}};
    AttackStepDescriptor step4 = step3;
    step4.window = {8500, 9500};
    step4.label.step = 4;

    auto result = build_forest({{"dc2", {step3, step4}}}, store, 0);
    REQUIRE(result.forest.trees.size() == 2);
    CHECK(pid_set(result.forest.trees[0].members) == std::set<Pid>{5100, 5200});
    CHECK(pid_set(result.forest.trees[1].members) == std::set<Pid>{5100, 5300});
    CHECK(result.collisions.empty());

    SUBCASE("empty input yields an empty forest") {
        auto empty = build_forest({}, store, 0);
        CHECK(empty.forest.trees.empty());
    }
    SUBCASE("host missing from the store is an error") {
        CHECK_THROWS_WITH_AS((void)build_forest({{"ghost", {step3}}}, store, 0),
                             doctest::Contains("ghost"), LmError);
    }
    SUBCASE("invalid input is rejected") {
        CHECK_THROWS_AS((void)build_forest({{"dc2", {step3, step3}}}, store, 0), LmError);
    }
}

TEST_CASE("end extension widens the capture window") {
    std::vector<HostEvent> events;
    events.push_back(testing::make_creation("h", 1, 1000, 200, 600, "agent.exe"));
    // child spawned 10s after the descriptor's end time
    events.push_back(testing::make_creation("h", 2, 12'000, 201, 200, "late.exe"));
    auto store = EventStore::from_events(events);

    AttackStepDescriptor d;
    d.pid = 200;
    d.window = {1000, 2000};
    d.label = StepLabel{"s", "v1", 1, 1, true, {}};

    for (std::int64_t ext : {0, 5'000, 9'999, 10'000, 30'000}) {
        CAPTURE(ext);
        auto result = build_forest({{"h", {d}}}, store, ext);
        bool captured = result.forest.trees[0].members.count(201) > 0;
        CHECK(captured == (ext >= 10'000));
        auto oracle = testing::oracle_closure(200, {1000, 2000 + ext}, events);
        CHECK(result.forest.trees[0].members == oracle);
    }
}

TEST_CASE("pid reuse inside one window is reported, not guessed away") {
    std::vector<HostEvent> events;
    events.push_back(testing::make_creation("h", 1, 1000, 300, 600, "agent.exe"));
    events.push_back(testing::make_creation("h", 2, 1200, 301, 300, "a.exe"));
    // same pid created again inside the window by an unrelated parent
    events.push_back(testing::make_creation("h", 3, 1400, 301, 999, "b.exe"));
    auto store = EventStore::from_events(events);

    AttackStepDescriptor d;
    d.pid = 300;
    d.window = {1000, 2000};
    d.label = StepLabel{"s", "v1", 1, 1, true, {}};
    auto result = build_forest({{"h", {d}}}, store, 0);
    REQUIRE(result.collisions.size() == 1);
    CHECK(result.collisions[0].pid == 301);
    CHECK(result.collisions[0].creation_timestamps.size() == 2);
    REQUIRE(result.collisions[0].affected_steps.size() == 1);
    CHECK(result.collisions[0].affected_steps[0] == d.label.key());
}

TEST_CASE("forest json round trip preserves labeling inputs") {
    std::vector<HostEvent> events;
    events.push_back(testing::make_creation("h", 1, 100, 50, 600, "agent.exe"));
    events.push_back(testing::make_creation("h", 2, 150, 51, 50, "c.exe"));
    auto store = EventStore::from_events(events);
    AttackStepDescriptor d;
    d.pid = 50;
    d.window = {100, 300};
    d.label = StepLabel{"s", "v2", 3, 2, false, {"T1api"}};
    auto built = build_forest({{"h", {d}}}, store, 30'000);

    Forest back = forest_from_json(forest_to_json(built.forest));
    REQUIRE(back.trees.size() == 1);
    CHECK(back.trees[0].root_pid == 50);
    CHECK(back.trees[0].members == built.forest.trees[0].members);
    CHECK(back.trees[0].extended_end == built.forest.trees[0].extended_end);
    CHECK(back.trees[0].meta.label == d.label);
    CHECK(back.trees[0].meta.window.start == 100);
}
