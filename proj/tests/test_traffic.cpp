#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "xprint/rng.hpp"
#include "xprint/traffic.hpp"

using namespace xprint;

namespace {

Flow make_flow(const std::string& id, const std::string& domain, double t0, int n,
               const std::string& uri = "/u") {
    Flow f;
    f.flow_id = id;
    f.domain = domain;
    for (int i = 0; i < n; ++i) {
        Packet p;
        p.timestamp = quantize_us(t0 + 0.01 * i);
        p.dir = i % 2 == 0 ? Direction::Outbound : Direction::Inbound;
        p.size = 100 + i;
        p.uri_label = uri;
        f.packets.push_back(p);
    }
    return f;
}

TrafficTrace make_trace(const std::string& id, double t0) {
    TrafficTrace t;
    t.trace_id = id;
    t.flows.push_back(make_flow(id + "/f0", "a.example", t0, 4));
    t.flows.push_back(make_flow(id + "/f1", "b.example", t0 + 0.5, 3));
    t.flows[0].app_label = "app0";
    t.flows[0].platform_label = "android";
    t.flows[0].behavior_label = "login";
    t.ground_truth_windows.push_back({t0, t0 + 1.0, "app0", "login"});
    return t;
}

}  // namespace

TEST_CASE("microsecond quantization round-trips through %.9g text") {
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const double t = quantize_us(rng.uniform(0.0, 999.0));
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.9g", t);
        CHECK(std::stod(buf) == t);
    }
}

TEST_CASE("save/load round-trips traces exactly") {
    std::vector<TrafficTrace> traces = {make_trace("t0", 1.0), make_trace("t1", 2.25)};
    traces[1].flows[0].packets[0].uri_label.reset();
    std::stringstream buf;
    save_traces(traces, buf);
    const auto loaded = load_traces(buf);

    REQUIRE(loaded.size() == traces.size());
    for (std::size_t i = 0; i < traces.size(); ++i) {
        CHECK(loaded[i].trace_id == traces[i].trace_id);
        REQUIRE(loaded[i].flows.size() == traces[i].flows.size());
        for (std::size_t k = 0; k < traces[i].flows.size(); ++k) {
            const Flow& a = traces[i].flows[k];
            const Flow& b = loaded[i].flows[k];
            CHECK(a.flow_id == b.flow_id);
            CHECK(a.domain == b.domain);
            CHECK(a.app_label == b.app_label);
            CHECK(a.platform_label == b.platform_label);
            CHECK(a.behavior_label == b.behavior_label);
            REQUIRE(a.packets.size() == b.packets.size());
            for (std::size_t j = 0; j < a.packets.size(); ++j) {
                CHECK(a.packets[j].timestamp == b.packets[j].timestamp);
                CHECK(a.packets[j].dir == b.packets[j].dir);
                CHECK(a.packets[j].size == b.packets[j].size);
                CHECK(a.packets[j].uri_label == b.packets[j].uri_label);
            }
        }
        REQUIRE(loaded[i].ground_truth_windows.size() ==
                traces[i].ground_truth_windows.size());
        for (std::size_t w = 0; w < traces[i].ground_truth_windows.size(); ++w) {
            CHECK(loaded[i].ground_truth_windows[w].start ==
                  traces[i].ground_truth_windows[w].start);
            CHECK(loaded[i].ground_truth_windows[w].end ==
                  traces[i].ground_truth_windows[w].end);
            CHECK(loaded[i].ground_truth_windows[w].app ==
                  traces[i].ground_truth_windows[w].app);
        }
    }

    // a second serialization of the loaded traces is byte-identical
    std::stringstream buf2;
    save_traces(loaded, buf2);
    CHECK(buf.str() == buf2.str());
}

TEST_CASE("load rejects malformed records") {
    auto expect_throw = [](const std::string& text) {
        std::stringstream in(text);
        CHECK_THROWS(load_traces(in));
    };
    expect_throw("not json\n");
    expect_throw(R"({"trace_id":"t","flow_id":"f","domain":"d","app":null,"platform":null,"behavior":null,"packets":[[1.0,"sideways",10,null]]})");
    expect_throw(R"({"trace_id":"t","flow_id":"f","domain":"d","app":null,"platform":null,"behavior":null,"packets":[[1.0,"+1",0,null]]})");
    expect_throw(R"({"trace_id":"t","flow_id":"f","domain":"d","app":null,"platform":null,"behavior":null,"packets":[]})");
}

TEST_CASE("shift_trace moves packets and ground truth together") {
    const TrafficTrace t = make_trace("t", 1.0);
    const TrafficTrace s = shift_trace(t, 2.5);
    CHECK(s.flows[0].packets[0].timestamp == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(s.ground_truth_windows[0].start == doctest::Approx(3.5).epsilon(1e-12));
    CHECK(s.ground_truth_windows[0].end == doctest::Approx(4.5).epsilon(1e-12));
}

TEST_CASE("merge_traces interleaves flows, renames collisions, unions windows") {
    const TrafficTrace a = make_trace("a", 1.0);
    TrafficTrace b = make_trace("b", 0.0);
    b.flows[0].flow_id = "a/f0";  // force an id collision
    const TrafficTrace m = merge_traces(a, b, 3.0);

    CHECK(m.trace_id == "a+b");
    CHECK(m.flows.size() == 4);
    CHECK(m.ground_truth_windows.size() == 2);
    // flows sorted by start time: a starts at 1.0, shifted b at 3.0
    CHECK(m.flows.front().start_time() == doctest::Approx(1.0));
    CHECK(m.flows.back().start_time() >= m.flows.front().start_time());
    int renamed = 0;
    for (const auto& f : m.flows) renamed += f.flow_id == "a/f0~1" ? 1 : 0;
    CHECK(renamed == 1);
    // second window is b's, delayed by 3.0
    CHECK(m.ground_truth_windows[1].start == doctest::Approx(3.0));

    CHECK_THROWS(merge_traces(a, b, 5.5));
    CHECK_THROWS(merge_traces(a, b, -0.1));
}

TEST_CASE("overlay_traces unions parts in time order") {
    const TrafficTrace a = make_trace("a", 5.0);
    const TrafficTrace b = make_trace("b", 1.0);
    const TrafficTrace o = overlay_traces({a, b}, "session");
    CHECK(o.trace_id == "session");
    CHECK(o.flows.size() == 4);
    CHECK(o.flows.front().start_time() == doctest::Approx(1.0));
    CHECK(o.ground_truth_windows.front().app == "app0");
    CHECK(o.ground_truth_windows.front().start == doctest::Approx(1.0));
}

TEST_CASE("validate_trace rejects broken inputs") {
    TrafficTrace t = make_trace("t", 1.0);
    t.flows[1].flow_id = t.flows[0].flow_id;
    CHECK_THROWS(validate_trace(t));

    TrafficTrace u = make_trace("u", 1.0);
    u.flows[0].packets.clear();
    CHECK_THROWS(validate_trace(u));

    TrafficTrace w = make_trace("w", 1.0);
    w.ground_truth_windows.push_back({2.0, 2.0, "x", "y"});
    CHECK_THROWS(validate_trace(w));
}

TEST_CASE("random_merge_delay stays in [0, 5] and is quantized") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double d = random_merge_delay(rng);
        CHECK(d >= 0.0);
        CHECK(d <= 5.0);
        CHECK(d == quantize_us(d));
    }
}
