#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "xprint/rng.hpp"
#include "xprint/synthgen.hpp"
#include "xprint/traffic.hpp"

using namespace xprint;

namespace {

ScenarioConfig small_config() {
    ScenarioConfig c;
    c.rng_seed = 42;
    c.n_apps = 2;
    return c;
}

/// The per-flow sequence of URI labels, collapsed to invocation runs.
std::vector<std::string> invocation_runs(const Flow& flow) {
    std::vector<std::string> runs;
    for (const auto& p : flow.packets) {
        const std::string u = p.uri_label.value_or("");
        if (runs.empty() || runs.back() != u) runs.push_back(u);
    }
    return runs;
}

}  // namespace

TEST_CASE("scenario config round-trips through JSON") {
    ScenarioConfig c = small_config();
    c.platforms = {"android", "ios"};
    c.merge_prob = 0.25;
    const auto copy = ScenarioConfig::from_json(c.to_json());
    CHECK(copy.to_json() == c.to_json());
    CHECK(copy.rng_seed == c.rng_seed);
    CHECK(copy.platforms == c.platforms);

    nlohmann::ordered_json missing_seed = c.to_json();
    missing_seed.erase("rng_seed");
    CHECK_THROWS(ScenarioConfig::from_json(missing_seed));
}

TEST_CASE("config validation rejects out-of-range settings") {
    auto bad = [](auto&& mutate) {
        ScenarioConfig c;
        c.rng_seed = 1;
        mutate(c);
        CHECK_THROWS(c.validate());
    };
    bad([](ScenarioConfig& c) { c.n_apps = 0; });
    bad([](ScenarioConfig& c) { c.platforms.clear(); });
    bad([](ScenarioConfig& c) { c.shared_fraction = 1.5; });
    bad([](ScenarioConfig& c) { c.merge_prob = -0.1; });
    bad([](ScenarioConfig& c) { c.intra_gap_mean_lo = 0.0; });
    bad([](ScenarioConfig& c) { c.intra_gap_mean_hi = 0.2; });  // breaks < 0.1s contract
    bad([](ScenarioConfig& c) { c.canonical_prob = 0.3; });     // variants would dominate
}

TEST_CASE("behavior spec validation enforces structural invariants") {
    const auto specs = build_scenario(small_config());
    REQUIRE(!specs.empty());

    BehaviorSpec broken = specs[0];
    broken.branches[0].canonical.push_back("/not/registered");
    CHECK_THROWS(broken.validate());

    BehaviorSpec swapped = specs[0];
    // move a URI into a branch whose domain does not match its signature
    REQUIRE(swapped.branches.size() >= 2);
    swapped.branches[1].canonical.push_back(swapped.branches[0].canonical[0]);
    CHECK_THROWS(swapped.validate());

    BehaviorSpec dup = specs[0];
    dup.signatures.push_back(dup.signatures[0]);  // identical twin is ambiguous
    CHECK_THROWS(dup.validate());
}

TEST_CASE("instances honor signature and timing invariants") {
    const auto specs = build_scenario(small_config());
    int flows_checked = 0;
    for (const auto& spec : specs) {
        for (int k = 0; k < 10; ++k) {
            const TrafficTrace t =
                generate_instance(spec, Rng::derive(7, k), 3.0, "chk");
            REQUIRE(t.ground_truth_windows.size() == 1);
            CHECK(t.ground_truth_windows[0].app == spec.app);
            CHECK(t.ground_truth_windows[0].behavior == spec.behavior);
            REQUIRE(t.flows.size() == spec.branches.size());
            for (const auto& flow : t.flows) {
                ++flows_checked;
                CHECK(flow.app_label == spec.app);
                CHECK(flow.platform_label == spec.platform);
                CHECK(flow.behavior_label == spec.behavior);
                CHECK(flow.start_time() >= 3.0);

                // every packet labeled; per-URI packet counts within range;
                // intra-invocation gaps < 0.1s, inter-invocation >= 1.0s
                std::size_t i = 0;
                while (i < flow.packets.size()) {
                    REQUIRE(flow.packets[i].uri_label.has_value());
                    const std::string uri = *flow.packets[i].uri_label;
                    const UriSignature& sig = spec.signature_of(uri);
                    std::size_t j = i;
                    while (j < flow.packets.size() && flow.packets[j].uri_label == uri &&
                           (j == i ||
                            flow.packets[j].timestamp - flow.packets[j - 1].timestamp < 0.5)) {
                        if (j > i) {
                            CHECK(flow.packets[j].timestamp -
                                      flow.packets[j - 1].timestamp <
                                  0.1);
                        }
                        ++j;
                    }
                    const auto count = static_cast<int>(j - i);
                    CHECK(count >= sig.pkt_min);
                    CHECK(count <= sig.pkt_max);
                    if (j < flow.packets.size()) {
                        CHECK(flow.packets[j].timestamp - flow.packets[j - 1].timestamp >=
                              1.0);
                    }
                    i = j;
                }
            }
        }
    }
    CHECK(flows_checked > 0);
}

TEST_CASE("canonical variant frequency matches the branch probability within 2%") {
    ScenarioConfig cfg = small_config();
    const auto specs = build_scenario(cfg);
    const BehaviorSpec& spec = specs[0];
    const DomainBranch* branch = nullptr;
    for (const auto& b : spec.branches) {
        if (!b.variants.empty()) branch = &b;
    }
    REQUIRE(branch != nullptr);

    // short branches cannot host every configured variant; unspent variant
    // probability stays with the canonical order, so test the branch's own
    // probability, never below the configured floor
    double variant_mass = 0.0;
    for (const auto& [seq, p] : branch->variants) {
        CHECK(seq != branch->canonical);
        variant_mass += p;
    }
    CHECK(branch->canonical_prob == doctest::Approx(1.0 - variant_mass));
    CHECK(branch->canonical_prob >= cfg.canonical_prob - 1e-12);

    int canonical_count = 0;
    const int trials = 10000;
    for (int k = 0; k < trials; ++k) {
        const TrafficTrace t = generate_instance(spec, Rng::derive(99, k), 0.0, "freq");
        for (const auto& flow : t.flows) {
            if (flow.domain != branch->domain) continue;
            canonical_count += invocation_runs(flow) == branch->canonical ? 1 : 0;
        }
    }
    const double freq = double(canonical_count) / trials;
    CHECK(freq == doctest::Approx(branch->canonical_prob).epsilon(0.025));
}

TEST_CASE("heartbeats are exact per period bucket, prefetches Poisson") {
    ScenarioConfig cfg = small_config();
    cfg.background.heartbeat_period = 30.0;
    cfg.background.prefetch_rate = 0.0;
    const TrafficTrace quiet = generate_background(cfg, 120.0, 5, "bg");
    // every 30s over 120s -> exactly 4 heartbeat flows
    CHECK(quiet.flows.size() == 4);
    for (const auto& flow : quiet.flows) {
        CHECK(flow.app_label == std::string("background"));
        CHECK(flow.domain == "push.bg.example");
    }

    // Poisson prefetch count: mean rate*duration, check within 4 sigma
    cfg.background.heartbeat_period = 1000.0;
    cfg.background.prefetch_rate = 0.5;
    double total = 0;
    const int reps = 200;
    for (int k = 0; k < reps; ++k) {
        total += double(generate_background(cfg, 100.0, Rng::derive(6, k), "bg").flows.size()) - 1.0;
    }
    const double mean = total / reps;
    const double expect = 0.5 * 100.0;
    CHECK(std::abs(mean - expect) < 4.0 * std::sqrt(expect / reps));
}

TEST_CASE("cross-platform family shares flagged URIs verbatim") {
    ScenarioConfig cfg = small_config();
    cfg.platforms = {"android", "ios", "web"};
    cfg.shared_fraction = 0.5;
    const auto family = make_cross_platform_family(cfg, 0);
    CHECK(family.size() == std::size_t(cfg.behaviors_per_app) * 3);

    std::map<std::string, std::vector<const BehaviorSpec*>> by_behavior;
    for (const auto& spec : family) by_behavior[spec.behavior].push_back(&spec);
    for (const auto& [behavior, specs] : by_behavior) {
        REQUIRE(specs.size() == 3);
        const auto expected_shared =
            std::llround(cfg.shared_fraction * cfg.uris_per_behavior);
        for (const auto* spec : specs) {
            long long shared = 0;
            for (const auto& sig : spec->signatures) shared += sig.shared ? 1 : 0;
            CHECK(shared == expected_shared);
        }
        // shared URIs agree across platforms in name and signature
        for (const auto& sig : specs[0]->signatures) {
            if (!sig.shared) continue;
            for (int p = 1; p < 3; ++p) {
                const UriSignature& other = specs[p]->signature_of(sig.uri);
                CHECK(other.out_size_mean == sig.out_size_mean);
                CHECK(other.pkt_min == sig.pkt_min);
                CHECK(other.direction_pattern == sig.direction_pattern);
            }
        }
        // private URIs never leak across platforms
        std::set<std::string> android_private;
        for (const auto& sig : specs[0]->signatures) {
            if (!sig.shared) android_private.insert(sig.uri);
        }
        for (int p = 1; p < 3; ++p) {
            for (const auto& sig : specs[p]->signatures) {
                if (!sig.shared) CHECK(!android_private.count(sig.uri));
            }
        }
    }
}

TEST_CASE("shared-core behaviors share every URI but differ in branch order") {
    const auto specs = make_shared_core_behaviors(small_config(), 0, 3, 7, 0);
    REQUIRE(specs.size() == 3);
    std::set<std::string> uris0;
    for (const auto& sig : specs[0].signatures) uris0.insert(sig.uri);
    for (const auto& spec : specs) {
        std::set<std::string> uris;
        for (const auto& sig : spec.signatures) uris.insert(sig.uri);
        CHECK(uris == uris0);
    }
    // each pair of behaviors differs in at least one branch's order
    for (std::size_t a = 0; a < specs.size(); ++a) {
        for (std::size_t b = a + 1; b < specs.size(); ++b) {
            bool differs = false;
            for (std::size_t d = 0; d < specs[a].branches.size(); ++d) {
                differs |= specs[a].branches[d].canonical != specs[b].branches[d].canonical;
            }
            CHECK(differs);
        }
    }
    // extras are private to their behavior
    const auto with_extras = make_shared_core_behaviors(small_config(), 0, 2, 6, 4);
    std::set<std::string> u0, u1;
    for (const auto& sig : with_extras[0].signatures) u0.insert(sig.uri);
    for (const auto& sig : with_extras[1].signatures) u1.insert(sig.uri);
    std::vector<std::string> common;
    std::set_intersection(u0.begin(), u0.end(), u1.begin(), u1.end(),
                          std::back_inserter(common));
    CHECK(common.size() == 6);
    CHECK(u0.size() == 10);
}

TEST_CASE("replaced-private platform keeps shared URIs and swaps privates") {
    ScenarioConfig cfg = small_config();
    cfg.platforms = {"android", "ios"};
    cfg.behaviors_per_app = 2;
    cfg.shared_fraction = 1.0 / 3.0;
    const auto family = make_cross_platform_family(cfg, 0);
    const auto web = make_replaced_private_platform(family, "web", 123);
    CHECK(web.size() == std::size_t(cfg.behaviors_per_app));

    for (const auto& spec : web) {
        CHECK(spec.platform == "web");
        const BehaviorSpec* skeleton = nullptr;
        for (const auto& s : family) {
            if (s.behavior == spec.behavior && s.platform == family[0].platform) {
                skeleton = &s;
            }
        }
        REQUIRE(skeleton != nullptr);
        std::set<std::string> old_private;
        for (const auto& sig : skeleton->signatures) {
            if (sig.shared) {
                // preserved verbatim
                const UriSignature& kept = spec.signature_of(sig.uri);
                CHECK(kept.out_size_mean == sig.out_size_mean);
            } else {
                old_private.insert(sig.uri);
            }
        }
        for (const auto& sig : spec.signatures) {
            if (!sig.shared) CHECK(!old_private.count(sig.uri));
        }
    }
}

TEST_CASE("sessions stagger executions over background noise") {
    ScenarioConfig cfg = small_config();
    const auto specs = build_scenario(cfg);
    const TrafficTrace session =
        compose_session({&specs[0], &specs[2]}, cfg, 9, "session0");
    REQUIRE(session.ground_truth_windows.size() == 2);
    CHECK(session.ground_truth_windows[0].start < session.ground_truth_windows[1].start);
    // windows never overlap: think-time gaps separate executions
    CHECK(session.ground_truth_windows[0].end <= session.ground_truth_windows[1].start);
    bool has_background = false;
    for (const auto& flow : session.flows) {
        has_background |= flow.app_label == std::string("background");
    }
    CHECK(has_background);
}

TEST_CASE("generation is deterministic per seed") {
    const auto specs = build_scenario(small_config());
    const auto once = generate_instance(specs[0], 31, 2.0, "d");
    const auto again = generate_instance(specs[0], 31, 2.0, "d");
    REQUIRE(once.flows.size() == again.flows.size());
    for (std::size_t i = 0; i < once.flows.size(); ++i) {
        REQUIRE(once.flows[i].packets.size() == again.flows[i].packets.size());
        for (std::size_t j = 0; j < once.flows[i].packets.size(); ++j) {
            CHECK(once.flows[i].packets[j].timestamp ==
                  again.flows[i].packets[j].timestamp);
            CHECK(once.flows[i].packets[j].size == again.flows[i].packets[j].size);
        }
    }
    const auto other = generate_instance(specs[0], 32, 2.0, "d");
    std::stringstream same, diff;
    save_traces({once}, same);
    save_traces({other}, diff);
    CHECK(same.str() != diff.str());
}

TEST_CASE("manifest carries config, specs, and the timing note") {
    ScenarioConfig cfg = small_config();
    const auto specs = build_scenario(cfg);
    const auto manifest = scenario_manifest(cfg, specs);
    CHECK(manifest.contains("config"));
    CHECK(manifest.contains("specs"));
    CHECK(manifest["specs"].size() == specs.size());
    CHECK(manifest.contains("notes"));
    CHECK(manifest["notes"].contains("gap_model"));
}
