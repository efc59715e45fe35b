#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "xprint/urimap.hpp"

using namespace xprint;

namespace {

UriSequence sequence_of(const std::vector<std::tuple<std::string, std::string, double>>&
                            domain_uri_conf) {
    UriSequence seq;
    seq.app = "app";
    double t = 0.0;
    for (const auto& [domain, uri, conf] : domain_uri_conf) {
        UriPrediction p;
        p.domain = domain;
        p.uri = uri;
        p.confidence = conf;
        p.timestamp = t;
        t += 1.0;
        seq.predictions.push_back(p);
    }
    return seq;
}

CanonicalUriMap map_of(const std::map<std::string, std::vector<std::string>>& branches) {
    CanonicalUriMap cum;
    cum.app = "app";
    cum.platform = "android";
    cum.behavior = "b0";
    cum.branches = branches;
    for (const auto& [domain, order] : branches) {
        cum.canonical_support[domain] = 1.0;
        for (const auto& uri : order) cum.uri_set.insert(uri);
    }
    return cum;
}

Flow stub_flow(const std::string& id, double t0, double t1) {
    Flow f;
    f.flow_id = id;
    f.domain = "d";
    Packet a, b;
    a.timestamp = t0;
    a.size = 100;
    b.timestamp = t1;
    b.size = 100;
    f.packets = {a, b};
    return f;
}

}  // namespace

TEST_CASE("canonical map takes the modal sequence per domain") {
    std::vector<TrainingSequence> instances;
    for (int i = 0; i < 3; ++i) instances.push_back({{{"d1", {"/a", "/b", "/c"}}}});
    for (int i = 0; i < 2; ++i) instances.push_back({{{"d1", {"/a", "/c"}}}});
    instances[0].by_domain["d2"] = {"/x"};
    instances[1].by_domain["d2"] = {"/x"};

    const auto cum = build_cum("app", "android", "b0", instances);
    CHECK(cum.app == "app");
    REQUIRE(cum.branches.count("d1") == 1);
    CHECK(cum.branches.at("d1") == std::vector<std::string>{"/a", "/b", "/c"});
    CHECK(cum.canonical_support.at("d1") == doctest::Approx(0.6));
    // absent-domain instances still count in the support denominator
    CHECK(cum.branches.at("d2") == std::vector<std::string>{"/x"});
    CHECK(cum.canonical_support.at("d2") == doctest::Approx(2.0 / 5.0));
    CHECK(cum.uri_set == std::set<std::string>{"/a", "/b", "/c", "/x"});
}

TEST_CASE("canonical ties prefer shorter then lexicographic sequences") {
    std::vector<TrainingSequence> tie_len;
    tie_len.push_back({{{"d", {"/a", "/b"}}}});
    tie_len.push_back({{{"d", {"/a", "/b"}}}});
    tie_len.push_back({{{"d", {"/a"}}}});
    tie_len.push_back({{{"d", {"/a"}}}});
    CHECK(build_cum("a", "p", "b", tie_len).branches.at("d") ==
          std::vector<std::string>{"/a"});

    std::vector<TrainingSequence> tie_lex;
    tie_lex.push_back({{{"d", {"/b"}}}});
    tie_lex.push_back({{{"d", {"/b"}}}});
    tie_lex.push_back({{{"d", {"/a"}}}});
    tie_lex.push_back({{{"d", {"/a"}}}});
    CHECK(build_cum("a", "p", "b", tie_lex).branches.at("d") ==
          std::vector<std::string>{"/a"});

    CHECK_THROWS(build_cum("a", "p", "b", {}));
    std::vector<TrainingSequence> hollow(3);
    CHECK_THROWS(build_cum("a", "p", "b", hollow));
}

TEST_CASE("canonical map survives a json round trip") {
    const auto cum = map_of({{"d1", {"/a", "/b"}}, {"d2", {"/c"}}});
    const auto back = CanonicalUriMap::from_json(cum.to_json());
    CHECK(back.app == cum.app);
    CHECK(back.platform == cum.platform);
    CHECK(back.behavior == cum.behavior);
    CHECK(back.branches == cum.branches);
    CHECK(back.uri_set == cum.uri_set);
    CHECK(back.canonical_support == cum.canonical_support);
    CHECK(back.to_json() == cum.to_json());
}

TEST_CASE("shared and private uris split across platforms") {
    auto android = map_of({{"d", {"/a", "/b", "/c"}}});
    auto ios = map_of({{"d", {"/b", "/c", "/d"}}});
    ios.platform = "ios";
    const auto parts = partition_shared_private({android, ios});
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].shared == std::set<std::string>{"/b", "/c"});
    CHECK(parts[0].private_uris.at("android") == std::set<std::string>{"/a"});
    CHECK(parts[0].private_uris.at("ios") == std::set<std::string>{"/d"});
    CHECK_FALSE(parts[0].single_platform);

    const auto solo = partition_shared_private({android});
    REQUIRE(solo.size() == 1);
    CHECK(solo[0].single_platform);
    CHECK(solo[0].shared == std::set<std::string>{"/a", "/b", "/c"});
    CHECK(solo[0].private_uris.at("android").empty());

    const auto back = SharedPrivatePartition::from_json(parts[0].to_json());
    CHECK(back.shared == parts[0].shared);
    CHECK(back.private_uris == parts[0].private_uris);
    CHECK(back.single_platform == parts[0].single_platform);
}

TEST_CASE("dtw similarity matches hand-computed values") {
    CHECK(dtw_similarity({1, 2, 3}, {1, 2, 3}) == 1.0);
    // d([1,2,3],[1,3]) = 1, normalized by max length 3
    CHECK(dtw_similarity({1, 2, 3}, {1, 3}) == doctest::Approx(1.0 / (1.0 + 1.0 / 3.0)));
    CHECK(dtw_similarity({1, 3}, {1, 2, 3}) == dtw_similarity({1, 2, 3}, {1, 3}));
    // constant offset: every step pays |5| -> d = 3*5
    CHECK(dtw_similarity({1, 1, 1}, {6, 6, 6}) == doctest::Approx(1.0 / (1.0 + 5.0)));
    CHECK(dtw_similarity({-4}, {-4}) == 1.0);
    CHECK_THROWS(dtw_similarity({}, {1.0}));
    CHECK_THROWS(dtw_similarity({1.0}, {}));
}

TEST_CASE("lcs match picks earliest indices and honors tau") {
    const auto seq = sequence_of(
        {{"d", "/a", 0.9}, {"d", "/a", 0.8}, {"d", "/b", 0.7}, {"d", "/z", 0.9}});
    const std::vector<std::string> canonical = {"/a", "/b"};
    const auto pairs = lcs_match(seq.predictions, canonical, 0.5);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});
    CHECK(pairs[1] == std::pair<std::size_t, std::size_t>{2, 1});

    // confidence below tau is invisible; exactly tau is eligible
    const auto weak = sequence_of({{"d", "/a", 0.49}, {"d", "/b", 0.5}});
    const auto filtered = lcs_match(weak.predictions, canonical, 0.5);
    REQUIRE(filtered.size() == 1);
    CHECK(filtered[0] == std::pair<std::size_t, std::size_t>{1, 1});

    // order must be preserved: reversed prediction matches only one element
    const auto rev = sequence_of({{"d", "/b", 0.9}, {"d", "/a", 0.9}});
    CHECK(lcs_match(rev.predictions, canonical, 0.5).size() == 1);

    CHECK(lcs_match({}, canonical, 0.5).empty());
    CHECK(lcs_match(seq.predictions, {}, 0.5).empty());
}

TEST_CASE("map score reproduces the worked single-branch example") {
    const auto cum = map_of({{"d", {"/a", "/b", "/c"}}});
    const auto seq = sequence_of({{"d", "/a", 0.9}, {"d", "/b", 0.8}});
    const auto r = score_map(seq, cum, 1.0);
    CHECK(r.score == doctest::Approx((0.9 + 0.8) / (0.9 + 0.8 + 1.0)).epsilon(1e-12));
    CHECK(r.matched.at("/a") == 0.9);
    CHECK(r.matched.at("/b") == 0.8);
    CHECK(r.covered == std::set<std::string>{"/a", "/b"});

    // a perfect, fully-confident replay scores exactly 1
    const auto perfect =
        sequence_of({{"d", "/a", 1.0}, {"d", "/b", 1.0}, {"d", "/c", 1.0}});
    CHECK(score_map(perfect, cum, 1.0).score == 1.0);
}

TEST_CASE("low-confidence covered uris drag the denominator only") {
    const auto cum = map_of({{"d", {"/a", "/b", "/c"}}});
    // /c is predicted below tau: excluded from the numerator, still in P
    const auto seq = sequence_of({{"d", "/a", 0.9}, {"d", "/c", 0.4}});
    const auto r = score_map(seq, cum, 1.0);
    CHECK(r.matched.count("/c") == 0);
    CHECK(r.covered == std::set<std::string>{"/a", "/c"});
    CHECK(r.score == doctest::Approx(0.9 / (0.9 + 0.4 + 1.0)).epsilon(1e-12));
}

TEST_CASE("matches union across domains keeping the max confidence") {
    const auto cum = map_of({{"d1", {"/x", "/y"}}, {"d2", {"/x", "/z"}}});
    const auto seq =
        sequence_of({{"d1", "/x", 0.6}, {"d2", "/x", 0.9}, {"d2", "/z", 0.7}});
    const auto r = score_map(seq, cum, 1.0);
    CHECK(r.matched.at("/x") == 0.9);  // deduplicated at the higher confidence
    CHECK(r.matched.at("/z") == 0.7);
    // |C| = 3, P = {/x, /z}
    CHECK(r.score == doctest::Approx((0.9 + 0.7) / (0.9 + 0.7 + 1.0)).epsilon(1e-12));
}

TEST_CASE("lambda penalizes uncovered canonical uris monotonically") {
    const auto cum = map_of({{"d", {"/a", "/b", "/c", "/d"}}});
    const auto seq = sequence_of({{"d", "/a", 0.9}, {"d", "/b", 0.8}});
    const double s0 = score_map(seq, cum, 0.0).score;
    const double s1 = score_map(seq, cum, 1.0).score;
    const double s2 = score_map(seq, cum, 2.0).score;
    CHECK(s0 == doctest::Approx(1.0));  // no deficit penalty
    CHECK(s0 > s1);
    CHECK(s1 > s2);
    CHECK_THROWS(score_map(seq, cum, -0.5));
    CHECK_THROWS(score_map(seq, CanonicalUriMap{}, 1.0));

    // nothing eligible: score 0, not NaN
    const auto faint = sequence_of({{"d", "/a", 0.1}});
    const auto r = score_map(faint, cum, 0.0);
    CHECK(r.score == 0.0);
}

TEST_CASE("unseen detection tags scores at or below beta") {
    std::vector<MatchResult> results(3);
    results[0].score = 0.2;
    results[1].score = 0.3;
    results[2].score = 0.31;
    detect_unseen(results, 0.3);
    CHECK(results[0].is_unseen);
    CHECK(results[1].is_unseen);  // boundary inclusive
    CHECK_FALSE(results[2].is_unseen);
    CHECK_THROWS(detect_unseen(results, 0.0));
    CHECK_THROWS(detect_unseen(results, 1.0));
    CHECK_THROWS(detect_unseen(results, -0.2));
}

TEST_CASE("refinement restricted to shared uris lifts cross-platform scores") {
    const auto cum = map_of({{"d", {"/s1", "/p1", "/s2"}}});
    SharedPrivatePartition part;
    part.app = "app";
    part.behavior = "b0";
    part.shared = {"/s1", "/s2"};
    part.private_uris["android"] = {"/p1"};

    // a foreign platform replays only the shared URIs
    const auto seq = sequence_of({{"d", "/s1", 0.9}, {"d", "/s2", 0.9}});
    const auto plain = score_map(seq, cum, 1.0);
    const auto refined = refine_unseen(seq, cum, part, 1.0);
    CHECK(plain.score == doctest::Approx(1.8 / 2.8).epsilon(1e-12));
    CHECK(refined.score == doctest::Approx(1.0));
    CHECK(refined.is_unseen);

    // no shared URIs: refinement falls back to the plain score
    SharedPrivatePartition hollow;
    hollow.app = "app";
    hollow.behavior = "b0";
    const auto fallback = refine_unseen(seq, cum, hollow, 1.0);
    CHECK(fallback.score == doctest::Approx(plain.score));
    CHECK(fallback.is_unseen);
}

TEST_CASE("contested flows go to the strongest claim") {
    const Flow f1 = stub_flow("f1", 0.0, 1.0);
    const Flow f2 = stub_flow("f2", 2.0, 3.0);
    const Flow f3 = stub_flow("f3", 4.0, 5.0);

    SegmentClaim strong;
    strong.app = "appA";
    strong.start_time = 0.0;
    strong.end_time = 3.0;
    strong.flows = {&f1, &f2};
    strong.result.behavior = "b0";
    strong.result.score = 0.8;

    SegmentClaim weak;
    weak.app = "appB";
    weak.start_time = 2.0;
    weak.end_time = 5.0;
    weak.flows = {&f2, &f3};
    weak.result.behavior = "b1";
    weak.result.score = 0.6;

    const auto labels = attribute_flows({strong, weak});
    REQUIRE(labels.size() == 2);
    CHECK(labels[0].app == "appA");
    CHECK(labels[0].flow_ids == std::vector<std::string>{"f1", "f2"});
    CHECK(labels[0].start_time == 0.0);
    CHECK(labels[0].end_time == 3.0);
    CHECK(labels[1].app == "appB");
    CHECK(labels[1].flow_ids == std::vector<std::string>{"f3"});
    // bounds recomputed over the surviving flow only
    CHECK(labels[1].start_time == 4.0);
    CHECK(labels[1].end_time == 5.0);
}

TEST_CASE("claim ties break by app name regardless of claim order") {
    const Flow f = stub_flow("f", 0.0, 1.0);
    SegmentClaim a, b;
    a.app = "appA";
    a.flows = {&f};
    a.result.score = 0.7;
    b.app = "appB";
    b.flows = {&f};
    b.result.score = 0.7;
    for (const auto& claims :
         {std::vector<SegmentClaim>{a, b}, std::vector<SegmentClaim>{b, a}}) {
        const auto labels = attribute_flows(claims);
        REQUIRE(labels.size() == 1);
        CHECK(labels[0].app == "appA");
    }
}

TEST_CASE("unseen claims survive losing every flow") {
    const Flow f = stub_flow("f", 1.0, 2.0);
    SegmentClaim winner;
    winner.app = "appA";
    winner.flows = {&f};
    winner.result.score = 0.9;

    SegmentClaim ghost;
    ghost.app = "appZ";
    ghost.start_time = 0.5;
    ghost.end_time = 2.5;
    ghost.flows = {&f};
    ghost.result.score = 0.1;
    ghost.result.is_unseen = true;

    auto labels = attribute_flows({winner, ghost});
    REQUIRE(labels.size() == 2);
    CHECK(labels[1].app == "appZ");
    CHECK(labels[1].is_unseen);
    CHECK(labels[1].flow_ids.empty());
    // original window bounds are preserved for the flowless unseen case
    CHECK(labels[1].start_time == 0.5);
    CHECK(labels[1].end_time == 2.5);

    // a seen claim losing everything simply disappears
    ghost.result.is_unseen = false;
    labels = attribute_flows({winner, ghost});
    REQUIRE(labels.size() == 1);
    CHECK(labels[0].app == "appA");
}

TEST_CASE("bag baseline ignores order and confidence") {
    const auto cum = map_of({{"d", {"/a", "/b", "/c"}}});
    const auto seq = sequence_of(
        {{"d", "/b", 0.01}, {"d", "/a", 0.2}, {"d", "/a", 0.9}, {"d", "/q", 1.0}});
    CHECK(bag_match_baseline(seq, cum) == doctest::Approx(2.0 / 3.0));
    CHECK(bag_match_baseline(UriSequence{}, cum) == 0.0);
    CHECK_THROWS(bag_match_baseline(UriSequence{}, CanonicalUriMap{}));
}
