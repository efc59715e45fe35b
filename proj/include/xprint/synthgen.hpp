#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "xprint/traffic.hpp"

namespace xprint {

class Rng;

/**
 * Side-channel signature of one backend endpoint.  Distinct URIs inside an
 * app get pairwise-distinguishable signatures: mean sizes at least two
 * pooled standard deviations apart, or different direction patterns.
 */
struct UriSignature {
    std::string uri;
    std::string domain;
    int pkt_min = 4;
    int pkt_max = 10;
    double out_size_mean = 400.0;
    double out_size_sd = 10.0;
    double in_size_mean = 700.0;
    double in_size_sd = 10.0;
    /// Template of same-direction runs, cycled until the packet budget is
    /// spent, e.g. {(Out,1),(In,3)} for request/response endpoints.
    std::vector<std::pair<Direction, int>> direction_pattern;
    /// Mean gap between packets of one invocation; kept below 0.1 s so a
    /// 0.5 s burst threshold always recovers invocation boundaries.
    double intra_gap_mean = 0.02;
    bool shared = false;  // identical signature on every platform of the app

    nlohmann::ordered_json to_json() const;
};

/// One server domain's invocation order: the canonical sequence plus
/// lower-probability variants.  Probabilities sum to 1 with canonical_prob
/// the largest.
struct DomainBranch {
    std::string domain;
    std::vector<std::string> canonical;
    double canonical_prob = 1.0;
    std::vector<std::pair<std::vector<std::string>, double>> variants;

    nlohmann::ordered_json to_json() const;
};

/// Timing brackets for instance generation.
struct TimingParams {
    double inter_gap_lo = 1.0;   // between invocations inside one branch
    double inter_gap_hi = 2.0;
    double intra_gap_factor_lo = 0.6;  // gap = factor * intra_gap_mean
    double intra_gap_factor_hi = 1.4;
    double branch_start_jitter = 0.1;  // per-domain offset from execution start
};

/// Everything needed to execute one behavior on one platform.
struct BehaviorSpec {
    std::string app;
    std::string platform;
    std::string behavior;
    std::vector<UriSignature> signatures;
    std::vector<DomainBranch> branches;
    TimingParams timing;

    const UriSignature& signature_of(const std::string& uri) const;
    void validate() const;
    nlohmann::ordered_json to_json() const;
};

struct BackgroundParams {
    double heartbeat_period = 4.0;
    double prefetch_rate = 1.0 / 45.0;  // Poisson events per second
    int pkt_min = 2;
    int pkt_max = 3;
    double size_mean = 70.0;
    double size_sd = 8.0;
};

struct ScenarioConfig {
    int n_apps = 2;
    std::vector<std::string> platforms = {"android"};
    int behaviors_per_app = 2;
    int uris_per_behavior = 6;
    double shared_fraction = 0.5;
    int domains_per_app = 3;
    double canonical_prob = 0.76;
    std::vector<double> variant_probs = {0.10, 0.07, 0.07};
    double intra_gap_mean_lo = 0.010;
    double intra_gap_mean_hi = 0.035;
    TimingParams timing;
    BackgroundParams background;
    /// Session assembly: executions per session and think-time gaps.
    int executions_per_session = 3;
    double session_start_lo = 5.0;
    double session_start_hi = 20.0;
    double think_gap_lo = 20.0;
    double think_gap_hi = 40.0;
    int instances_train = 40;
    int instances_test = 10;
    double merge_prob = 0.5;
    std::uint64_t rng_seed = 1;

    void validate() const;
    nlohmann::ordered_json to_json() const;
    static ScenarioConfig from_json(const nlohmann::ordered_json& j);
};

/**
 * Builds the behavior specs of one app across all configured platforms.
 * Shared-flagged URIs keep identical names and signatures on every
 * platform; private URIs are platform-specific.  The shared count per
 * behavior is round(shared_fraction * uris_per_behavior) exactly.
 */
std::vector<BehaviorSpec> make_cross_platform_family(const ScenarioConfig& config,
                                                     int app_index);

/// Specs for every app in the scenario.
std::vector<BehaviorSpec> build_scenario(const ScenarioConfig& config);

/**
 * Behaviors that share a common core of URIs (same names, same signatures)
 * in behavior-specific orders, plus private tails.  core/extra control the
 * overlap; with core=6, extra=4 any two behaviors share 60% of their URIs.
 * Single platform; used to stress order-sensitive matching.
 */
std::vector<BehaviorSpec> make_shared_core_behaviors(const ScenarioConfig& config,
                                                     int app_index, int n_behaviors,
                                                     int core_uris, int extra_uris);

/**
 * A new platform for an already-built family: shared URIs preserved
 * verbatim, every private URI replaced by a fresh one.  Odd-indexed
 * behaviors take replacements cloned (with jitter) from the next
 * behavior's private signatures, in the donor's own canonical order, so
 * burst classifiers confidently mislabel them in a consistent order;
 * even-indexed behaviors move their privates halfway off the size grid,
 * yielding low-confidence noise instead.  Both kinds of noise vanish when
 * matching is restricted to shared URIs.
 */
std::vector<BehaviorSpec> make_replaced_private_platform(
    const std::vector<BehaviorSpec>& family, const std::string& new_platform,
    std::uint64_t seed);

/// One behavior execution: one flow per domain branch, every packet
/// labeled, one ground-truth window.  Deterministic given (spec, seed).
TrafficTrace generate_instance(const BehaviorSpec& spec, std::uint64_t rng_seed,
                               double start_time = 0.0,
                               const std::string& trace_id = "instance");

/// Periodic heartbeats plus Poisson prefetch flows, app_label "background".
TrafficTrace generate_background(const ScenarioConfig& config, double duration,
                                 std::uint64_t rng_seed,
                                 const std::string& trace_id = "background");

/**
 * A capture session: the given executions staggered by think-time gaps,
 * laid over background noise.  One ground-truth window per execution.
 */
TrafficTrace compose_session(const std::vector<const BehaviorSpec*>& executions,
                             const ScenarioConfig& config, std::uint64_t rng_seed,
                             const std::string& trace_id);

/// Scenario manifest: config, every spec, and the gap-model note.
nlohmann::ordered_json scenario_manifest(const ScenarioConfig& config,
                                         const std::vector<BehaviorSpec>& specs);

}  // namespace xprint
