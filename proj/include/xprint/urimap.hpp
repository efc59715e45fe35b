#pragma once

/**
 * Canonical URI maps and sequence matching: build per-behavior maps from
 * training data, partition URIs into shared/private across platforms, score
 * predicted URI sequences against maps with a confidence-weighted LCS,
 * detect unseen cases, refine them, and attribute contested flows.
 */

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "xprint/burst_uri.hpp"
#include "xprint/traffic.hpp"

namespace xprint {

/// Most frequent per-domain URI invocation order of one (app, platform,
/// behavior), plus the unique URI set across branches.
struct CanonicalUriMap {
    std::string app;
    std::string platform;
    std::string behavior;
    std::map<std::string, std::vector<std::string>> branches;  // domain -> order
    std::set<std::string> uri_set;                             // union of branches
    std::map<std::string, double> canonical_support;  // domain -> fraction of instances

    nlohmann::ordered_json to_json() const;
    static CanonicalUriMap from_json(const nlohmann::ordered_json& j);
};

/// Shared/private URI split of one (app, behavior) across its platforms.
struct SharedPrivatePartition {
    std::string app;
    std::string behavior;
    std::set<std::string> shared;  // URIs present on every observed platform
    std::map<std::string, std::set<std::string>> private_uris;  // platform -> rest
    bool single_platform = false;  // partition degenerate: everything shared

    nlohmann::ordered_json to_json() const;
    static SharedPrivatePartition from_json(const nlohmann::ordered_json& j);
};

struct MatchResult {
    std::string app;
    std::string platform;
    std::string behavior;
    double score = 0.0;
    std::map<std::string, double> matched;  // M: unique URI -> max matched confidence
    std::set<std::string> covered;          // P: unique URIs in both prediction and C
    bool is_unseen = false;
};

/// One training instance reduced to its per-domain URI label order.
struct TrainingSequence {
    std::map<std::string, std::vector<std::string>> by_domain;
};

/**
 * Modal per-domain sequence over the instances.  Only non-empty domain
 * sequences vote; ties prefer the shorter sequence, then lexicographic
 * order.  Support is votes(modal) / instance count.  Throws when instances
 * are empty or no domain has any sequence.
 */
CanonicalUriMap build_cum(const std::string& app, const std::string& platform,
                          const std::string& behavior,
                          const std::vector<TrainingSequence>& instances);

/**
 * Shared/private partitions per behavior for one app's maps across
 * platforms.  A behavior observed on a single platform degenerates to
 * all-shared with a warning on stderr and single_platform set.
 */
std::vector<SharedPrivatePartition> partition_shared_private(
    const std::vector<CanonicalUriMap>& cums);

/**
 * Dynamic-time-warping similarity of two signed packet-size series
 * (+outbound, -inbound): similarity = 1 / (1 + d / max(n, m)) with d the
 * classic absolute-difference DTW distance.  Throws on empty input.
 */
double dtw_similarity(const std::vector<double>& seq_a, const std::vector<double>& seq_b);

/**
 * Longest common subsequence between the predictions with confidence >= tau
 * and the canonical list, over URI identity.  Returns (predicted index,
 * canonical index) pairs — indices into the vectors as given — choosing the
 * earliest-indices matching among equal-length candidates.
 */
std::vector<std::pair<std::size_t, std::size_t>> lcs_match(
    const std::vector<UriPrediction>& predicted, const std::vector<std::string>& canonical,
    double tau);

/**
 * Confidence-weighted map score.  Per branch, lcs_match aligns that
 * domain's predictions with the canonical order; matched sets are unioned
 * across domains keeping the max confidence per URI (numerator).  The
 * denominator sums, over every unique URI present in both the prediction
 * and the map's URI set, that URI's max predicted confidence, plus
 * lambda * (|C| - |P|) for the uncovered remainder.  Only confidences
 * >= tau enter the numerator.  Result clamped to [0, 1].
 */
MatchResult score_map(const UriSequence& sequence, const CanonicalUriMap& cum,
                      double lambda, double tau = 0.5);

/// Tags every result whose score <= beta as unseen (final only after
/// attribution).
void detect_unseen(std::vector<MatchResult>& results, double beta);

/**
 * Re-scores an unseen-tagged sequence against the map restricted to shared
 * URIs (branches filtered, C replaced by C intersect shared).  An empty
 * shared set skips refinement with a warning and returns the plain score.
 * The returned result keeps the unseen tag.
 */
MatchResult refine_unseen(const UriSequence& sequence, const CanonicalUriMap& cum,
                          const SharedPrivatePartition& partition, double lambda,
                          double tau = 0.5);

/// One app's claim on an activity window: the window's flows plus the best
/// match for them.
struct SegmentClaim {
    std::string app;
    double start_time = 0.0;
    double end_time = 0.0;
    std::vector<const Flow*> flows;
    MatchResult result;
};

struct FinalLabel {
    std::string app;
    std::string behavior;
    double start_time = 0.0;
    double end_time = 0.0;
    double score = 0.0;
    bool is_unseen = false;
    std::vector<std::string> flow_ids;
};

/**
 * Resolves contested flows: each flow goes to the claim with the highest
 * score (ties by app name).  Claims keeping at least one flow become final
 * labels (window bounds recomputed over the kept flows); claims that lose
 * every flow survive only if tagged unseen, reported as final unseen cases
 * over their original bounds.
 */
std::vector<FinalLabel> attribute_flows(const std::vector<SegmentClaim>& claims);

/// Order-and-confidence-blind contrast baseline:
/// |unique predicted URIs ∩ C| / |C|.
double bag_match_baseline(const UriSequence& sequence, const CanonicalUriMap& cum);

}  // namespace xprint
