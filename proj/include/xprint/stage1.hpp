#pragma once

/**
 * Coarse filtering stage: score every flow against a per-app similarity
 * model and a background model, segment the time-ordered score series into
 * activity windows, apply the (q, p_min) vote per window, then a fine
 * logistic gate per flow.
 */

#include <cstddef>
#include <string>
#include <vector>

#include "xprint/forest.hpp"
#include "xprint/logistic.hpp"
#include "xprint/traffic.hpp"

namespace xprint {

/// Label conventions used by the binary similarity models.  A per-app model
/// is trained on {app_name, kRestLabel}; the background model carries
/// kBackgroundLabel as its positive class.
inline constexpr const char* kRestLabel = "_rest";
inline constexpr const char* kBackgroundLabel = "background";

struct ScoredFlow {
    const Flow* flow = nullptr;
    double p = 0.0;      // app similarity
    double r = 0.0;      // background similarity
    double p_bar = 0.0;  // neighborhood mean of p (by flow start time)
    double accept_prob = 0.0;  // logistic gate output on (p, p_bar, p - r)
    bool passed_gate = false;
};

/// Half-open index range [begin, end) into a time-ordered ScoredFlow list.
struct Segment {
    std::size_t begin = 0;
    std::size_t end = 0;
    double mean_p = 0.0;
};

struct ActivityWindow {
    std::string app;
    double start_time = 0.0;  // min member flow start
    double end_time = 0.0;    // max member flow end; all member starts lie inside
    std::vector<const Flow*> flows;
    bool passed_coarse = false;
    double vote_fraction = 0.0;  // |{p_i > p_min}| / n for the window
};

struct Stage1Params {
    double q = 0.8;
    double p_min = 0.5;
    double eps_split = 0.01;   // minimum per-flow SSE reduction to accept a split
    double eps_merge = 0.05;   // adjacent segments closer than this in mean p merge
    int m_min = 3;             // a split must leave at least this many flows per side
    int neighborhood = 5;      // flows contributing to p_bar (before + self + after)
    double gate_threshold = 0.95;  // fine gate keeps accept_prob strictly above this
};

/**
 * One ScoredFlow per flow, ordered by flow start time.  p is the
 * app_model's probability of its positive class (the one that is not
 * kRestLabel), r the background_model's probability of kBackgroundLabel,
 * p_bar the mean of p over the `neighborhood` nearest flows by start time
 * (window clamped at the series ends; a singleton trace gives p_bar = p).
 * Throws if a model is not binary with the expected label.
 */
std::vector<ScoredFlow> score_flows(const TrafficTrace& trace,
                                    const TreeEnsembleModel& app_model,
                                    const TreeEnsembleModel& background_model,
                                    int neighborhood = 5);

/**
 * Divisive/agglomerative segmentation of the score series.  Divisive phase:
 * recursively apply the best binary split (maximum SSE reduction) while the
 * reduction per flow in the parent is >= eps_split and both children keep at
 * least m_min flows.  Agglomerative phase: repeatedly merge the adjacent
 * pair with the smallest |mean difference| while that difference < eps_merge
 * (leftmost pair on ties).  The result is a partition of [0, n).
 */
std::vector<Segment> segment_score_series(const std::vector<ScoredFlow>& scored,
                                          const Stage1Params& params = {});

/**
 * Vote over a segment's p scores: true iff the fraction of scores strictly
 * above p_min is >= q.  Throws on an empty segment.
 */
bool coarse_filter(const std::vector<double>& segment_scores, double q, double p_min);

/**
 * Fine gate: fills scored.accept_prob with the logistic output on
 * (p, p_bar, p - r) and returns accept_prob > threshold (strictly).
 */
bool fine_gate(ScoredFlow& scored, const LogisticModel& gate_model,
               double threshold = 0.95);

struct Stage1Result {
    std::vector<ScoredFlow> scored;    // time-ordered
    std::vector<Segment> segments;     // partition of the scored series
    std::vector<ActivityWindow> windows;  // one per segment, vote recorded
};

/**
 * Full stage for one candidate app: score, segment, vote, gate.  Every
 * segment yields a window (passed_coarse records the vote); windows that
 * passed keep only the flows accepted by the fine gate, windows that failed
 * keep all member flows for reporting.  Windows that pass the vote but lose
 * every flow to the gate are dropped.
 */
Stage1Result run_stage1(const TrafficTrace& trace, const std::string& app,
                        const TreeEnsembleModel& app_model,
                        const TreeEnsembleModel& background_model,
                        const LogisticModel& gate_model,
                        const Stage1Params& params = {});

}  // namespace xprint
