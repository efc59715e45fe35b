#pragma once

/**
 * Window-level evaluation: match predicted activity windows against ground
 * truth by temporal overlap, build confusion matrices, and derive
 * precision/recall/F1, FNR/FPR, and unseen-detection metrics.
 */

#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "xprint/traffic.hpp"
#include "xprint/urimap.hpp"

namespace xprint {

/// Inference output for one trace.
struct TracePredictions {
    std::string trace_id;
    std::vector<FinalLabel> labels;
};

struct ClassMetrics {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    double precision = 0.0;  // tp / (tp + fp), 0 when undefined
    double recall = 0.0;     // tp / (tp + fn), 0 when undefined
    double f1 = 0.0;         // 2PR / (P + R), 0 when P + R == 0
};

struct EvalReport {
    // keyed by app name and by "app/behavior"
    std::map<std::string, ClassMetrics> per_app;
    std::map<std::string, ClassMetrics> per_behavior;
    // one-vs-rest rates per "app/behavior" over all window events
    std::map<std::string, double> fnr;
    std::map<std::string, double> fpr;
    double macro_f1_app = 0.0;
    double macro_f1_behavior = 0.0;
    double macro_fnr = 0.0;
    double macro_fpr = 0.0;
    ClassMetrics unseen;  // positive class: unseen
    // truth label -> predicted label -> count; "(none)" marks no match
    std::map<std::string, std::map<std::string, long long>> confusion;

    nlohmann::ordered_json to_json() const;
};

/**
 * Matches predictions to ground truth windows per trace: a pair is eligible
 * when the temporal overlap covers >= `overlap_min` of the truth window's
 * duration; eligible pairs are matched greedily, label-equal pairs first,
 * then by overlap (ties toward the earlier truth, then earlier prediction).
 * Unseen-tagged predictions take part only in the unseen metrics, where the
 * positive class is a truth window whose "app/behavior" key is absent from
 * `known_behaviors` (an empty set marks every truth window as known).
 * Throws when a prediction references a trace id absent from the truth set;
 * truth traces without a prediction entry count as empty predictions.
 */
EvalReport evaluate(const std::vector<TracePredictions>& predictions,
                    const std::vector<TrafficTrace>& truth,
                    const std::set<std::string>& known_behaviors = {},
                    double overlap_min = 0.5);

/// Mean and sample standard deviation of the headline metrics over runs.
nlohmann::ordered_json aggregate_reports(const std::vector<EvalReport>& reports);

}  // namespace xprint
