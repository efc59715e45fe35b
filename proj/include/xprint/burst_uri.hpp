#pragma once

/**
 * Burst stage: split retained flows into bursts by inter-packet gap and
 * classify each burst to a URI with a confidence, producing ordered,
 * domain-partitioned URI sequences for the matching stage.
 */

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "xprint/forest.hpp"
#include "xprint/traffic.hpp"

namespace xprint {

struct UriPrediction {
    std::string parent_flow_id;
    std::string domain;
    std::string uri;           // predicted path
    double confidence = 0.0;   // max class probability
    double timestamp = 0.0;    // burst start
};

/// Predictions for one candidate app, globally ordered by timestamp.
/// Per-domain sub-sequences preserve that order.
struct UriSequence {
    std::string app;
    std::vector<UriPrediction> predictions;

    /// Domain -> predictions of that domain, in timestamp order.
    std::map<std::string, std::vector<UriPrediction>> per_domain() const;
};

/**
 * Splits a flow into bursts: a gap strictly below delta_t keeps consecutive
 * packets together, a gap >= delta_t starts a new burst.  The concatenation
 * of the bursts is exactly the flow.  delta_t must be > 0.
 */
std::vector<Burst> burstify(const Flow& flow, double delta_t);

/**
 * Training-side burstification: each burst is labeled with its first
 * packet's uri_label.  Throws if any packet lacks a label.
 */
std::vector<std::pair<Burst, std::string>> label_training_bursts(const Flow& flow,
                                                                 double delta_t);

/**
 * One UriPrediction per burst: the model's argmax class with its
 * probability as confidence.  Predictions are ordered by burst start.
 */
UriSequence classify_bursts(const std::vector<Burst>& bursts,
                            const TreeEnsembleModel& uri_model,
                            const std::string& app = "");

}  // namespace xprint
