#pragma once

/**
 * Named, seeded experiment recipes.  Each experiment generates its own
 * corpus from the config, runs the relevant pipeline slice, writes a CSV of
 * the sweep plus a summary JSON into the output directory, and returns the
 * summary.
 */

#include <string>
#include <vector>

#include "json.hpp"

#include "xprint/pipeline.hpp"
#include "xprint/traffic.hpp"

namespace xprint {

/// Standard corpus: per (app, platform, behavior), instances_train pure
/// training instances plus background traces; test instances pairwise
/// merged with probability merge_prob at a uniform 0-5 s delay.
struct GeneratedCorpus {
    std::vector<TrafficTrace> train;
    std::vector<TrafficTrace> test;
    nlohmann::ordered_json manifest;
};

GeneratedCorpus generate_corpus(const PipelineConfig& config);

/// Experiment names accepted by run_experiment.
const std::vector<std::string>& experiment_names();

/**
 * Runs one named experiment:
 *  - "delta-sweep":      URI macro-F1 per invocation across burst gaps
 *                        {0.05, 0.5, 2.0, 5.0} s
 *  - "map-vs-bag":       FNR/FPR of order-aware map matching vs the URI-bag
 *                        baseline on behaviors sharing all URIs
 *  - "lambda-beta-grid": unseen-detection F1 over lambda x beta on a
 *                        known/unseen split
 *  - "unseen-platform":  behavior F1 with vs without shared-URI refinement
 *                        on a replaced-private platform
 *  - "end-to-end":       full train/infer/evaluate on merged test traces
 * Unknown names throw.  Deterministic given the config seed.
 */
nlohmann::ordered_json run_experiment(const std::string& name, const PipelineConfig& config,
                                      const std::string& out_dir);

}  // namespace xprint
