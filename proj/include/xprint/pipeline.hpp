#pragma once

/**
 * End-to-end orchestration: configuration, the trained model archive
 * (similarity ensembles, background ensemble, logistic gate, URI
 * classifiers, canonical URI maps, shared/private partitions), training,
 * and full-chain inference.
 */

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "xprint/evaluate.hpp"
#include "xprint/forest.hpp"
#include "xprint/logistic.hpp"
#include "xprint/stage1.hpp"
#include "xprint/synthgen.hpp"
#include "xprint/traffic.hpp"
#include "xprint/urimap.hpp"

namespace xprint {

/// Single JSON config covering generation, training, and inference.  Every
/// matching parameter is exposed by name.
struct PipelineConfig {
    ScenarioConfig scenario;

    // coarse stage
    double q = 0.8;
    double p_min = 0.5;
    double eps_split = 0.01;
    double eps_merge = 0.05;
    int m_min = 3;
    int neighborhood = 5;
    double gate_threshold = 0.95;

    // burst + matching stage
    double delta_t = 0.5;
    double tau = 0.5;
    double lambda = 1.0;
    double beta = 0.3;

    ForestHyper similarity_forest{};  // balanced bootstrap applied in train()
    ForestHyper uri_forest{};
    LogisticHyper gate{};

    std::uint64_t seed = 1;

    Stage1Params stage1_params() const;
    void validate() const;
    nlohmann::ordered_json to_json() const;
    static PipelineConfig from_json(const nlohmann::ordered_json& j);
    static PipelineConfig load_file(const std::string& path);
};

/// Everything inference needs, serialized as one ordered-JSON document so
/// identical training runs produce byte-identical archives.
struct ModelBundle {
    int schema_version = 0;
    std::uint64_t creation_seed = 0;
    PipelineConfig config;
    std::map<std::string, TreeEnsembleModel> similarity;  // app -> {app, _rest}
    TreeEnsembleModel background;                         // {background, app}
    LogisticModel gate;
    std::map<std::string, TreeEnsembleModel> uri_models;  // app -> URI classes
    std::vector<CanonicalUriMap> cums;
    std::vector<SharedPrivatePartition> partitions;

    const SharedPrivatePartition& partition_of(const std::string& app,
                                               const std::string& behavior) const;
    /// "app/behavior" keys of every trained map.
    std::set<std::string> known_behaviors() const;

    void validate() const;  // every map's app has similarity + URI models
    nlohmann::ordered_json to_json() const;
    static ModelBundle from_json(const nlohmann::ordered_json& j);
    void save_file(const std::string& path) const;
    static ModelBundle load_file(const std::string& path);
};

/**
 * Trains all model families in order: flow features, per-app similarity
 * ensembles and the background ensemble, the logistic gate, per-app URI
 * classifiers, then canonical maps and partitions.  Each labeled training
 * trace must hold one behavior execution (every flow carrying the same
 * app/platform/behavior labels and per-packet URI labels); traces whose
 * flows are labeled "background" form the background corpus.  Behaviors
 * with fewer than 2 instances are skipped with a warning.  Deterministic
 * for a fixed config seed.
 */
ModelBundle train(const PipelineConfig& config, const std::vector<TrafficTrace>& traces);

/// Per-window reporting payloads for CLI flags.
struct Stage1Report {
    std::string app;
    std::size_t begin = 0;
    std::size_t end = 0;
    double mean_p = 0.0;
    double vote_fraction = 0.0;
    bool passed = false;
};

struct InferenceResult {
    std::string trace_id;
    std::vector<FinalLabel> labels;
    std::map<std::string, std::string> flow_owner;  // flow id -> app
    std::vector<Stage1Report> stage1_report;
    std::vector<UriSequence> uri_report;  // one per passing window

    nlohmann::ordered_json to_json() const;
    static InferenceResult from_json(const nlohmann::ordered_json& j);
};

/**
 * Full chain on one trace: score -> segment -> coarse vote -> fine gate ->
 * burstify -> classify -> map matching -> unseen detection -> refinement ->
 * flow attribution.  An empty trace yields an empty result.
 */
InferenceResult infer(const ModelBundle& bundle, const TrafficTrace& trace);

/// Convenience: predictions in the shape evaluate() consumes.
TracePredictions to_predictions(const InferenceResult& result);

}  // namespace xprint
