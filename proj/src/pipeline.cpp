#include "xprint/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "xprint/burst_uri.hpp"
#include "xprint/features.hpp"
#include "xprint/rng.hpp"

namespace xprint {

namespace {

/// Labels of one training trace; train() requires them uniform per trace.
struct TraceIdentity {
    std::string app;
    std::string platform;
    std::string behavior;
    bool is_background = false;
};

TraceIdentity identify_trace(const TrafficTrace& trace) {
    TraceIdentity id;
    bool first = true;
    for (const auto& flow : trace.flows) {
        if (!flow.app_label) {
            throw std::runtime_error("train: unlabeled flow " + flow.flow_id);
        }
        const std::string app = *flow.app_label;
        const std::string platform = flow.platform_label.value_or("");
        const std::string behavior = flow.behavior_label.value_or("");
        if (first) {
            id.app = app;
            id.platform = platform;
            id.behavior = behavior;
            first = false;
        } else if (id.app != app || id.platform != platform || id.behavior != behavior) {
            throw std::runtime_error("train: trace " + trace.trace_id +
                                     " mixes labels; one execution per trace expected");
        }
    }
    id.is_background = id.app == kBackgroundLabel;
    if (!id.is_background && (id.platform.empty() || id.behavior.empty())) {
        throw std::runtime_error("train: trace " + trace.trace_id +
                                 " lacks platform/behavior labels");
    }
    return id;
}

}  // namespace

Stage1Params PipelineConfig::stage1_params() const {
    Stage1Params params;
    params.q = q;
    params.p_min = p_min;
    params.eps_split = eps_split;
    params.eps_merge = eps_merge;
    params.m_min = m_min;
    params.neighborhood = neighborhood;
    params.gate_threshold = gate_threshold;
    return params;
}

void PipelineConfig::validate() const {
    scenario.validate();
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(q) || !in_unit(p_min) || !in_unit(tau)) {
        throw std::runtime_error("config: q, p_min, tau must lie in [0, 1]");
    }
    if (!(gate_threshold > 0.0 && gate_threshold < 1.0)) {
        throw std::runtime_error("config: gate_threshold must lie in (0, 1)");
    }
    if (!(beta > 0.0 && beta < 1.0)) {
        throw std::runtime_error("config: beta must lie in (0, 1)");
    }
    if (lambda < 0.0) throw std::runtime_error("config: lambda must be >= 0");
    if (!(delta_t > 0.0)) throw std::runtime_error("config: delta_t must be > 0");
    if (!(eps_split > 0.0) || !(eps_merge >= 0.0) || m_min < 1 || neighborhood < 1) {
        throw std::runtime_error("config: bad segmentation parameters");
    }
    if (similarity_forest.n_trees < 1 || uri_forest.n_trees < 1) {
        throw std::runtime_error("config: forests need at least one tree");
    }
}

nlohmann::ordered_json PipelineConfig::to_json() const {
    nlohmann::ordered_json j;
    j["scenario"] = scenario.to_json();
    j["q"] = q;
    j["p_min"] = p_min;
    j["eps_split"] = eps_split;
    j["eps_merge"] = eps_merge;
    j["m_min"] = m_min;
    j["neighborhood"] = neighborhood;
    j["gate_threshold"] = gate_threshold;
    j["delta_t"] = delta_t;
    j["tau"] = tau;
    j["lambda"] = lambda;
    j["beta"] = beta;
    j["similarity_forest"] = {{"n_trees", similarity_forest.n_trees},
                              {"max_depth", similarity_forest.max_depth},
                              {"min_leaf", similarity_forest.min_leaf},
                              {"feature_subsample", similarity_forest.feature_subsample}};
    j["uri_forest"] = {{"n_trees", uri_forest.n_trees},
                       {"max_depth", uri_forest.max_depth},
                       {"min_leaf", uri_forest.min_leaf},
                       {"feature_subsample", uri_forest.feature_subsample}};
    j["gate"] = {{"learning_rate", gate.learning_rate},
                 {"epochs", gate.epochs},
                 {"l2", gate.l2}};
    j["seed"] = seed;
    return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::ordered_json& j) {
    PipelineConfig c;
    if (j.contains("scenario")) c.scenario = ScenarioConfig::from_json(j.at("scenario"));
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt("q", c.q);
    opt("p_min", c.p_min);
    opt("eps_split", c.eps_split);
    opt("eps_merge", c.eps_merge);
    opt("m_min", c.m_min);
    opt("neighborhood", c.neighborhood);
    opt("gate_threshold", c.gate_threshold);
    opt("delta_t", c.delta_t);
    opt("tau", c.tau);
    opt("lambda", c.lambda);
    opt("beta", c.beta);
    if (j.contains("similarity_forest")) {
        const auto& f = j.at("similarity_forest");
        if (f.contains("n_trees")) c.similarity_forest.n_trees = f.at("n_trees").get<int>();
        if (f.contains("max_depth")) c.similarity_forest.max_depth = f.at("max_depth").get<int>();
        if (f.contains("min_leaf")) c.similarity_forest.min_leaf = f.at("min_leaf").get<int>();
        if (f.contains("feature_subsample")) {
            c.similarity_forest.feature_subsample = f.at("feature_subsample").get<int>();
        }
    }
    if (j.contains("uri_forest")) {
        const auto& f = j.at("uri_forest");
        if (f.contains("n_trees")) c.uri_forest.n_trees = f.at("n_trees").get<int>();
        if (f.contains("max_depth")) c.uri_forest.max_depth = f.at("max_depth").get<int>();
        if (f.contains("min_leaf")) c.uri_forest.min_leaf = f.at("min_leaf").get<int>();
        if (f.contains("feature_subsample")) {
            c.uri_forest.feature_subsample = f.at("feature_subsample").get<int>();
        }
    }
    if (j.contains("gate")) {
        const auto& g = j.at("gate");
        if (g.contains("learning_rate")) c.gate.learning_rate = g.at("learning_rate").get<double>();
        if (g.contains("epochs")) c.gate.epochs = g.at("epochs").get<int>();
        if (g.contains("l2")) c.gate.l2 = g.at("l2").get<double>();
    }
    opt("seed", c.seed);
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    nlohmann::ordered_json j;
    in >> j;
    return from_json(j);
}

const SharedPrivatePartition& ModelBundle::partition_of(const std::string& app,
                                                        const std::string& behavior) const {
    for (const auto& part : partitions) {
        if (part.app == app && part.behavior == behavior) return part;
    }
    throw std::runtime_error("bundle: no partition for " + app + "/" + behavior);
}

std::set<std::string> ModelBundle::known_behaviors() const {
    std::set<std::string> keys;
    for (const auto& cum : cums) keys.insert(cum.app + "/" + cum.behavior);
    return keys;
}

void ModelBundle::validate() const {
    if (schema_version != kFeatureSchemaVersion) {
        throw std::runtime_error("bundle: feature schema version mismatch");
    }
    for (const auto& cum : cums) {
        if (!similarity.count(cum.app) || !uri_models.count(cum.app)) {
            throw std::runtime_error("bundle: map for " + cum.app +
                                     " lacks a similarity or URI model");
        }
    }
}

nlohmann::ordered_json ModelBundle::to_json() const {
    nlohmann::ordered_json j;
    j["schema_version"] = schema_version;
    j["creation_seed"] = creation_seed;
    j["config"] = config.to_json();
    nlohmann::ordered_json sim = nlohmann::ordered_json::object();
    for (const auto& [app, model] : similarity) sim[app] = model.to_json();
    j["similarity"] = std::move(sim);
    j["background"] = background.to_json();
    j["gate"] = gate.to_json();
    nlohmann::ordered_json uri = nlohmann::ordered_json::object();
    for (const auto& [app, model] : uri_models) uri[app] = model.to_json();
    j["uri_models"] = std::move(uri);
    nlohmann::ordered_json cums_j = nlohmann::ordered_json::array();
    for (const auto& cum : cums) cums_j.push_back(cum.to_json());
    j["cums"] = std::move(cums_j);
    nlohmann::ordered_json parts_j = nlohmann::ordered_json::array();
    for (const auto& part : partitions) parts_j.push_back(part.to_json());
    j["partitions"] = std::move(parts_j);
    return j;
}

ModelBundle ModelBundle::from_json(const nlohmann::ordered_json& j) {
    ModelBundle bundle;
    bundle.schema_version = j.at("schema_version").get<int>();
    bundle.creation_seed = j.at("creation_seed").get<std::uint64_t>();
    bundle.config = PipelineConfig::from_json(j.at("config"));
    for (const auto& [app, model] : j.at("similarity").items()) {
        bundle.similarity.emplace(app, TreeEnsembleModel::from_json(model));
    }
    bundle.background = TreeEnsembleModel::from_json(j.at("background"));
    bundle.gate = LogisticModel::from_json(j.at("gate"));
    for (const auto& [app, model] : j.at("uri_models").items()) {
        bundle.uri_models.emplace(app, TreeEnsembleModel::from_json(model));
    }
    for (const auto& cum : j.at("cums")) {
        bundle.cums.push_back(CanonicalUriMap::from_json(cum));
    }
    for (const auto& part : j.at("partitions")) {
        bundle.partitions.push_back(SharedPrivatePartition::from_json(part));
    }
    bundle.validate();
    return bundle;
}

void ModelBundle::save_file(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("bundle: cannot write " + path);
    out << to_json().dump(1, '\t') << "\n";
}

ModelBundle ModelBundle::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("bundle: cannot open " + path);
    nlohmann::ordered_json j;
    in >> j;
    return from_json(j);
}

ModelBundle train(const PipelineConfig& config, const std::vector<TrafficTrace>& traces) {
    config.validate();
    if (traces.empty()) throw std::runtime_error("train: no training traces");

    ModelBundle bundle;
    bundle.schema_version = kFeatureSchemaVersion;
    bundle.creation_seed = config.seed;
    bundle.config = config;

    std::vector<TraceIdentity> identities;
    identities.reserve(traces.size());
    for (const auto& trace : traces) identities.push_back(identify_trace(trace));

    // flow features, one batch over every flow in order
    std::vector<const Flow*> all_flows;
    std::vector<std::string> flow_apps;
    for (std::size_t t = 0; t < traces.size(); ++t) {
        for (const auto& flow : traces[t].flows) {
            all_flows.push_back(&flow);
            flow_apps.push_back(identities[t].app);
        }
    }
    std::vector<std::span<const Packet>> groups;
    groups.reserve(all_flows.size());
    for (const Flow* flow : all_flows) groups.emplace_back(flow->packets);
    const std::vector<FeatureVector> features = extract_features_batch(groups);
    std::vector<std::vector<double>> rows;
    rows.reserve(features.size());
    for (const auto& fv : features) rows.emplace_back(fv.values.begin(), fv.values.end());

    std::vector<std::string> apps;
    for (const auto& id : identities) {
        if (!id.is_background &&
            std::find(apps.begin(), apps.end(), id.app) == apps.end()) {
            apps.push_back(id.app);
        }
    }
    std::sort(apps.begin(), apps.end());
    if (apps.empty()) throw std::runtime_error("train: no app traces");
    const bool has_background =
        std::any_of(identities.begin(), identities.end(),
                    [](const TraceIdentity& id) { return id.is_background; });

    // per-app similarity ensembles (app vs rest), balanced bootstrap
    ForestHyper sim_hyper = config.similarity_forest;
    sim_hyper.balanced_bootstrap = true;
    for (std::size_t a = 0; a < apps.size(); ++a) {
        std::vector<std::string> labels;
        labels.reserve(rows.size());
        for (const auto& app : flow_apps) {
            labels.push_back(app == apps[a] ? apps[a] : std::string(kRestLabel));
        }
        bundle.similarity.emplace(
            apps[a], TreeEnsembleModel::train(rows, labels, sim_hyper,
                                              Rng::derive(config.seed, 200 + a)));
    }

    // background ensemble (background vs app)
    {
        std::vector<std::string> labels;
        labels.reserve(rows.size());
        for (const auto& app : flow_apps) {
            labels.push_back(app == kBackgroundLabel ? std::string(kBackgroundLabel)
                                                     : std::string("app"));
        }
        if (!has_background) {
            std::cerr << "warning: no background traces; background model trained "
                         "against app flows only\n";
        }
        bundle.background = TreeEnsembleModel::train(rows, labels, sim_hyper,
                                                     Rng::derive(config.seed, 300));
    }

    // logistic gate on (p, p_bar, p - r): positives are app flows scored
    // under their own model, negatives the same flows under another app's
    // model plus background flows under a cycled model
    {
        std::vector<std::array<double, 3>> x;
        std::vector<int> y;
        std::size_t bg_counter = 0;
        for (std::size_t t = 0; t < traces.size(); ++t) {
            const auto& id = identities[t];
            if (traces[t].flows.empty()) continue;
            if (id.is_background) {
                const std::string& model_app = apps[bg_counter++ % apps.size()];
                for (const auto& s : score_flows(traces[t], bundle.similarity.at(model_app),
                                                 bundle.background, config.neighborhood)) {
                    x.push_back({s.p, s.p_bar, s.p - s.r});
                    y.push_back(0);
                }
                continue;
            }
            for (const auto& s : score_flows(traces[t], bundle.similarity.at(id.app),
                                             bundle.background, config.neighborhood)) {
                x.push_back({s.p, s.p_bar, s.p - s.r});
                y.push_back(1);
            }
            if (apps.size() > 1) {
                const auto self =
                    std::find(apps.begin(), apps.end(), id.app) - apps.begin();
                const std::string& other =
                    apps[(static_cast<std::size_t>(self) + 1) % apps.size()];
                for (const auto& s : score_flows(traces[t], bundle.similarity.at(other),
                                                 bundle.background, config.neighborhood)) {
                    x.push_back({s.p, s.p_bar, s.p - s.r});
                    y.push_back(0);
                }
            }
        }
        if (std::find(y.begin(), y.end(), 0) == y.end()) {
            std::cerr << "warning: gate trained without negative examples\n";
        }
        bundle.gate = LogisticModel::train(x, y, config.gate);
    }

    // per-app URI classifiers over labeled training bursts
    ForestHyper uri_hyper = config.uri_forest;
    uri_hyper.balanced_bootstrap = true;
    for (std::size_t a = 0; a < apps.size(); ++a) {
        std::vector<std::vector<double>> burst_rows;
        std::vector<std::string> burst_labels;
        for (std::size_t t = 0; t < traces.size(); ++t) {
            if (identities[t].app != apps[a]) continue;
            for (const auto& flow : traces[t].flows) {
                for (const auto& [burst, uri] : label_training_bursts(flow, config.delta_t)) {
                    const FeatureVector fv = extract_features(burst.packets);
                    burst_rows.emplace_back(fv.values.begin(), fv.values.end());
                    burst_labels.push_back(uri);
                }
            }
        }
        bundle.uri_models.emplace(
            apps[a], TreeEnsembleModel::train(burst_rows, burst_labels, uri_hyper,
                                              Rng::derive(config.seed, 400 + a)));
    }

    // canonical maps per (app, platform, behavior); < 2 instances -> skip
    std::map<std::tuple<std::string, std::string, std::string>, std::vector<TrainingSequence>>
        instance_seqs;
    for (std::size_t t = 0; t < traces.size(); ++t) {
        const auto& id = identities[t];
        if (id.is_background || traces[t].flows.empty()) continue;
        TrainingSequence seq;
        for (const auto& flow : traces[t].flows) {
            auto& order = seq.by_domain[flow.domain];
            for (const auto& [burst, uri] : label_training_bursts(flow, config.delta_t)) {
                (void)burst;
                order.push_back(uri);
            }
        }
        instance_seqs[{id.app, id.platform, id.behavior}].push_back(std::move(seq));
    }
    for (const auto& [key, seqs] : instance_seqs) {
        const auto& [app, platform, behavior] = key;
        if (seqs.size() < 2) {
            std::cerr << "warning: behavior " << app << "/" << platform << "/" << behavior
                      << " has fewer than 2 instances; skipped\n";
            continue;
        }
        bundle.cums.push_back(build_cum(app, platform, behavior, seqs));
    }
    if (bundle.cums.empty()) throw std::runtime_error("train: no behavior had enough instances");
    bundle.partitions = partition_shared_private(bundle.cums);
    bundle.validate();
    return bundle;
}

nlohmann::ordered_json InferenceResult::to_json() const {
    nlohmann::ordered_json j;
    j["trace_id"] = trace_id;
    nlohmann::ordered_json labels_j = nlohmann::ordered_json::array();
    for (const auto& label : labels) {
        labels_j.push_back({{"app", label.app},
                            {"behavior", label.behavior},
                            {"start", label.start_time},
                            {"end", label.end_time},
                            {"score", label.score},
                            {"unseen", label.is_unseen},
                            {"flow_ids", label.flow_ids}});
    }
    j["labels"] = std::move(labels_j);
    nlohmann::ordered_json owner_j = nlohmann::ordered_json::object();
    for (const auto& [flow_id, app] : flow_owner) owner_j[flow_id] = app;
    j["flow_owner"] = std::move(owner_j);
    nlohmann::ordered_json stage1_j = nlohmann::ordered_json::array();
    for (const auto& seg : stage1_report) {
        stage1_j.push_back({{"app", seg.app},
                            {"begin", seg.begin},
                            {"end", seg.end},
                            {"mean_p", seg.mean_p},
                            {"vote_fraction", seg.vote_fraction},
                            {"passed", seg.passed}});
    }
    j["stage1"] = std::move(stage1_j);
    nlohmann::ordered_json uri_j = nlohmann::ordered_json::array();
    for (const auto& seq : uri_report) {
        nlohmann::ordered_json preds = nlohmann::ordered_json::array();
        for (const auto& pred : seq.predictions) {
            preds.push_back({{"flow_id", pred.parent_flow_id},
                             {"domain", pred.domain},
                             {"uri", pred.uri},
                             {"confidence", pred.confidence},
                             {"timestamp", pred.timestamp}});
        }
        uri_j.push_back({{"app", seq.app}, {"predictions", std::move(preds)}});
    }
    j["uri_sequences"] = std::move(uri_j);
    return j;
}

InferenceResult InferenceResult::from_json(const nlohmann::ordered_json& j) {
    InferenceResult result;
    result.trace_id = j.at("trace_id").get<std::string>();
    for (const auto& label_j : j.at("labels")) {
        FinalLabel label;
        label.app = label_j.at("app").get<std::string>();
        label.behavior = label_j.at("behavior").get<std::string>();
        label.start_time = label_j.at("start").get<double>();
        label.end_time = label_j.at("end").get<double>();
        label.score = label_j.at("score").get<double>();
        label.is_unseen = label_j.at("unseen").get<bool>();
        label.flow_ids = label_j.at("flow_ids").get<std::vector<std::string>>();
        result.labels.push_back(std::move(label));
    }
    for (const auto& [flow_id, app] : j.at("flow_owner").items()) {
        result.flow_owner[flow_id] = app.get<std::string>();
    }
    if (j.contains("stage1")) {
        for (const auto& seg_j : j.at("stage1")) {
            Stage1Report seg;
            seg.app = seg_j.at("app").get<std::string>();
            seg.begin = seg_j.at("begin").get<std::size_t>();
            seg.end = seg_j.at("end").get<std::size_t>();
            seg.mean_p = seg_j.at("mean_p").get<double>();
            seg.vote_fraction = seg_j.at("vote_fraction").get<double>();
            seg.passed = seg_j.at("passed").get<bool>();
            result.stage1_report.push_back(std::move(seg));
        }
    }
    if (j.contains("uri_sequences")) {
        for (const auto& seq_j : j.at("uri_sequences")) {
            UriSequence seq;
            seq.app = seq_j.at("app").get<std::string>();
            for (const auto& pred_j : seq_j.at("predictions")) {
                UriPrediction pred;
                pred.parent_flow_id = pred_j.at("flow_id").get<std::string>();
                pred.domain = pred_j.at("domain").get<std::string>();
                pred.uri = pred_j.at("uri").get<std::string>();
                pred.confidence = pred_j.at("confidence").get<double>();
                pred.timestamp = pred_j.at("timestamp").get<double>();
                seq.predictions.push_back(std::move(pred));
            }
            result.uri_report.push_back(std::move(seq));
        }
    }
    return result;
}

InferenceResult infer(const ModelBundle& bundle, const TrafficTrace& trace) {
    bundle.validate();
    InferenceResult result;
    result.trace_id = trace.trace_id;
    if (trace.flows.empty()) return result;
    const PipelineConfig& cfg = bundle.config;
    const Stage1Params params = cfg.stage1_params();

    std::vector<SegmentClaim> claims;
    for (const auto& [app, sim_model] : bundle.similarity) {
        const Stage1Result stage1 =
            run_stage1(trace, app, sim_model, bundle.background, bundle.gate, params);

        for (const auto& seg : stage1.segments) {
            Stage1Report rep;
            rep.app = app;
            rep.begin = seg.begin;
            rep.end = seg.end;
            rep.mean_p = seg.mean_p;
            std::size_t above = 0;
            for (std::size_t i = seg.begin; i < seg.end; ++i) {
                if (stage1.scored[i].p > params.p_min) ++above;
            }
            rep.vote_fraction =
                static_cast<double>(above) / static_cast<double>(seg.end - seg.begin);
            rep.passed = rep.vote_fraction >= params.q;
            result.stage1_report.push_back(std::move(rep));
        }

        const auto uri_it = bundle.uri_models.find(app);
        if (uri_it == bundle.uri_models.end()) continue;
        std::vector<const CanonicalUriMap*> app_cums;
        for (const auto& cum : bundle.cums) {
            if (cum.app == app) app_cums.push_back(&cum);
        }
        if (app_cums.empty()) continue;

        for (const auto& window : stage1.windows) {
            if (!window.passed_coarse) continue;
            std::vector<Burst> bursts;
            for (const Flow* flow : window.flows) {
                for (auto& burst : burstify(*flow, cfg.delta_t)) {
                    bursts.push_back(std::move(burst));
                }
            }
            std::stable_sort(bursts.begin(), bursts.end(),
                             [](const Burst& a, const Burst& b) { return a.start < b.start; });
            const UriSequence seq = classify_bursts(bursts, uri_it->second, app);
            result.uri_report.push_back(seq);

            // best map over the app's behaviors; deterministic tie rule
            auto better = [](const MatchResult& a, const MatchResult& b) {
                if (a.score != b.score) return a.score > b.score;
                if (a.behavior != b.behavior) return a.behavior < b.behavior;
                return a.platform < b.platform;
            };
            MatchResult best;
            bool have_best = false;
            for (const CanonicalUriMap* cum : app_cums) {
                MatchResult r = score_map(seq, *cum, cfg.lambda, cfg.tau);
                if (!have_best || better(r, best)) {
                    best = std::move(r);
                    have_best = true;
                }
            }
            best.is_unseen = best.score <= cfg.beta;
            if (best.is_unseen) {
                MatchResult refined;
                bool have_refined = false;
                for (const CanonicalUriMap* cum : app_cums) {
                    MatchResult r = refine_unseen(seq, *cum,
                                                  bundle.partition_of(app, cum->behavior),
                                                  cfg.lambda, cfg.tau);
                    if (!have_refined || better(r, refined)) {
                        refined = std::move(r);
                        have_refined = true;
                    }
                }
                best = std::move(refined);  // keeps the unseen tag
            }

            SegmentClaim claim;
            claim.app = app;
            claim.start_time = window.start_time;
            claim.end_time = window.end_time;
            claim.flows = window.flows;
            claim.result = std::move(best);
            claims.push_back(std::move(claim));
        }
    }

    result.labels = attribute_flows(claims);
    for (const auto& label : result.labels) {
        for (const auto& flow_id : label.flow_ids) result.flow_owner[flow_id] = label.app;
    }
    return result;
}

TracePredictions to_predictions(const InferenceResult& result) {
    TracePredictions pred;
    pred.trace_id = result.trace_id;
    pred.labels = result.labels;
    return pred;
}

}  // namespace xprint
