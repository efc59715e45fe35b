#include "xprint/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "xprint/burst_uri.hpp"
#include "xprint/features.hpp"
#include "xprint/rng.hpp"
#include "xprint/synthgen.hpp"
#include "xprint/urimap.hpp"

namespace xprint {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("experiment: cannot write " + path.string());
    out << text;
}

void write_summary(const std::filesystem::path& dir, const nlohmann::ordered_json& summary) {
    write_text(dir / "summary.json", summary.dump(1, '\t') + "\n");
}

/// Decision-level confusion matrix (truth label -> predicted label).
using Decisions = std::map<std::string, std::map<std::string, long long>>;

struct LabelRates {
    double f1 = 0.0;
    double fnr = 0.0;
    double fpr = 0.0;
};

std::map<std::string, LabelRates> decision_rates(const Decisions& decisions) {
    std::set<std::string> labels;
    long long total = 0;
    for (const auto& [t, row] : decisions) {
        labels.insert(t);
        for (const auto& [p, n] : row) {
            labels.insert(p);
            total += n;
        }
    }
    std::map<std::string, LabelRates> rates;
    for (const auto& label : labels) {
        long long tp = 0, fp = 0, fn = 0;
        for (const auto& [t, row] : decisions) {
            for (const auto& [p, n] : row) {
                if (t == label && p == label) tp += n;
                if (t == label && p != label) fn += n;
                if (t != label && p == label) fp += n;
            }
        }
        const long long tn = total - tp - fp - fn;
        LabelRates r;
        const double precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
        const double recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
        r.f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        r.fnr = tp + fn > 0 ? double(fn) / double(tp + fn) : 0.0;
        r.fpr = fp + tn > 0 ? double(fp) / double(fp + tn) : 0.0;
        rates[label] = r;
    }
    return rates;
}

double macro_of(const std::map<std::string, LabelRates>& rates, double LabelRates::*field) {
    if (rates.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& [label, r] : rates) sum += r.*field;
    return sum / static_cast<double>(rates.size());
}

/// Pure instances for each spec, with per-instance start times drawn from
/// the session-start bracket.
std::vector<TrafficTrace> make_instances(const std::vector<BehaviorSpec>& specs, int count,
                                         const PipelineConfig& config,
                                         std::uint64_t stream_base,
                                         const std::string& prefix) {
    std::vector<TrafficTrace> traces;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        const auto& spec = specs[s];
        for (int k = 0; k < count; ++k) {
            Rng rng(Rng::derive(config.seed, stream_base + s * 1000 + k));
            const double t0 = rng.uniform(config.scenario.session_start_lo,
                                          config.scenario.session_start_hi);
            const std::string id = prefix + "/" + spec.app + "/" + spec.platform + "/" +
                                   spec.behavior + "/" + std::to_string(k);
            traces.push_back(generate_instance(spec, rng.next_u64(), t0, id));
        }
    }
    return traces;
}

std::vector<TrafficTrace> make_background_traces(const PipelineConfig& config, int count,
                                                 double duration,
                                                 std::uint64_t stream_base) {
    std::vector<TrafficTrace> traces;
    for (int k = 0; k < count; ++k) {
        traces.push_back(generate_background(config.scenario, duration,
                                             Rng::derive(config.seed, stream_base + k),
                                             "train/background/" + std::to_string(k)));
    }
    return traces;
}

/// Classifies every burst of the trace's flows with one URI model.
UriSequence classify_trace(const TrafficTrace& trace, const TreeEnsembleModel& model,
                           double delta_t, const std::string& app) {
    std::vector<Burst> bursts;
    for (const auto& flow : trace.flows) {
        for (auto& burst : burstify(flow, delta_t)) bursts.push_back(std::move(burst));
    }
    std::stable_sort(bursts.begin(), bursts.end(),
                     [](const Burst& a, const Burst& b) { return a.start < b.start; });
    return classify_bursts(bursts, model, app);
}

/// True when the series rises (weakly) to a single peak then falls (weakly).
bool is_unimodal(const std::vector<double>& values, double tol = 1e-9) {
    std::size_t peak = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[peak]) peak = i;
    }
    for (std::size_t i = 0; i + 1 < peak; ++i) {
        if (values[i] > values[i + 1] + tol) return false;
    }
    for (std::size_t i = peak; i + 1 < values.size(); ++i) {
        if (values[i + 1] > values[i] + tol) return false;
    }
    return true;
}

// ---------------------------------------------------------------- corpora

nlohmann::ordered_json experiment_delta_sweep(const PipelineConfig& base,
                                              const std::filesystem::path& dir);
nlohmann::ordered_json experiment_map_vs_bag(const PipelineConfig& base,
                                             const std::filesystem::path& dir);
nlohmann::ordered_json experiment_lambda_beta(const PipelineConfig& base,
                                              const std::filesystem::path& dir);
nlohmann::ordered_json experiment_unseen_platform(const PipelineConfig& base,
                                                  const std::filesystem::path& dir);
nlohmann::ordered_json experiment_end_to_end(const PipelineConfig& base,
                                             const std::filesystem::path& dir);

// --------------------------------------------------------------- delta-sweep

/// Corpus texture for the burst-threshold sweep: wide intra-gap bracket so
/// tiny thresholds fragment, and URI pairs distinguished only by disjoint
/// packet counts so fragments are ambiguous.
std::vector<BehaviorSpec> count_coded_specs(PipelineConfig& cfg) {
    cfg.scenario.platforms = {cfg.scenario.platforms.front()};
    cfg.scenario.intra_gap_mean_lo = 0.010;
    cfg.scenario.intra_gap_mean_hi = 0.070;
    cfg.scenario.validate();
    std::vector<BehaviorSpec> specs = build_scenario(cfg.scenario);
    for (auto& spec : specs) {
        for (std::size_t u = 0; u + 1 < spec.signatures.size(); u += 2) {
            UriSignature& a = spec.signatures[u];
            UriSignature& b = spec.signatures[u + 1];
            a.pkt_min = 4;
            a.pkt_max = 5;
            b.pkt_min = 9;
            b.pkt_max = 11;
            b.out_size_mean = a.out_size_mean;
            b.out_size_sd = a.out_size_sd;
            b.in_size_mean = a.in_size_mean;
            b.in_size_sd = a.in_size_sd;
            b.direction_pattern = a.direction_pattern;
            b.intra_gap_mean = a.intra_gap_mean;
        }
        spec.validate();
    }
    return specs;
}

nlohmann::ordered_json experiment_delta_sweep(const PipelineConfig& base,
                                              const std::filesystem::path& dir) {
    PipelineConfig cfg = base;
    const std::vector<BehaviorSpec> specs = count_coded_specs(cfg);
    const auto train_traces = make_instances(specs, cfg.scenario.instances_train, cfg,
                                             10000, "train");
    const auto test_traces = make_instances(specs, cfg.scenario.instances_test, cfg,
                                            20000, "test");

    std::vector<std::string> apps;
    for (const auto& spec : specs) {
        if (std::find(apps.begin(), apps.end(), spec.app) == apps.end()) {
            apps.push_back(spec.app);
        }
    }
    std::sort(apps.begin(), apps.end());
    auto app_of_trace = [](const TrafficTrace& t) {
        return t.flows.front().app_label.value_or("");
    };

    const std::vector<double> deltas = {0.05, 0.5, 2.0, 5.0};
    std::ostringstream csv;
    csv << "delta_t,macro_f1,invocations\n";
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    double best_f1 = -1.0, best_delta = 0.0;

    for (std::size_t d = 0; d < deltas.size(); ++d) {
        const double delta_t = deltas[d];
        Decisions decisions;
        long long n_invocations = 0;
        for (std::size_t a = 0; a < apps.size(); ++a) {
            ForestHyper hyper = cfg.uri_forest;
            hyper.balanced_bootstrap = true;
            std::vector<std::vector<double>> rows_x;
            std::vector<std::string> labels;
            for (const auto& trace : train_traces) {
                if (app_of_trace(trace) != apps[a]) continue;
                for (const auto& flow : trace.flows) {
                    for (const auto& [burst, uri] : label_training_bursts(flow, delta_t)) {
                        const FeatureVector fv = extract_features(burst.packets);
                        rows_x.emplace_back(fv.values.begin(), fv.values.end());
                        labels.push_back(uri);
                    }
                }
            }
            const TreeEnsembleModel model = TreeEnsembleModel::train(
                rows_x, labels, hyper, Rng::derive(cfg.seed, 800 + d * 100 + a));

            for (const auto& trace : test_traces) {
                if (app_of_trace(trace) != apps[a]) continue;
                for (const auto& flow : trace.flows) {
                    const auto bursts = burstify(flow, delta_t);
                    const UriSequence seq = classify_bursts(bursts, model, apps[a]);
                    // burst index of every packet position
                    std::vector<std::size_t> burst_of;
                    for (std::size_t b = 0; b < bursts.size(); ++b) {
                        burst_of.insert(burst_of.end(), bursts[b].packets.size(), b);
                    }
                    // ground-truth invocations: runs of equal uri_label
                    std::size_t i = 0;
                    while (i < flow.packets.size()) {
                        const std::string truth = flow.packets[i].uri_label.value_or("");
                        std::size_t j = i;
                        while (j < flow.packets.size() &&
                               flow.packets[j].uri_label.value_or("") == truth) {
                            ++j;
                        }
                        const std::string& predicted =
                            seq.predictions[burst_of[i]].uri;
                        ++decisions[truth][predicted];
                        ++n_invocations;
                        i = j;
                    }
                }
            }
        }
        const auto rates = decision_rates(decisions);
        // macro over the classes that actually occur as ground truth
        double sum = 0.0;
        long long n_classes = 0;
        for (const auto& [label, r] : rates) {
            bool in_truth = false;
            auto it = decisions.find(label);
            if (it != decisions.end()) {
                for (const auto& [p, n] : it->second) in_truth |= n > 0;
            }
            if (!in_truth) continue;
            sum += r.f1;
            ++n_classes;
        }
        const double macro_f1 = n_classes > 0 ? sum / double(n_classes) : 0.0;
        csv << delta_t << "," << macro_f1 << "," << n_invocations << "\n";
        rows.push_back({{"delta_t", delta_t},
                        {"macro_f1", macro_f1},
                        {"invocations", n_invocations}});
        if (macro_f1 > best_f1) {
            best_f1 = macro_f1;
            best_delta = delta_t;
        }
    }

    write_text(dir / "delta_sweep.csv", csv.str());
    nlohmann::ordered_json summary;
    summary["experiment"] = "delta-sweep";
    summary["rows"] = std::move(rows);
    summary["best_delta_t"] = best_delta;
    summary["best_macro_f1"] = best_f1;
    write_summary(dir, summary);
    return summary;
}

// --------------------------------------------------------------- map-vs-bag

nlohmann::ordered_json experiment_map_vs_bag(const PipelineConfig& base,
                                             const std::filesystem::path& dir) {
    PipelineConfig cfg = base;
    cfg.scenario.platforms = {cfg.scenario.platforms.front()};
    const int n_behaviors = std::max(3, cfg.scenario.behaviors_per_app);
    // all behaviors share every URI; only the invocation order differs
    const std::vector<BehaviorSpec> specs =
        make_shared_core_behaviors(cfg.scenario, 0, n_behaviors, 7, 0);

    const auto train_traces = make_instances(specs, cfg.scenario.instances_train, cfg,
                                             30000, "train");
    const auto test_traces = make_instances(specs, cfg.scenario.instances_test, cfg,
                                            40000, "test");

    // one URI classifier over all behaviors (single app)
    ForestHyper hyper = cfg.uri_forest;
    hyper.balanced_bootstrap = true;
    std::vector<std::vector<double>> rows_x;
    std::vector<std::string> labels;
    std::map<std::string, std::vector<TrainingSequence>> sequences;  // behavior ->
    for (const auto& trace : train_traces) {
        TrainingSequence seq;
        for (const auto& flow : trace.flows) {
            auto& order = seq.by_domain[flow.domain];
            for (const auto& [burst, uri] : label_training_bursts(flow, cfg.delta_t)) {
                const FeatureVector fv = extract_features(burst.packets);
                rows_x.emplace_back(fv.values.begin(), fv.values.end());
                labels.push_back(uri);
                order.push_back(uri);
            }
        }
        sequences[*trace.flows.front().behavior_label].push_back(std::move(seq));
    }
    const TreeEnsembleModel model =
        TreeEnsembleModel::train(rows_x, labels, hyper, Rng::derive(cfg.seed, 50000));
    std::vector<CanonicalUriMap> cums;
    for (const auto& [behavior, seqs] : sequences) {
        cums.push_back(build_cum(specs.front().app, specs.front().platform, behavior, seqs));
    }

    Decisions map_decisions, bag_decisions;
    for (const auto& trace : test_traces) {
        const std::string truth = *trace.flows.front().behavior_label;
        const UriSequence seq =
            classify_trace(trace, model, cfg.delta_t, specs.front().app);
        std::string map_pick, bag_pick;
        double map_best = -1.0, bag_best = -1.0;
        for (const auto& cum : cums) {
            const double map_score = score_map(seq, cum, cfg.lambda, cfg.tau).score;
            if (map_score > map_best) {
                map_best = map_score;
                map_pick = cum.behavior;
            }
            const double bag_score = bag_match_baseline(seq, cum);
            if (bag_score > bag_best) {
                bag_best = bag_score;
                bag_pick = cum.behavior;
            }
        }
        ++map_decisions[truth][map_pick];
        ++bag_decisions[truth][bag_pick];
    }

    const auto map_rates = decision_rates(map_decisions);
    const auto bag_rates = decision_rates(bag_decisions);
    std::ostringstream csv;
    csv << "behavior,map_fnr,map_fpr,bag_fnr,bag_fpr\n";
    for (const auto& [behavior, r] : map_rates) {
        const auto& b = bag_rates.at(behavior);
        csv << behavior << "," << r.fnr << "," << r.fpr << "," << b.fnr << "," << b.fpr
            << "\n";
    }
    write_text(dir / "map_vs_bag.csv", csv.str());

    nlohmann::ordered_json summary;
    summary["experiment"] = "map-vs-bag";
    summary["map_fnr"] = macro_of(map_rates, &LabelRates::fnr);
    summary["map_fpr"] = macro_of(map_rates, &LabelRates::fpr);
    summary["bag_fnr"] = macro_of(bag_rates, &LabelRates::fnr);
    summary["bag_fpr"] = macro_of(bag_rates, &LabelRates::fpr);
    summary["map_macro_f1"] = macro_of(map_rates, &LabelRates::f1);
    summary["bag_macro_f1"] = macro_of(bag_rates, &LabelRates::f1);
    write_summary(dir, summary);
    return summary;
}

// ----------------------------------------------------------- lambda-beta

/// An app whose traffic is indistinguishable from a known app's at the
/// burst level — every signature is an exact clone — but whose invocation
/// order within each domain is the exact reverse.  The burst classifier
/// confidently labels the clones with the known app's URIs (high coverage,
/// no deficit) while the in-order match collapses to one hit per domain,
/// pinning the map score far below a genuine instance's.
BehaviorSpec make_unseen_mimic(const BehaviorSpec& known, int index) {
    BehaviorSpec mimic;
    mimic.app = "unseen" + std::to_string(index);
    mimic.platform = known.platform;
    mimic.behavior = "behavior0";
    mimic.timing = known.timing;
    std::map<std::string, const UriSignature*> sig_of;
    for (const auto& sig : known.signatures) sig_of[sig.uri] = &sig;
    for (std::size_t d = 0; d < known.branches.size(); ++d) {
        const auto& branch = known.branches[d];
        DomainBranch b;
        b.domain = branch.domain;
        b.canonical_prob = 1.0;
        for (std::size_t k = 0; k < branch.canonical.size(); ++k) {
            const std::string& source = branch.canonical[branch.canonical.size() - 1 - k];
            UriSignature sig = *sig_of.at(source);
            sig.uri = "/u" + std::to_string(index) + "/x" + std::to_string(d) + "_" +
                      std::to_string(k);
            sig.shared = false;
            b.canonical.push_back(sig.uri);
            mimic.signatures.push_back(std::move(sig));
        }
        mimic.branches.push_back(std::move(b));
    }
    mimic.validate();
    return mimic;
}

nlohmann::ordered_json experiment_lambda_beta(const PipelineConfig& base,
                                              const std::filesystem::path& dir) {
    PipelineConfig cfg = base;
    cfg.scenario.platforms = {cfg.scenario.platforms.front()};
    cfg.scenario.behaviors_per_app = 1;
    cfg.scenario.uris_per_behavior = 12;
    cfg.scenario.domains_per_app = 2;
    cfg.scenario.validate();

    const std::vector<BehaviorSpec> known = build_scenario(cfg.scenario);
    std::vector<BehaviorSpec> unseen;
    for (std::size_t i = 0; i < known.size(); ++i) {
        unseen.push_back(make_unseen_mimic(known[i], static_cast<int>(i)));
    }

    auto train_traces = make_instances(known, cfg.scenario.instances_train, cfg, 60000,
                                       "train");
    for (auto& bg : make_background_traces(cfg, 4, 120.0, 70000)) {
        train_traces.push_back(std::move(bg));
    }
    const ModelBundle bundle = train(cfg, train_traces);

    auto known_test = make_instances(known, cfg.scenario.instances_test, cfg, 80000, "test");
    auto unseen_test =
        make_instances(unseen, cfg.scenario.instances_test, cfg, 90000, "test");

    // per instance, per candidate map: lambda-independent score components
    struct Components {
        double numerator = 0.0;
        double covered_sum = 0.0;
        double deficit = 0.0;  // |C| - |P|
    };
    struct InstanceScores {
        bool truth_unseen = false;
        std::vector<Components> candidates;
    };
    std::vector<InstanceScores> instances;

    const Stage1Params params = cfg.stage1_params();
    auto process = [&](const TrafficTrace& trace, bool truth_unseen) {
        InstanceScores inst;
        inst.truth_unseen = truth_unseen;
        for (const auto& [app, sim_model] : bundle.similarity) {
            const Stage1Result stage1 = run_stage1(trace, app, sim_model, bundle.background,
                                                   bundle.gate, params);
            if (stage1.windows.empty()) continue;
            const auto& uri_model = bundle.uri_models.at(app);
            for (const auto& window : stage1.windows) {
                if (!window.passed_coarse) continue;
                std::vector<Burst> bursts;
                for (const Flow* flow : window.flows) {
                    for (auto& burst : burstify(*flow, cfg.delta_t)) {
                        bursts.push_back(std::move(burst));
                    }
                }
                std::stable_sort(bursts.begin(), bursts.end(),
                                 [](const Burst& a, const Burst& b) {
                                     return a.start < b.start;
                                 });
                const UriSequence seq = classify_bursts(bursts, uri_model, app);
                std::map<std::string, double> max_conf;  // per URI, any confidence
                for (const auto& pred : seq.predictions) {
                    auto [it, inserted] = max_conf.try_emplace(pred.uri, pred.confidence);
                    if (!inserted) it->second = std::max(it->second, pred.confidence);
                }
                for (const auto& cum : bundle.cums) {
                    if (cum.app != app) continue;
                    const MatchResult r = score_map(seq, cum, 1.0, cfg.tau);
                    Components c;
                    for (const auto& [uri, conf] : r.matched) {
                        (void)uri;
                        if (conf >= cfg.tau) c.numerator += conf;
                    }
                    c.deficit = double(cum.uri_set.size() - r.covered.size());
                    for (const auto& uri : r.covered) c.covered_sum += max_conf.at(uri);
                    inst.candidates.push_back(c);
                }
            }
        }
        instances.push_back(std::move(inst));
    };
    for (const auto& trace : known_test) process(trace, false);
    for (const auto& trace : unseen_test) process(trace, true);

    std::ostringstream csv;
    csv << "lambda,beta,f1,tp,fp,fn\n";
    nlohmann::ordered_json grid = nlohmann::ordered_json::array();
    std::vector<double> lambda_1_f1;
    std::vector<double> betas;
    for (int bi = 1; bi <= 9; ++bi) betas.push_back(bi / 10.0);

    for (int li = 2; li <= 20; li += 2) {
        const double lambda = li / 10.0;
        for (double beta : betas) {
            long long tp = 0, fp = 0, fn = 0;
            for (const auto& inst : instances) {
                double best = 0.0;
                bool any = false;
                for (const auto& c : inst.candidates) {
                    const double denom = c.covered_sum + lambda * c.deficit;
                    const double score =
                        denom > 0.0 ? std::clamp(c.numerator / denom, 0.0, 1.0) : 0.0;
                    best = std::max(best, score);
                    any = true;
                }
                const bool flagged = any && best <= beta;
                if (flagged && inst.truth_unseen) ++tp;
                if (flagged && !inst.truth_unseen) ++fp;
                if (!flagged && inst.truth_unseen) ++fn;
            }
            const double precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
            const double recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
            const double f1 = precision + recall > 0
                                  ? 2.0 * precision * recall / (precision + recall)
                                  : 0.0;
            csv << lambda << "," << beta << "," << f1 << "," << tp << "," << fp << ","
                << fn << "\n";
            grid.push_back(
                {{"lambda", lambda}, {"beta", beta}, {"f1", f1}, {"tp", tp}, {"fp", fp}, {"fn", fn}});
            if (li == 10) lambda_1_f1.push_back(f1);
        }
    }
    write_text(dir / "lambda_beta_grid.csv", csv.str());

    double best_f1 = 0.0;
    for (double f1 : lambda_1_f1) best_f1 = std::max(best_f1, f1);
    nlohmann::ordered_json summary;
    summary["experiment"] = "lambda-beta-grid";
    summary["grid"] = std::move(grid);
    summary["lambda_1"] = {{"betas", betas},
                           {"f1", lambda_1_f1},
                           {"unimodal", is_unimodal(lambda_1_f1)},
                           {"best_f1", best_f1},
                           {"f1_at_beta_0.3", lambda_1_f1.size() > 2 ? lambda_1_f1[2] : 0.0}};
    write_summary(dir, summary);
    return summary;
}

// ------------------------------------------------------- unseen-platform

nlohmann::ordered_json experiment_unseen_platform(const PipelineConfig& base,
                                                  const std::filesystem::path& dir) {
    PipelineConfig cfg = base;
    cfg.scenario.n_apps = 1;
    if (cfg.scenario.platforms.size() < 2) {
        cfg.scenario.platforms = {"android", "ios"};
    }
    cfg.scenario.behaviors_per_app = std::max(6, cfg.scenario.behaviors_per_app);
    cfg.scenario.uris_per_behavior = 6;
    cfg.scenario.domains_per_app = 3;
    cfg.scenario.shared_fraction = 1.0 / 3.0;
    cfg.scenario.validate();

    const std::vector<BehaviorSpec> family = make_cross_platform_family(cfg.scenario, 0);
    const std::vector<BehaviorSpec> web =
        make_replaced_private_platform(family, "web", Rng::derive(cfg.seed, 4242));

    auto train_traces = make_instances(family, cfg.scenario.instances_train, cfg, 100000,
                                       "train");
    for (auto& bg : make_background_traces(cfg, 4, 120.0, 110000)) {
        train_traces.push_back(std::move(bg));
    }
    const ModelBundle bundle = train(cfg, train_traces);
    const std::string app = family.front().app;
    const auto& uri_model = bundle.uri_models.at(app);

    const auto test_traces =
        make_instances(web, cfg.scenario.instances_test, cfg, 120000, "test");

    Decisions unrefined, refined, chance;
    Rng chance_rng(Rng::derive(cfg.seed, 999));
    std::vector<std::string> behaviors;
    for (const auto& spec : web) behaviors.push_back(spec.behavior);
    std::sort(behaviors.begin(), behaviors.end());

    for (const auto& trace : test_traces) {
        const std::string truth = *trace.flows.front().behavior_label;
        const UriSequence seq = classify_trace(trace, uri_model, cfg.delta_t, app);
        std::string pick_plain, pick_refined;
        double best_plain = -1.0, best_refined = -1.0;
        for (const auto& cum : bundle.cums) {
            if (cum.app != app) continue;
            const double plain = score_map(seq, cum, cfg.lambda, cfg.tau).score;
            if (plain > best_plain) {
                best_plain = plain;
                pick_plain = cum.behavior;
            }
            const double shared_only =
                refine_unseen(seq, cum, bundle.partition_of(app, cum.behavior), cfg.lambda,
                              cfg.tau)
                    .score;
            if (shared_only > best_refined) {
                best_refined = shared_only;
                pick_refined = cum.behavior;
            }
        }
        ++unrefined[truth][pick_plain];
        ++refined[truth][pick_refined];
        ++chance[truth][behaviors[chance_rng.below(behaviors.size())]];
    }

    const auto rates_plain = decision_rates(unrefined);
    const auto rates_refined = decision_rates(refined);
    const auto rates_chance = decision_rates(chance);
    std::ostringstream csv;
    csv << "behavior,unrefined_f1,refined_f1\n";
    for (const auto& [behavior, r] : rates_plain) {
        csv << behavior << "," << r.f1 << "," << rates_refined.at(behavior).f1 << "\n";
    }
    write_text(dir / "unseen_platform.csv", csv.str());

    nlohmann::ordered_json summary;
    summary["experiment"] = "unseen-platform";
    summary["unrefined_macro_f1"] = macro_of(rates_plain, &LabelRates::f1);
    summary["refined_macro_f1"] = macro_of(rates_refined, &LabelRates::f1);
    summary["chance_macro_f1"] = macro_of(rates_chance, &LabelRates::f1);
    summary["gain"] =
        macro_of(rates_refined, &LabelRates::f1) - macro_of(rates_plain, &LabelRates::f1);
    write_summary(dir, summary);
    return summary;
}

// ----------------------------------------------------------- end-to-end

nlohmann::ordered_json experiment_end_to_end(const PipelineConfig& base,
                                             const std::filesystem::path& dir) {
    const GeneratedCorpus corpus = generate_corpus(base);
    const ModelBundle bundle = train(base, corpus.train);
    std::vector<TracePredictions> predictions;
    for (const auto& trace : corpus.test) {
        predictions.push_back(to_predictions(infer(bundle, trace)));
    }
    const EvalReport report =
        evaluate(predictions, corpus.test, bundle.known_behaviors());

    std::ostringstream csv;
    csv << "behavior,precision,recall,f1,fnr,fpr\n";
    for (const auto& [label, m] : report.per_behavior) {
        csv << label << "," << m.precision << "," << m.recall << "," << m.f1 << ","
            << report.fnr.at(label) << "," << report.fpr.at(label) << "\n";
    }
    write_text(dir / "end_to_end.csv", csv.str());

    nlohmann::ordered_json summary;
    summary["experiment"] = "end-to-end";
    summary["report"] = report.to_json();
    summary["aggregate"] = aggregate_reports({report});
    write_summary(dir, summary);
    return summary;
}

}  // namespace

GeneratedCorpus generate_corpus(const PipelineConfig& config) {
    config.validate();
    GeneratedCorpus corpus;
    const std::vector<BehaviorSpec> specs = build_scenario(config.scenario);
    corpus.train = make_instances(specs, config.scenario.instances_train, config, 1000000,
                                  "train");
    const int n_bg = std::max<int>(4, static_cast<int>(specs.size()) / 4);
    for (auto& bg : make_background_traces(config, n_bg, 120.0, 2000000)) {
        corpus.train.push_back(std::move(bg));
    }

    std::vector<TrafficTrace> pool =
        make_instances(specs, config.scenario.instances_test, config, 3000000, "test");
    Rng rng(Rng::derive(config.seed, 777));
    for (std::size_t i = pool.size(); i > 1; --i) {  // deterministic shuffle
        std::swap(pool[i - 1], pool[rng.below(i)]);
    }
    for (std::size_t i = 0; i < pool.size();) {
        if (i + 1 < pool.size() && rng.uniform() < config.scenario.merge_prob) {
            corpus.test.push_back(
                merge_traces(pool[i], pool[i + 1], random_merge_delay(rng)));
            i += 2;
        } else {
            corpus.test.push_back(std::move(pool[i]));
            i += 1;
        }
    }
    corpus.manifest = scenario_manifest(config.scenario, specs);
    return corpus;
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {
        "delta-sweep", "map-vs-bag", "lambda-beta-grid", "unseen-platform", "end-to-end"};
    return names;
}

nlohmann::ordered_json run_experiment(const std::string& name, const PipelineConfig& config,
                                      const std::string& out_dir) {
    config.validate();
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    if (name == "delta-sweep") return experiment_delta_sweep(config, dir);
    if (name == "map-vs-bag") return experiment_map_vs_bag(config, dir);
    if (name == "lambda-beta-grid") return experiment_lambda_beta(config, dir);
    if (name == "unseen-platform") return experiment_unseen_platform(config, dir);
    if (name == "end-to-end") return experiment_end_to_end(config, dir);
    throw std::runtime_error("unknown experiment: " + name);
}

}  // namespace xprint
