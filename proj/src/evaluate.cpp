#include "xprint/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xprint {

namespace {

constexpr const char* kNone = "(none)";

std::string behavior_key(const std::string& app, const std::string& behavior) {
    return app + "/" + behavior;
}

double overlap_length(double a_lo, double a_hi, double b_lo, double b_hi) {
    return std::max(0.0, std::min(a_hi, b_hi) - std::max(a_lo, b_lo));
}

void finish(ClassMetrics& m) {
    m.precision = m.tp + m.fp > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp)
                                  : 0.0;
    m.recall = m.tp + m.fn > 0 ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn)
                               : 0.0;
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
}

nlohmann::ordered_json metrics_json(const ClassMetrics& m) {
    nlohmann::ordered_json j;
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["fn"] = m.fn;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    return j;
}

}  // namespace

EvalReport evaluate(const std::vector<TracePredictions>& predictions,
                    const std::vector<TrafficTrace>& truth,
                    const std::set<std::string>& known_behaviors, double overlap_min) {
    std::map<std::string, const TrafficTrace*> truth_by_id;
    for (const auto& trace : truth) truth_by_id[trace.trace_id] = &trace;
    std::map<std::string, const TracePredictions*> pred_by_id;
    for (const auto& pred : predictions) {
        if (!truth_by_id.count(pred.trace_id)) {
            throw std::runtime_error("evaluate: predictions reference unknown trace id " +
                                     pred.trace_id);
        }
        pred_by_id[pred.trace_id] = &pred;
    }

    EvalReport report;
    auto is_known = [&](const std::string& key) {
        return known_behaviors.empty() || known_behaviors.count(key) > 0;
    };

    for (const auto& trace : truth) {
        const auto pit = pred_by_id.find(trace.trace_id);
        static const std::vector<FinalLabel> no_labels;
        const std::vector<FinalLabel>& labels =
            pit != pred_by_id.end() ? pit->second->labels : no_labels;

        std::vector<const FinalLabel*> behavior_preds;
        std::vector<const FinalLabel*> unseen_preds;
        for (const auto& label : labels) {
            (label.is_unseen ? unseen_preds : behavior_preds).push_back(&label);
        }
        std::vector<const GroundTruthWindow*> known_truths;
        std::vector<const GroundTruthWindow*> unseen_truths;
        for (const auto& window : trace.ground_truth_windows) {
            (is_known(behavior_key(window.app, window.behavior)) ? known_truths
                                                                 : unseen_truths)
                .push_back(&window);
        }

        // eligible pairs: overlap at least overlap_min of the truth window
        struct Pair {
            bool label_match;
            double overlap;
            std::size_t truth_idx;
            std::size_t pred_idx;
        };
        std::vector<Pair> pairs;
        for (std::size_t t = 0; t < known_truths.size(); ++t) {
            const auto& tw = *known_truths[t];
            const double span = std::max(tw.end - tw.start, 1e-12);
            for (std::size_t p = 0; p < behavior_preds.size(); ++p) {
                const auto& pw = *behavior_preds[p];
                const double ov =
                    overlap_length(tw.start, tw.end, pw.start_time, pw.end_time) / span;
                if (ov >= overlap_min) {
                    pairs.push_back({tw.app == pw.app && tw.behavior == pw.behavior, ov, t, p});
                }
            }
        }
        std::sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
            if (a.label_match != b.label_match) return a.label_match;
            if (a.overlap != b.overlap) return a.overlap > b.overlap;
            if (a.truth_idx != b.truth_idx) return a.truth_idx < b.truth_idx;
            return a.pred_idx < b.pred_idx;
        });
        std::vector<bool> truth_used(known_truths.size(), false);
        std::vector<bool> pred_used(behavior_preds.size(), false);
        for (const auto& pair : pairs) {
            if (truth_used[pair.truth_idx] || pred_used[pair.pred_idx]) continue;
            truth_used[pair.truth_idx] = true;
            pred_used[pair.pred_idx] = true;
            const auto& tw = *known_truths[pair.truth_idx];
            const auto& pw = *behavior_preds[pair.pred_idx];
            ++report.confusion[behavior_key(tw.app, tw.behavior)]
                              [behavior_key(pw.app, pw.behavior)];
        }
        for (std::size_t t = 0; t < known_truths.size(); ++t) {
            if (truth_used[t]) continue;
            const auto& tw = *known_truths[t];
            ++report.confusion[behavior_key(tw.app, tw.behavior)][kNone];
        }
        for (std::size_t p = 0; p < behavior_preds.size(); ++p) {
            if (pred_used[p]) continue;
            const auto& pw = *behavior_preds[p];
            ++report.confusion[kNone][behavior_key(pw.app, pw.behavior)];
        }

        // unseen detection: match unseen predictions to unseen truths
        std::vector<bool> ut_used(unseen_truths.size(), false);
        for (const auto* pred : unseen_preds) {
            double best_ov = 0.0;
            std::size_t best_t = unseen_truths.size();
            for (std::size_t t = 0; t < unseen_truths.size(); ++t) {
                if (ut_used[t]) continue;
                const auto& tw = *unseen_truths[t];
                const double span = std::max(tw.end - tw.start, 1e-12);
                const double ov =
                    overlap_length(tw.start, tw.end, pred->start_time, pred->end_time) /
                    span;
                if (ov >= overlap_min && ov > best_ov) {
                    best_ov = ov;
                    best_t = t;
                }
            }
            if (best_t < unseen_truths.size()) {
                ut_used[best_t] = true;
                ++report.unseen.tp;
            } else {
                ++report.unseen.fp;
            }
        }
        for (std::size_t t = 0; t < unseen_truths.size(); ++t) {
            if (!ut_used[t]) ++report.unseen.fn;
        }
    }

    // derive per-label metrics from the confusion matrix
    std::set<std::string> labels;
    long long total_events = 0;
    for (const auto& [truth_label, row] : report.confusion) {
        if (truth_label != kNone) labels.insert(truth_label);
        for (const auto& [pred_label, count] : row) {
            if (pred_label != kNone) labels.insert(pred_label);
            total_events += count;
        }
    }
    auto cell = [&](const std::string& t, const std::string& p) -> long long {
        auto rit = report.confusion.find(t);
        if (rit == report.confusion.end()) return 0;
        auto cit = rit->second.find(p);
        return cit == rit->second.end() ? 0 : cit->second;
    };

    for (const auto& label : labels) {
        ClassMetrics m;
        m.tp = cell(label, label);
        for (const auto& [truth_label, row] : report.confusion) {
            for (const auto& [pred_label, count] : row) {
                if (truth_label == label && pred_label != label) m.fn += count;
                if (pred_label == label && truth_label != label) m.fp += count;
            }
        }
        finish(m);
        report.per_behavior[label] = m;

        const double fnr = m.tp + m.fn > 0
                               ? static_cast<double>(m.fn) / static_cast<double>(m.tp + m.fn)
                               : 0.0;
        const long long tn = total_events - m.tp - m.fp - m.fn;
        const double fpr =
            m.fp + tn > 0 ? static_cast<double>(m.fp) / static_cast<double>(m.fp + tn) : 0.0;
        report.fnr[label] = fnr;
        report.fpr[label] = fpr;
    }

    // roll up to apps: sum the counts of the app's behaviors
    std::map<std::string, ClassMetrics> app_counts;
    for (const auto& [label, m] : report.per_behavior) {
        const std::string app = label.substr(0, label.find('/'));
        app_counts[app].tp += m.tp;
        app_counts[app].fp += m.fp;
        app_counts[app].fn += m.fn;
    }
    for (auto& [app, m] : app_counts) {
        finish(m);
        report.per_app[app] = m;
    }

    finish(report.unseen);
    double sum_f1_app = 0.0, sum_f1_beh = 0.0, sum_fnr = 0.0, sum_fpr = 0.0;
    for (const auto& [app, m] : report.per_app) sum_f1_app += m.f1;
    for (const auto& [label, m] : report.per_behavior) sum_f1_beh += m.f1;
    for (const auto& [label, v] : report.fnr) sum_fnr += v;
    for (const auto& [label, v] : report.fpr) sum_fpr += v;
    if (!report.per_app.empty()) {
        report.macro_f1_app = sum_f1_app / static_cast<double>(report.per_app.size());
    }
    if (!report.per_behavior.empty()) {
        const auto n = static_cast<double>(report.per_behavior.size());
        report.macro_f1_behavior = sum_f1_beh / n;
        report.macro_fnr = sum_fnr / n;
        report.macro_fpr = sum_fpr / n;
    }
    return report;
}

nlohmann::ordered_json EvalReport::to_json() const {
    nlohmann::ordered_json j;
    j["macro_f1_app"] = macro_f1_app;
    j["macro_f1_behavior"] = macro_f1_behavior;
    j["macro_fnr"] = macro_fnr;
    j["macro_fpr"] = macro_fpr;
    nlohmann::ordered_json apps = nlohmann::ordered_json::object();
    for (const auto& [app, m] : per_app) apps[app] = metrics_json(m);
    j["per_app"] = std::move(apps);
    nlohmann::ordered_json behaviors = nlohmann::ordered_json::object();
    for (const auto& [label, m] : per_behavior) behaviors[label] = metrics_json(m);
    j["per_behavior"] = std::move(behaviors);
    nlohmann::ordered_json rates = nlohmann::ordered_json::object();
    for (const auto& [label, v] : fnr) {
        rates[label] = {{"fnr", v}, {"fpr", fpr.at(label)}};
    }
    j["behavior_rates"] = std::move(rates);
    j["unseen"] = metrics_json(unseen);
    nlohmann::ordered_json conf = nlohmann::ordered_json::object();
    for (const auto& [truth_label, row] : confusion) {
        nlohmann::ordered_json row_j = nlohmann::ordered_json::object();
        for (const auto& [pred_label, count] : row) row_j[pred_label] = count;
        conf[truth_label] = std::move(row_j);
    }
    j["confusion"] = std::move(conf);
    return j;
}

nlohmann::ordered_json aggregate_reports(const std::vector<EvalReport>& reports) {
    auto stats = [&](auto getter) {
        double mean = 0.0;
        for (const auto& r : reports) mean += getter(r);
        mean /= static_cast<double>(reports.size());
        double var = 0.0;
        for (const auto& r : reports) {
            const double d = getter(r) - mean;
            var += d * d;
        }
        var = reports.size() > 1 ? var / static_cast<double>(reports.size() - 1) : 0.0;
        return nlohmann::ordered_json{{"mean", mean}, {"std", std::sqrt(var)}};
    };
    if (reports.empty()) throw std::runtime_error("aggregate_reports: no reports");
    nlohmann::ordered_json j;
    j["runs"] = reports.size();
    j["macro_f1_app"] = stats([](const EvalReport& r) { return r.macro_f1_app; });
    j["macro_f1_behavior"] = stats([](const EvalReport& r) { return r.macro_f1_behavior; });
    j["macro_fnr"] = stats([](const EvalReport& r) { return r.macro_fnr; });
    j["macro_fpr"] = stats([](const EvalReport& r) { return r.macro_fpr; });
    j["unseen_f1"] = stats([](const EvalReport& r) { return r.unseen.f1; });
    return j;
}

}  // namespace xprint
