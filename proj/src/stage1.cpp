#include "xprint/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xprint/features.hpp"
#include "xprint/parallel.hpp"

namespace xprint {

namespace {

/// The class a binary one-vs-rest model scores for: the label that is not
/// kRestLabel.  Throws when the model does not have that shape.
std::string positive_class(const TreeEnsembleModel& model) {
    const auto& classes = model.classes();
    if (classes.size() != 2) {
        throw std::runtime_error("stage1: similarity model must be binary");
    }
    if (classes[0] == kRestLabel) return classes[1];
    if (classes[1] == kRestLabel) return classes[0];
    throw std::runtime_error("stage1: similarity model lacks the rest label");
}

double segment_sse(const std::vector<double>& prefix, const std::vector<double>& prefix_sq,
                   std::size_t lo, std::size_t hi) {
    const double n = static_cast<double>(hi - lo);
    const double s = prefix[hi] - prefix[lo];
    const double s2 = prefix_sq[hi] - prefix_sq[lo];
    return s2 - s * s / n;
}

}  // namespace

std::vector<ScoredFlow> score_flows(const TrafficTrace& trace,
                                    const TreeEnsembleModel& app_model,
                                    const TreeEnsembleModel& background_model,
                                    int neighborhood) {
    if (neighborhood < 1) throw std::runtime_error("stage1: neighborhood must be >= 1");
    const std::string app_class = positive_class(app_model);
    const auto& bg_classes = background_model.classes();
    if (std::find(bg_classes.begin(), bg_classes.end(), kBackgroundLabel) ==
        bg_classes.end()) {
        throw std::runtime_error("stage1: background model lacks the background label");
    }

    std::vector<const Flow*> order;
    order.reserve(trace.flows.size());
    for (const auto& flow : trace.flows) order.push_back(&flow);
    std::stable_sort(order.begin(), order.end(), [](const Flow* a, const Flow* b) {
        return a->start_time() < b->start_time();
    });

    std::vector<ScoredFlow> scored(order.size());
    par::for_index(order.size(), [&](std::size_t i) {
        const FeatureVector fv = extract_features(order[i]->packets);
        ScoredFlow& s = scored[i];
        s.flow = order[i];
        s.p = app_model.predict_proba_of(fv.values, app_class);
        s.r = background_model.predict_proba_of(fv.values, kBackgroundLabel);
    });

    const int before = (neighborhood - 1) / 2;
    const int after = neighborhood - 1 - before;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        const std::size_t lo = i >= static_cast<std::size_t>(before) ? i - before : 0;
        const std::size_t hi = std::min(scored.size(), i + after + 1);
        double sum = 0.0;
        for (std::size_t k = lo; k < hi; ++k) sum += scored[k].p;
        scored[i].p_bar = sum / static_cast<double>(hi - lo);
    }
    return scored;
}

std::vector<Segment> segment_score_series(const std::vector<ScoredFlow>& scored,
                                          const Stage1Params& params) {
    if (scored.empty()) throw std::runtime_error("stage1: cannot segment an empty series");
    const std::size_t n = scored.size();
    std::vector<double> prefix(n + 1, 0.0), prefix_sq(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        prefix[i + 1] = prefix[i] + scored[i].p;
        prefix_sq[i + 1] = prefix_sq[i] + scored[i].p * scored[i].p;
    }

    const std::size_t m_min = static_cast<std::size_t>(std::max(1, params.m_min));
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, n}};
    std::vector<std::pair<std::size_t, std::size_t>> leaves;
    while (!stack.empty()) {
        const auto [lo, hi] = stack.back();
        stack.pop_back();
        const std::size_t len = hi - lo;
        bool split = false;
        if (len >= 2 * m_min) {
            const double parent = segment_sse(prefix, prefix_sq, lo, hi);
            double best_gain = -1.0;
            std::size_t best_b = 0;
            for (std::size_t b = lo + m_min; b + m_min <= hi; ++b) {
                const double gain = parent - segment_sse(prefix, prefix_sq, lo, b) -
                                    segment_sse(prefix, prefix_sq, b, hi);
                if (gain > best_gain + 1e-15) {
                    best_gain = gain;
                    best_b = b;
                }
            }
            if (best_gain / static_cast<double>(len) >= params.eps_split) {
                // right first so the left child is processed next (leaves in order)
                stack.emplace_back(best_b, hi);
                stack.emplace_back(lo, best_b);
                split = true;
            }
        }
        if (!split) leaves.emplace_back(lo, hi);
    }
    std::sort(leaves.begin(), leaves.end());

    std::vector<Segment> segments;
    segments.reserve(leaves.size());
    for (const auto& [lo, hi] : leaves) {
        segments.push_back(
            {lo, hi, (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo)});
    }

    // agglomerative pass: closest adjacent means first
    while (segments.size() > 1) {
        double best_diff = params.eps_merge;
        std::size_t best_i = segments.size();
        for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
            const double diff = std::fabs(segments[i].mean_p - segments[i + 1].mean_p);
            if (diff < best_diff) {
                best_diff = diff;
                best_i = i;
            }
        }
        if (best_i == segments.size()) break;
        Segment& left = segments[best_i];
        const Segment& right = segments[best_i + 1];
        left.end = right.end;
        left.mean_p =
            (prefix[left.end] - prefix[left.begin]) / static_cast<double>(left.end - left.begin);
        segments.erase(segments.begin() + static_cast<std::ptrdiff_t>(best_i + 1));
    }
    return segments;
}

bool coarse_filter(const std::vector<double>& segment_scores, double q, double p_min) {
    if (segment_scores.empty()) {
        throw std::runtime_error("stage1: coarse_filter on empty segment");
    }
    std::size_t above = 0;
    for (double p : segment_scores) {
        if (p > p_min) ++above;
    }
    return static_cast<double>(above) / static_cast<double>(segment_scores.size()) >= q;
}

bool fine_gate(ScoredFlow& scored, const LogisticModel& gate_model, double threshold) {
    scored.accept_prob =
        gate_model.predict({scored.p, scored.p_bar, scored.p - scored.r});
    scored.passed_gate = scored.accept_prob > threshold;
    return scored.passed_gate;
}

Stage1Result run_stage1(const TrafficTrace& trace, const std::string& app,
                        const TreeEnsembleModel& app_model,
                        const TreeEnsembleModel& background_model,
                        const LogisticModel& gate_model, const Stage1Params& params) {
    Stage1Result result;
    if (trace.flows.empty()) return result;
    result.scored = score_flows(trace, app_model, background_model, params.neighborhood);
    result.segments = segment_score_series(result.scored, params);

    for (const auto& seg : result.segments) {
        std::vector<double> scores;
        scores.reserve(seg.end - seg.begin);
        for (std::size_t i = seg.begin; i < seg.end; ++i) scores.push_back(result.scored[i].p);
        std::size_t above = 0;
        for (double p : scores) {
            if (p > params.p_min) ++above;
        }

        ActivityWindow window;
        window.app = app;
        window.passed_coarse = coarse_filter(scores, params.q, params.p_min);
        window.vote_fraction = static_cast<double>(above) / static_cast<double>(scores.size());
        for (std::size_t i = seg.begin; i < seg.end; ++i) {
            ScoredFlow& s = result.scored[i];
            if (window.passed_coarse) {
                if (fine_gate(s, gate_model, params.gate_threshold)) {
                    window.flows.push_back(s.flow);
                }
            } else {
                window.flows.push_back(s.flow);
            }
        }
        if (window.flows.empty()) continue;  // vote passed but the gate kept nothing
        window.start_time = window.flows.front()->start_time();
        window.end_time = window.flows.front()->end_time();
        for (const Flow* flow : window.flows) {
            window.start_time = std::min(window.start_time, flow->start_time());
            window.end_time = std::max(window.end_time, flow->end_time());
        }
        result.windows.push_back(std::move(window));
    }
    return result;
}

}  // namespace xprint
