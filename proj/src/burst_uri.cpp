#include "xprint/burst_uri.hpp"

#include <algorithm>
#include <stdexcept>

#include "xprint/features.hpp"
#include "xprint/parallel.hpp"

namespace xprint {

std::map<std::string, std::vector<UriPrediction>> UriSequence::per_domain() const {
    std::map<std::string, std::vector<UriPrediction>> out;
    for (const auto& pred : predictions) out[pred.domain].push_back(pred);
    return out;
}

std::vector<Burst> burstify(const Flow& flow, double delta_t) {
    if (!(delta_t > 0.0)) throw std::runtime_error("burstify: delta_t must be > 0");
    std::vector<Burst> bursts;
    Burst current;
    auto flush = [&]() {
        if (current.packets.empty()) return;
        current.parent_flow_id = flow.flow_id;
        current.domain = flow.domain;
        current.start = current.packets.front().timestamp;
        current.end = current.packets.back().timestamp;
        bursts.push_back(std::move(current));
        current = Burst{};
    };
    for (const auto& packet : flow.packets) {
        if (!current.packets.empty() &&
            packet.timestamp - current.packets.back().timestamp >= delta_t) {
            flush();
        }
        current.packets.push_back(packet);
    }
    flush();
    return bursts;
}

std::vector<std::pair<Burst, std::string>> label_training_bursts(const Flow& flow,
                                                                 double delta_t) {
    for (const auto& packet : flow.packets) {
        if (!packet.uri_label) {
            throw std::runtime_error("label_training_bursts: unlabeled packet in flow " +
                                     flow.flow_id);
        }
    }
    std::vector<std::pair<Burst, std::string>> labeled;
    for (auto& burst : burstify(flow, delta_t)) {
        std::string label = *burst.packets.front().uri_label;
        labeled.emplace_back(std::move(burst), std::move(label));
    }
    return labeled;
}

UriSequence classify_bursts(const std::vector<Burst>& bursts,
                            const TreeEnsembleModel& uri_model, const std::string& app) {
    UriSequence seq;
    seq.app = app;
    seq.predictions.resize(bursts.size());
    par::for_index(bursts.size(), [&](std::size_t i) {
        const Burst& burst = bursts[i];
        const FeatureVector fv = extract_features(burst.packets);
        const std::vector<double> probs = uri_model.predict_proba(fv.values);
        std::size_t best = 0;
        for (std::size_t c = 1; c < probs.size(); ++c) {
            if (probs[c] > probs[best]) best = c;
        }
        UriPrediction& pred = seq.predictions[i];
        pred.parent_flow_id = burst.parent_flow_id;
        pred.domain = burst.domain;
        pred.uri = uri_model.classes()[best];
        pred.confidence = probs[best];
        pred.timestamp = burst.start;
    });
    std::stable_sort(seq.predictions.begin(), seq.predictions.end(),
                     [](const UriPrediction& a, const UriPrediction& b) {
                         return a.timestamp < b.timestamp;
                     });
    return seq;
}

}  // namespace xprint
