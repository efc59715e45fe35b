#include "xprint/urimap.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace xprint {

nlohmann::ordered_json CanonicalUriMap::to_json() const {
    nlohmann::ordered_json j;
    j["app"] = app;
    j["platform"] = platform;
    j["behavior"] = behavior;
    nlohmann::ordered_json branches_j = nlohmann::ordered_json::object();
    for (const auto& [domain, order] : branches) branches_j[domain] = order;
    j["branches"] = std::move(branches_j);
    nlohmann::ordered_json support_j = nlohmann::ordered_json::object();
    for (const auto& [domain, s] : canonical_support) support_j[domain] = s;
    j["canonical_support"] = std::move(support_j);
    return j;
}

CanonicalUriMap CanonicalUriMap::from_json(const nlohmann::ordered_json& j) {
    CanonicalUriMap cum;
    cum.app = j.at("app").get<std::string>();
    cum.platform = j.at("platform").get<std::string>();
    cum.behavior = j.at("behavior").get<std::string>();
    for (const auto& [domain, order] : j.at("branches").items()) {
        cum.branches[domain] = order.get<std::vector<std::string>>();
        for (const auto& uri : cum.branches[domain]) cum.uri_set.insert(uri);
    }
    for (const auto& [domain, s] : j.at("canonical_support").items()) {
        cum.canonical_support[domain] = s.get<double>();
    }
    return cum;
}

nlohmann::ordered_json SharedPrivatePartition::to_json() const {
    nlohmann::ordered_json j;
    j["app"] = app;
    j["behavior"] = behavior;
    j["shared"] = std::vector<std::string>(shared.begin(), shared.end());
    nlohmann::ordered_json priv = nlohmann::ordered_json::object();
    for (const auto& [platform, uris] : private_uris) {
        priv[platform] = std::vector<std::string>(uris.begin(), uris.end());
    }
    j["private"] = std::move(priv);
    j["single_platform"] = single_platform;
    return j;
}

SharedPrivatePartition SharedPrivatePartition::from_json(const nlohmann::ordered_json& j) {
    SharedPrivatePartition part;
    part.app = j.at("app").get<std::string>();
    part.behavior = j.at("behavior").get<std::string>();
    for (const auto& uri : j.at("shared")) part.shared.insert(uri.get<std::string>());
    for (const auto& [platform, uris] : j.at("private").items()) {
        auto& dst = part.private_uris[platform];
        for (const auto& uri : uris) dst.insert(uri.get<std::string>());
    }
    part.single_platform = j.at("single_platform").get<bool>();
    return part;
}

CanonicalUriMap build_cum(const std::string& app, const std::string& platform,
                          const std::string& behavior,
                          const std::vector<TrainingSequence>& instances) {
    if (instances.empty()) {
        throw std::runtime_error("build_cum: no labeled instances for " + app + "/" +
                                 platform + "/" + behavior);
    }
    CanonicalUriMap cum;
    cum.app = app;
    cum.platform = platform;
    cum.behavior = behavior;

    std::set<std::string> domains;
    for (const auto& inst : instances) {
        for (const auto& [domain, seq] : inst.by_domain) {
            if (!seq.empty()) domains.insert(domain);
        }
    }
    if (domains.empty()) {
        throw std::runtime_error("build_cum: instances carry no URI sequences");
    }

    for (const auto& domain : domains) {
        std::map<std::vector<std::string>, int> votes;
        for (const auto& inst : instances) {
            auto it = inst.by_domain.find(domain);
            if (it == inst.by_domain.end() || it->second.empty()) continue;
            ++votes[it->second];
        }
        const std::vector<std::string>* best = nullptr;
        int best_count = 0;
        for (const auto& [seq, count] : votes) {
            bool better = count > best_count;
            if (count == best_count && best != nullptr) {
                if (seq.size() != best->size()) {
                    better = seq.size() < best->size();
                } else {
                    better = seq < *best;
                }
            }
            if (best == nullptr || better) {
                best = &seq;
                best_count = count;
            }
        }
        cum.branches[domain] = *best;
        cum.canonical_support[domain] =
            static_cast<double>(best_count) / static_cast<double>(instances.size());
        for (const auto& uri : *best) cum.uri_set.insert(uri);
    }
    return cum;
}

std::vector<SharedPrivatePartition> partition_shared_private(
    const std::vector<CanonicalUriMap>& cums) {
    // group per (app, behavior), collecting per-platform URI sets
    std::map<std::pair<std::string, std::string>, std::map<std::string, std::set<std::string>>>
        groups;
    for (const auto& cum : cums) {
        auto& per_platform = groups[{cum.app, cum.behavior}][cum.platform];
        per_platform.insert(cum.uri_set.begin(), cum.uri_set.end());
    }

    std::vector<SharedPrivatePartition> partitions;
    for (const auto& [key, platforms] : groups) {
        SharedPrivatePartition part;
        part.app = key.first;
        part.behavior = key.second;
        if (platforms.size() < 2) {
            part.single_platform = true;
            std::cerr << "warning: behavior " << part.app << "/" << part.behavior
                      << " observed on a single platform; treating all URIs as shared\n";
            for (const auto& [platform, uris] : platforms) {
                part.shared.insert(uris.begin(), uris.end());
                part.private_uris[platform] = {};
            }
        } else {
            auto it = platforms.begin();
            part.shared = it->second;
            for (++it; it != platforms.end(); ++it) {
                std::set<std::string> next;
                std::set_intersection(part.shared.begin(), part.shared.end(),
                                      it->second.begin(), it->second.end(),
                                      std::inserter(next, next.begin()));
                part.shared = std::move(next);
            }
            for (const auto& [platform, uris] : platforms) {
                std::set<std::string>& priv = part.private_uris[platform];
                std::set_difference(uris.begin(), uris.end(), part.shared.begin(),
                                    part.shared.end(), std::inserter(priv, priv.begin()));
            }
        }
        partitions.push_back(std::move(part));
    }
    return partitions;
}

double dtw_similarity(const std::vector<double>& seq_a, const std::vector<double>& seq_b) {
    if (seq_a.empty() || seq_b.empty()) {
        throw std::runtime_error("dtw_similarity: empty series");
    }
    const std::size_t n = seq_a.size(), m = seq_b.size();
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, kInf), curr(m + 1, kInf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        curr[0] = kInf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double cost = std::fabs(seq_a[i - 1] - seq_b[j - 1]);
            curr[j] = cost + std::min({prev[j], curr[j - 1], prev[j - 1]});
        }
        std::swap(prev, curr);
    }
    const double d = prev[m];
    return 1.0 / (1.0 + d / static_cast<double>(std::max(n, m)));
}

std::vector<std::pair<std::size_t, std::size_t>> lcs_match(
    const std::vector<UriPrediction>& predicted, const std::vector<std::string>& canonical,
    double tau) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (predicted[i].confidence >= tau) eligible.push_back(i);
    }
    const std::size_t n = eligible.size(), m = canonical.size();
    if (n == 0 || m == 0) return {};

    // suffix lengths: len[i][j] = LCS of eligible[i..] vs canonical[j..]
    std::vector<std::vector<int>> len(n + 1, std::vector<int>(m + 1, 0));
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t j = m; j-- > 0;) {
            if (predicted[eligible[i]].uri == canonical[j]) {
                len[i][j] = 1 + len[i + 1][j + 1];
            } else {
                len[i][j] = std::max(len[i + 1][j], len[i][j + 1]);
            }
        }
    }

    // earliest-indices reconstruction: greedy match when it preserves the
    // optimum, otherwise advance the predicted side first
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::size_t i = 0, j = 0;
    while (i < n && j < m && len[i][j] > 0) {
        if (predicted[eligible[i]].uri == canonical[j] &&
            1 + len[i + 1][j + 1] == len[i][j]) {
            pairs.emplace_back(eligible[i], j);
            ++i;
            ++j;
        } else if (len[i + 1][j] == len[i][j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return pairs;
}

MatchResult score_map(const UriSequence& sequence, const CanonicalUriMap& cum,
                      double lambda, double tau) {
    if (lambda < 0.0) throw std::runtime_error("score_map: lambda must be >= 0");
    if (cum.branches.empty() || cum.uri_set.empty()) {
        throw std::runtime_error("score_map: empty canonical map");
    }
    MatchResult result;
    result.app = cum.app;
    result.platform = cum.platform;
    result.behavior = cum.behavior;

    const auto by_domain = sequence.per_domain();
    for (const auto& [domain, canonical] : cum.branches) {
        auto it = by_domain.find(domain);
        if (it == by_domain.end()) continue;
        const auto pairs = lcs_match(it->second, canonical, tau);
        for (const auto& [pi, ci] : pairs) {
            (void)ci;
            const UriPrediction& pred = it->second[pi];
            auto [entry, inserted] = result.matched.try_emplace(pred.uri, pred.confidence);
            if (!inserted) entry->second = std::max(entry->second, pred.confidence);
        }
    }

    // P: unique URIs appearing in both the prediction (any confidence, any
    // domain) and the map's URI set, weighted by max predicted confidence
    std::map<std::string, double> covered_conf;
    for (const auto& pred : sequence.predictions) {
        if (!cum.uri_set.count(pred.uri)) continue;
        auto [entry, inserted] = covered_conf.try_emplace(pred.uri, pred.confidence);
        if (!inserted) entry->second = std::max(entry->second, pred.confidence);
    }
    for (const auto& [uri, conf] : covered_conf) {
        (void)conf;
        result.covered.insert(uri);
    }

    double numerator = 0.0;
    for (const auto& [uri, conf] : result.matched) {
        (void)uri;
        if (conf >= tau) numerator += conf;
    }
    double denominator = 0.0;
    for (const auto& [uri, conf] : covered_conf) {
        (void)uri;
        denominator += conf;
    }
    denominator += lambda * static_cast<double>(cum.uri_set.size() - result.covered.size());

    result.score = denominator > 0.0 ? numerator / denominator : 0.0;
    result.score = std::clamp(result.score, 0.0, 1.0);
    return result;
}

void detect_unseen(std::vector<MatchResult>& results, double beta) {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw std::runtime_error("detect_unseen: beta must lie in (0, 1)");
    }
    for (auto& result : results) result.is_unseen = result.score <= beta;
}

MatchResult refine_unseen(const UriSequence& sequence, const CanonicalUriMap& cum,
                          const SharedPrivatePartition& partition, double lambda,
                          double tau) {
    CanonicalUriMap shared_cum;
    shared_cum.app = cum.app;
    shared_cum.platform = cum.platform;
    shared_cum.behavior = cum.behavior;
    for (const auto& [domain, canonical] : cum.branches) {
        std::vector<std::string> kept;
        for (const auto& uri : canonical) {
            if (partition.shared.count(uri)) kept.push_back(uri);
        }
        if (kept.empty()) continue;
        for (const auto& uri : kept) shared_cum.uri_set.insert(uri);
        shared_cum.branches[domain] = std::move(kept);
    }
    if (shared_cum.uri_set.empty()) {
        std::cerr << "warning: behavior " << cum.app << "/" << cum.behavior
                  << " has no shared URIs; unseen refinement skipped\n";
        MatchResult result = score_map(sequence, cum, lambda, tau);
        result.is_unseen = true;
        return result;
    }
    MatchResult result = score_map(sequence, shared_cum, lambda, tau);
    result.is_unseen = true;
    return result;
}

std::vector<FinalLabel> attribute_flows(const std::vector<SegmentClaim>& claims) {
    // owner per flow id: claim with the highest score, ties to the smaller
    // app name
    std::map<std::string, std::size_t> owner;
    for (std::size_t c = 0; c < claims.size(); ++c) {
        for (const Flow* flow : claims[c].flows) {
            auto it = owner.find(flow->flow_id);
            if (it == owner.end()) {
                owner[flow->flow_id] = c;
                continue;
            }
            const SegmentClaim& incumbent = claims[it->second];
            const SegmentClaim& challenger = claims[c];
            if (challenger.result.score > incumbent.result.score ||
                (challenger.result.score == incumbent.result.score &&
                 challenger.app < incumbent.app)) {
                it->second = c;
            }
        }
    }

    std::vector<FinalLabel> labels;
    for (std::size_t c = 0; c < claims.size(); ++c) {
        const SegmentClaim& claim = claims[c];
        FinalLabel label;
        label.app = claim.app;
        label.behavior = claim.result.behavior;
        label.score = claim.result.score;
        label.is_unseen = claim.result.is_unseen;
        std::vector<const Flow*> kept;
        for (const Flow* flow : claim.flows) {
            if (owner.at(flow->flow_id) == c) kept.push_back(flow);
        }
        if (!kept.empty()) {
            label.start_time = kept.front()->start_time();
            label.end_time = kept.front()->end_time();
            for (const Flow* flow : kept) {
                label.start_time = std::min(label.start_time, flow->start_time());
                label.end_time = std::max(label.end_time, flow->end_time());
                label.flow_ids.push_back(flow->flow_id);
            }
            labels.push_back(std::move(label));
        } else if (claim.result.is_unseen && !claim.flows.empty()) {
            // every flow claimed elsewhere: keep as a real unseen case
            label.start_time = claim.start_time;
            label.end_time = claim.end_time;
            labels.push_back(std::move(label));
        }
    }
    return labels;
}

double bag_match_baseline(const UriSequence& sequence, const CanonicalUriMap& cum) {
    if (cum.uri_set.empty()) {
        throw std::runtime_error("bag_match_baseline: empty canonical map");
    }
    std::set<std::string> predicted;
    for (const auto& pred : sequence.predictions) {
        if (cum.uri_set.count(pred.uri)) predicted.insert(pred.uri);
    }
    return static_cast<double>(predicted.size()) / static_cast<double>(cum.uri_set.size());
}

}  // namespace xprint
