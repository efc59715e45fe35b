#include "xprint/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "xprint/rng.hpp"

namespace xprint {

namespace {

constexpr double kAppBaseSize = 400.0;
constexpr double kAppBaseStep = 6000.0;
constexpr double kUriSizeStep = 60.0;
constexpr double kSizeSd = 10.0;

const std::vector<std::vector<std::pair<Direction, int>>>& pattern_pool() {
    static const std::vector<std::vector<std::pair<Direction, int>>> pool = {
        {{Direction::Outbound, 1}, {Direction::Inbound, 3}},
        {{Direction::Outbound, 2}, {Direction::Inbound, 2}},
        {{Direction::Outbound, 1}, {Direction::Inbound, 1}},
        {{Direction::Outbound, 3}, {Direction::Inbound, 1}},
        {{Direction::Outbound, 1}, {Direction::Inbound, 5}},
    };
    return pool;
}

std::string app_name(int app_index) { return "app" + std::to_string(app_index); }

std::string domain_name(int app_index, int domain_index) {
    return "api" + std::to_string(domain_index) + ".app" + std::to_string(app_index) +
           ".example";
}

/// Signature for the app's next size slot; slots within one app are spaced
/// kUriSizeStep apart, six pooled standard deviations, so the documented
/// two-pooled-stddev separation holds with margin.
UriSignature make_signature(const std::string& uri, const std::string& domain,
                            int app_index, int slot, double intra_gap_mean,
                            bool shared) {
    UriSignature sig;
    sig.uri = uri;
    sig.domain = domain;
    sig.pkt_min = 4 + slot % 3;
    sig.pkt_max = 9 + slot % 4;
    sig.out_size_mean = kAppBaseSize + app_index * kAppBaseStep + slot * kUriSizeStep;
    sig.out_size_sd = kSizeSd;
    sig.in_size_mean = sig.out_size_mean + 24.0;
    sig.in_size_sd = kSizeSd;
    sig.direction_pattern = pattern_pool()[slot % pattern_pool().size()];
    sig.intra_gap_mean = intra_gap_mean;
    sig.shared = shared;
    return sig;
}

std::vector<std::pair<std::vector<std::string>, double>> derive_variants(
    const std::vector<std::string>& canonical, const std::vector<double>& probs,
    double& canonical_prob) {
    std::vector<std::pair<std::vector<std::string>, double>> variants;
    if (canonical.size() >= 2) {
        std::vector<std::vector<std::string>> candidates;
        auto drop = [&](std::size_t at) {
            std::vector<std::string> v = canonical;
            v.erase(v.begin() + static_cast<std::ptrdiff_t>(at));
            return v;
        };
        candidates.push_back(drop(canonical.size() / 2));
        candidates.push_back(drop(canonical.size() - 1));
        {
            std::vector<std::string> v = canonical;
            std::swap(v[0], v[1]);
            candidates.push_back(v);
        }
        std::set<std::vector<std::string>> seen{canonical};
        for (std::size_t i = 0; i < candidates.size() && variants.size() < probs.size();
             ++i) {
            if (seen.insert(candidates[i]).second) {
                variants.emplace_back(candidates[i], probs[variants.size()]);
            }
        }
    }
    double used = 0.0;
    for (const auto& [seq, p] : variants) used += p;
    canonical_prob = 1.0 - used;  // leftover probability stays canonical
    return variants;
}

/// Round-robin split of a behavior's URIs over the app's domains, giving
/// every branch its canonical order.
std::vector<DomainBranch> build_branches(const std::vector<std::string>& order,
                                         const std::map<std::string, std::string>& domain_of,
                                         int app_index, int n_domains,
                                         const std::vector<double>& variant_probs) {
    std::vector<DomainBranch> branches(n_domains);
    for (int d = 0; d < n_domains; ++d) branches[d].domain = domain_name(app_index, d);
    for (const auto& uri : order) {
        const auto& dom = domain_of.at(uri);
        for (auto& b : branches) {
            if (b.domain == dom) {
                b.canonical.push_back(uri);
                break;
            }
        }
    }
    std::vector<DomainBranch> filled;
    for (auto& b : branches) {
        if (b.canonical.empty()) continue;
        b.variants = derive_variants(b.canonical, variant_probs, b.canonical_prob);
        filled.push_back(std::move(b));
    }
    return filled;
}

double pooled_sd(double a, double b) { return std::sqrt(0.5 * (a * a + b * b)); }

bool signatures_distinguishable(const UriSignature& a, const UriSignature& b) {
    if (a.direction_pattern != b.direction_pattern) return true;
    if (a.pkt_max < b.pkt_min || b.pkt_max < a.pkt_min) return true;  // disjoint counts
    const double sep_out =
        std::fabs(a.out_size_mean - b.out_size_mean) / pooled_sd(a.out_size_sd, b.out_size_sd);
    const double sep_in =
        std::fabs(a.in_size_mean - b.in_size_mean) / pooled_sd(a.in_size_sd, b.in_size_sd);
    return sep_out >= 2.0 || sep_in >= 2.0;
}

}  // namespace

nlohmann::ordered_json UriSignature::to_json() const {
    nlohmann::ordered_json j;
    j["uri"] = uri;
    j["domain"] = domain;
    j["packet_count_range"] = {pkt_min, pkt_max};
    j["out_size"] = {out_size_mean, out_size_sd};
    j["in_size"] = {in_size_mean, in_size_sd};
    nlohmann::ordered_json pat = nlohmann::ordered_json::array();
    for (const auto& [dir, len] : direction_pattern) {
        pat.push_back({dir == Direction::Outbound ? "+1" : "-1", len});
    }
    j["direction_pattern"] = std::move(pat);
    j["intra_gap_mean"] = intra_gap_mean;
    j["shared"] = shared;
    return j;
}

nlohmann::ordered_json DomainBranch::to_json() const {
    nlohmann::ordered_json j;
    j["domain"] = domain;
    j["canonical"] = canonical;
    j["canonical_prob"] = canonical_prob;
    nlohmann::ordered_json vs = nlohmann::ordered_json::array();
    for (const auto& [seq, p] : variants) vs.push_back({{"sequence", seq}, {"prob", p}});
    j["variants"] = std::move(vs);
    return j;
}

const UriSignature& BehaviorSpec::signature_of(const std::string& uri) const {
    for (const auto& sig : signatures) {
        if (sig.uri == uri) return sig;
    }
    throw std::runtime_error("BehaviorSpec: no signature for uri " + uri);
}

void BehaviorSpec::validate() const {
    if (app.empty() || platform.empty() || behavior.empty()) {
        throw std::runtime_error("BehaviorSpec: missing identity labels");
    }
    if (branches.empty()) throw std::runtime_error("BehaviorSpec: no branches");
    for (const auto& sig : signatures) {
        if (sig.pkt_min < 1 || sig.pkt_max < sig.pkt_min) {
            throw std::runtime_error("BehaviorSpec: bad packet count range for " + sig.uri);
        }
        if (!(sig.intra_gap_mean > 0.0 && sig.intra_gap_mean < 0.1)) {
            throw std::runtime_error("BehaviorSpec: intra_gap_mean out of (0, 0.1) for " +
                                     sig.uri);
        }
        if (sig.direction_pattern.empty()) {
            throw std::runtime_error("BehaviorSpec: empty direction pattern for " + sig.uri);
        }
        for (const auto& [dir, len] : sig.direction_pattern) {
            (void)dir;
            if (len < 1) throw std::runtime_error("BehaviorSpec: bad pattern run length");
        }
    }
    for (std::size_t i = 0; i < signatures.size(); ++i) {
        for (std::size_t j = i + 1; j < signatures.size(); ++j) {
            if (signatures[i].uri == signatures[j].uri) {
                throw std::runtime_error("BehaviorSpec: duplicate signature " +
                                         signatures[i].uri);
            }
            if (!signatures_distinguishable(signatures[i], signatures[j])) {
                throw std::runtime_error("BehaviorSpec: indistinguishable signatures " +
                                         signatures[i].uri + " and " + signatures[j].uri);
            }
        }
    }
    for (const auto& branch : branches) {
        if (branch.canonical.empty()) {
            throw std::runtime_error("BehaviorSpec: empty canonical sequence for " +
                                     branch.domain);
        }
        double total = branch.canonical_prob;
        for (const auto& [seq, p] : branch.variants) {
            if (seq.empty()) throw std::runtime_error("BehaviorSpec: empty variant");
            if (p > branch.canonical_prob + 1e-9) {
                throw std::runtime_error("BehaviorSpec: canonical probability not maximal");
            }
            total += p;
        }
        if (std::fabs(total - 1.0) > 1e-9) {
            throw std::runtime_error("BehaviorSpec: sequence probabilities must sum to 1");
        }
        auto check_seq = [&](const std::vector<std::string>& seq) {
            for (const auto& uri : seq) {
                const UriSignature& sig = signature_of(uri);
                if (sig.domain != branch.domain) {
                    throw std::runtime_error("BehaviorSpec: uri " + uri +
                                             " listed under wrong domain branch");
                }
            }
        };
        check_seq(branch.canonical);
        for (const auto& [seq, p] : branch.variants) {
            (void)p;
            check_seq(seq);
        }
    }
}

nlohmann::ordered_json BehaviorSpec::to_json() const {
    nlohmann::ordered_json j;
    j["app"] = app;
    j["platform"] = platform;
    j["behavior"] = behavior;
    nlohmann::ordered_json sigs = nlohmann::ordered_json::array();
    for (const auto& s : signatures) sigs.push_back(s.to_json());
    j["signatures"] = std::move(sigs);
    nlohmann::ordered_json brs = nlohmann::ordered_json::array();
    for (const auto& b : branches) brs.push_back(b.to_json());
    j["branches"] = std::move(brs);
    return j;
}

void ScenarioConfig::validate() const {
    if (n_apps < 1) throw std::runtime_error("ScenarioConfig: n_apps must be >= 1");
    if (platforms.empty()) throw std::runtime_error("ScenarioConfig: no platforms");
    if (behaviors_per_app < 1 || uris_per_behavior < 1 || domains_per_app < 1) {
        throw std::runtime_error("ScenarioConfig: counts must be >= 1");
    }
    if (uris_per_behavior < domains_per_app) {
        throw std::runtime_error(
            "ScenarioConfig: uris_per_behavior must cover every domain branch");
    }
    if (!(shared_fraction >= 0.0 && shared_fraction <= 1.0)) {
        throw std::runtime_error("ScenarioConfig: shared_fraction outside [0, 1]");
    }
    double total = canonical_prob;
    for (double p : variant_probs) {
        if (p < 0.0) throw std::runtime_error("ScenarioConfig: negative variant prob");
        if (p > canonical_prob + 1e-9) {
            throw std::runtime_error("ScenarioConfig: canonical_prob must be the maximum");
        }
        total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9) {
        throw std::runtime_error("ScenarioConfig: sequence probabilities must sum to 1");
    }
    if (!(intra_gap_mean_lo > 0.0 && intra_gap_mean_hi < 0.1 &&
          intra_gap_mean_lo <= intra_gap_mean_hi)) {
        throw std::runtime_error("ScenarioConfig: intra gap means must sit inside (0, 0.1)");
    }
    if (instances_train < 1 || instances_test < 1) {
        throw std::runtime_error("ScenarioConfig: instance counts must be >= 1");
    }
    if (!(merge_prob >= 0.0 && merge_prob <= 1.0)) {
        throw std::runtime_error("ScenarioConfig: merge_prob outside [0, 1]");
    }
}

nlohmann::ordered_json ScenarioConfig::to_json() const {
    nlohmann::ordered_json j;
    j["n_apps"] = n_apps;
    j["platforms"] = platforms;
    j["behaviors_per_app"] = behaviors_per_app;
    j["uris_per_behavior"] = uris_per_behavior;
    j["shared_fraction"] = shared_fraction;
    j["domains_per_app"] = domains_per_app;
    j["canonical_prob"] = canonical_prob;
    j["variant_probs"] = variant_probs;
    j["intra_gap_mean_lo"] = intra_gap_mean_lo;
    j["intra_gap_mean_hi"] = intra_gap_mean_hi;
    j["inter_gap_lo"] = timing.inter_gap_lo;
    j["inter_gap_hi"] = timing.inter_gap_hi;
    j["branch_start_jitter"] = timing.branch_start_jitter;
    j["heartbeat_period"] = background.heartbeat_period;
    j["prefetch_rate"] = background.prefetch_rate;
    j["executions_per_session"] = executions_per_session;
    j["session_start_lo"] = session_start_lo;
    j["session_start_hi"] = session_start_hi;
    j["think_gap_lo"] = think_gap_lo;
    j["think_gap_hi"] = think_gap_hi;
    j["instances_train"] = instances_train;
    j["instances_test"] = instances_test;
    j["merge_prob"] = merge_prob;
    j["rng_seed"] = rng_seed;
    return j;
}

ScenarioConfig ScenarioConfig::from_json(const nlohmann::ordered_json& j) {
    ScenarioConfig c;
    if (!j.contains("rng_seed")) {
        throw std::runtime_error("ScenarioConfig: rng_seed is mandatory");
    }
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    auto opt = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    opt("n_apps", c.n_apps);
    opt("platforms", c.platforms);
    opt("behaviors_per_app", c.behaviors_per_app);
    opt("uris_per_behavior", c.uris_per_behavior);
    opt("shared_fraction", c.shared_fraction);
    opt("domains_per_app", c.domains_per_app);
    opt("canonical_prob", c.canonical_prob);
    opt("variant_probs", c.variant_probs);
    opt("intra_gap_mean_lo", c.intra_gap_mean_lo);
    opt("intra_gap_mean_hi", c.intra_gap_mean_hi);
    opt("inter_gap_lo", c.timing.inter_gap_lo);
    opt("inter_gap_hi", c.timing.inter_gap_hi);
    opt("branch_start_jitter", c.timing.branch_start_jitter);
    opt("heartbeat_period", c.background.heartbeat_period);
    opt("prefetch_rate", c.background.prefetch_rate);
    opt("executions_per_session", c.executions_per_session);
    opt("session_start_lo", c.session_start_lo);
    opt("session_start_hi", c.session_start_hi);
    opt("think_gap_lo", c.think_gap_lo);
    opt("think_gap_hi", c.think_gap_hi);
    opt("instances_train", c.instances_train);
    opt("instances_test", c.instances_test);
    opt("merge_prob", c.merge_prob);
    c.validate();
    return c;
}

std::vector<BehaviorSpec> make_cross_platform_family(const ScenarioConfig& config,
                                                     int app_index) {
    config.validate();
    Rng rng(Rng::derive(config.rng_seed, 1000 + static_cast<std::uint64_t>(app_index)));
    const int n = config.uris_per_behavior;
    const int shared_count = static_cast<int>(std::llround(config.shared_fraction * n));
    const int private_count = n - shared_count;
    int slot = 0;

    auto next_gap = [&]() {
        return rng.uniform(config.intra_gap_mean_lo, config.intra_gap_mean_hi);
    };

    std::vector<BehaviorSpec> specs;
    for (int b = 0; b < config.behaviors_per_app; ++b) {
        const std::string b_tag = "b" + std::to_string(b);
        std::vector<UriSignature> shared_sigs;
        for (int s = 0; s < shared_count; ++s) {
            const std::string uri = "/" + app_name(app_index) + "/" + b_tag + "/s" +
                                    std::to_string(s);
            const std::string dom = domain_name(app_index, s % config.domains_per_app);
            shared_sigs.push_back(
                make_signature(uri, dom, app_index, slot++, next_gap(), true));
        }
        for (const auto& platform : config.platforms) {
            BehaviorSpec spec;
            spec.app = app_name(app_index);
            spec.platform = platform;
            spec.behavior = "behavior" + std::to_string(b);
            spec.timing = config.timing;
            spec.signatures = shared_sigs;
            std::vector<UriSignature> private_sigs;
            for (int p = 0; p < private_count; ++p) {
                const std::string uri = "/" + app_name(app_index) + "/" + b_tag + "/" +
                                        platform + "/p" + std::to_string(p);
                const std::string dom =
                    domain_name(app_index, (shared_count + p) % config.domains_per_app);
                private_sigs.push_back(
                    make_signature(uri, dom, app_index, slot++, next_gap(), false));
            }
            spec.signatures.insert(spec.signatures.end(), private_sigs.begin(),
                                   private_sigs.end());

            // canonical order: shared and private URIs interleaved
            std::vector<std::string> order;
            std::size_t si = 0, pi = 0;
            while (si < shared_sigs.size() || pi < private_sigs.size()) {
                if (si < shared_sigs.size()) order.push_back(shared_sigs[si++].uri);
                if (pi < private_sigs.size()) order.push_back(private_sigs[pi++].uri);
            }
            std::map<std::string, std::string> domain_of;
            for (const auto& sig : spec.signatures) domain_of[sig.uri] = sig.domain;
            spec.branches = build_branches(order, domain_of, app_index,
                                           config.domains_per_app, config.variant_probs);
            spec.validate();
            specs.push_back(std::move(spec));
        }
    }
    return specs;
}

std::vector<BehaviorSpec> build_scenario(const ScenarioConfig& config) {
    std::vector<BehaviorSpec> all;
    for (int a = 0; a < config.n_apps; ++a) {
        auto family = make_cross_platform_family(config, a);
        all.insert(all.end(), family.begin(), family.end());
    }
    return all;
}

std::vector<BehaviorSpec> make_shared_core_behaviors(const ScenarioConfig& config,
                                                     int app_index, int n_behaviors,
                                                     int core_uris, int extra_uris) {
    config.validate();
    if (n_behaviors < 2 || core_uris < 2) {
        throw std::runtime_error("make_shared_core_behaviors: need >= 2 behaviors and core URIs");
    }
    Rng rng(Rng::derive(config.rng_seed, 5000 + static_cast<std::uint64_t>(app_index)));
    int slot = 0;
    auto next_gap = [&]() {
        return rng.uniform(config.intra_gap_mean_lo, config.intra_gap_mean_hi);
    };

    std::vector<UriSignature> core;
    for (int s = 0; s < core_uris; ++s) {
        const std::string uri = "/" + app_name(app_index) + "/core/u" + std::to_string(s);
        const std::string dom = domain_name(app_index, s % config.domains_per_app);
        core.push_back(make_signature(uri, dom, app_index, slot++, next_gap(), true));
    }

    std::vector<BehaviorSpec> specs;
    for (int b = 0; b < n_behaviors; ++b) {
        BehaviorSpec spec;
        spec.app = app_name(app_index);
        spec.platform = config.platforms.front();
        spec.behavior = "behavior" + std::to_string(b);
        spec.timing = config.timing;
        spec.signatures = core;
        std::vector<UriSignature> extras;
        for (int e = 0; e < extra_uris; ++e) {
            const std::string uri = "/" + app_name(app_index) + "/b" + std::to_string(b) +
                                    "/x" + std::to_string(e);
            const std::string dom =
                domain_name(app_index, (core_uris + e) % config.domains_per_app);
            extras.push_back(make_signature(uri, dom, app_index, slot++, next_gap(), false));
        }
        spec.signatures.insert(spec.signatures.end(), extras.begin(), extras.end());

        // Behaviors share the URI set but differ in invocation order.  Only
        // the order WITHIN a domain is observable (each domain is its own
        // flow), so behavior b applies the b-th lexicographic permutation
        // inside every domain group; orders repeat once b exceeds the
        // factorial of the largest group.
        std::vector<std::vector<std::string>> groups(config.domains_per_app);
        for (int s = 0; s < core_uris; ++s) {
            groups[s % config.domains_per_app].push_back(core[s].uri);
        }
        for (auto& group : groups) {
            std::vector<std::size_t> idx(group.size());
            std::iota(idx.begin(), idx.end(), 0);
            for (int step = 0; step < b; ++step) {
                std::next_permutation(idx.begin(), idx.end());
            }
            std::vector<std::string> permuted;
            for (std::size_t i : idx) permuted.push_back(group[i]);
            group = std::move(permuted);
        }
        std::vector<std::string> order;
        for (std::size_t round = 0; order.size() < core.size(); ++round) {
            for (const auto& group : groups) {
                if (round < group.size()) order.push_back(group[round]);
            }
        }
        for (std::size_t e = 0; e < extras.size(); ++e) {
            const std::size_t at = std::min(order.size(), (e + 1) * 2 + b);
            order.insert(order.begin() + static_cast<std::ptrdiff_t>(at), extras[e].uri);
        }
        std::map<std::string, std::string> domain_of;
        for (const auto& sig : spec.signatures) domain_of[sig.uri] = sig.domain;
        spec.branches = build_branches(order, domain_of, app_index, config.domains_per_app,
                                       config.variant_probs);
        spec.validate();
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<BehaviorSpec> make_replaced_private_platform(
    const std::vector<BehaviorSpec>& family, const std::string& new_platform,
    std::uint64_t seed) {
    if (family.empty()) {
        throw std::runtime_error("make_replaced_private_platform: empty family");
    }
    Rng rng(seed);
    const std::string base_platform = family.front().platform;
    std::vector<const BehaviorSpec*> skeletons;
    for (const auto& spec : family) {
        if (spec.platform == base_platform) skeletons.push_back(&spec);
    }

    auto branch_privates = [](const BehaviorSpec& spec,
                              const std::string& domain) -> std::vector<std::string> {
        std::vector<std::string> uris;
        for (const auto& branch : spec.branches) {
            if (branch.domain != domain) continue;
            for (const auto& uri : branch.canonical) {
                if (!spec.signature_of(uri).shared) uris.push_back(uri);
            }
        }
        return uris;
    };

    std::vector<BehaviorSpec> out;
    for (std::size_t b = 0; b < skeletons.size(); ++b) {
        const BehaviorSpec& spec = *skeletons[b];
        const BehaviorSpec& donor = *skeletons[(b + 1) % skeletons.size()];
        // odd behaviors copy the next behavior's private signatures in its
        // canonical order (confident, order-consistent mispredictions); even
        // behaviors move privates off the size grid (low-confidence noise)
        const bool donor_aligned = skeletons.size() > 1 && b % 2 == 1;

        BehaviorSpec repl = spec;
        repl.platform = new_platform;
        std::map<std::string, std::string> rename;
        std::map<std::string, UriSignature> new_sigs;  // new uri -> signature
        int fresh = 0;
        for (const auto& branch : spec.branches) {
            const std::vector<std::string> old_privates = branch_privates(spec, branch.domain);
            const std::vector<std::string> donor_privates =
                branch_privates(donor, branch.domain);
            for (std::size_t k = 0; k < old_privates.size(); ++k) {
                const std::string new_uri = "/" + spec.app + "/" + spec.behavior + "/" +
                                            new_platform + "/n" + std::to_string(fresh++);
                UriSignature sig;
                if (donor_aligned && !donor_privates.empty()) {
                    sig = donor.signature_of(donor_privates[k % donor_privates.size()]);
                    sig.out_size_mean += rng.uniform(-2.0, 2.0);
                    sig.in_size_mean += rng.uniform(-2.0, 2.0);
                } else {
                    sig = spec.signature_of(old_privates[k]);
                    sig.out_size_mean += 30.0;  // halfway between size slots
                    sig.in_size_mean += 30.0;
                }
                sig.uri = new_uri;
                sig.domain = branch.domain;
                sig.shared = false;
                rename[old_privates[k]] = new_uri;
                new_sigs.emplace(new_uri, std::move(sig));
            }
        }

        std::vector<UriSignature> replaced;
        for (const auto& sig : repl.signatures) {
            if (sig.shared) {
                replaced.push_back(sig);
            } else if (auto it = rename.find(sig.uri); it != rename.end()) {
                replaced.push_back(new_sigs.at(it->second));
            }
        }
        repl.signatures = std::move(replaced);
        for (auto& branch : repl.branches) {
            auto apply = [&](std::vector<std::string>& seq) {
                for (auto& uri : seq) {
                    auto it = rename.find(uri);
                    if (it != rename.end()) uri = it->second;
                }
            };
            apply(branch.canonical);
            for (auto& [seq, p] : branch.variants) {
                (void)p;
                apply(seq);
            }
        }
        repl.validate();
        out.push_back(std::move(repl));
    }
    return out;
}

TrafficTrace generate_instance(const BehaviorSpec& spec, std::uint64_t rng_seed,
                               double start_time, const std::string& trace_id) {
    spec.validate();
    Rng rng(rng_seed);
    TrafficTrace trace;
    trace.trace_id = trace_id;

    for (const auto& branch : spec.branches) {
        // pick the invocation order for this execution
        const std::vector<std::string>* seq = &branch.canonical;
        double u = rng.uniform();
        if (u >= branch.canonical_prob) {
            u -= branch.canonical_prob;
            for (const auto& [vseq, p] : branch.variants) {
                if (u < p) {
                    seq = &vseq;
                    break;
                }
                u -= p;
            }
        }

        Flow flow;
        flow.flow_id = trace_id + "/" + branch.domain;
        flow.domain = branch.domain;
        flow.app_label = spec.app;
        flow.platform_label = spec.platform;
        flow.behavior_label = spec.behavior;

        double t = start_time + rng.uniform(0.0, spec.timing.branch_start_jitter);
        for (const auto& uri : *seq) {
            const UriSignature& sig = spec.signature_of(uri);
            const auto n_pkts = static_cast<int>(rng.between(sig.pkt_min, sig.pkt_max));
            int emitted = 0;
            std::size_t run = 0;
            while (emitted < n_pkts) {
                const auto& [dir, len] = sig.direction_pattern[run % sig.direction_pattern.size()];
                for (int k = 0; k < len && emitted < n_pkts; ++k, ++emitted) {
                    const double mean =
                        dir == Direction::Outbound ? sig.out_size_mean : sig.in_size_mean;
                    const double sd =
                        dir == Direction::Outbound ? sig.out_size_sd : sig.in_size_sd;
                    Packet p;
                    p.timestamp = quantize_us(t);
                    p.dir = dir;
                    p.size = static_cast<std::uint32_t>(
                        std::max<std::int64_t>(1, std::llround(rng.normal(mean, sd))));
                    p.uri_label = uri;
                    flow.packets.push_back(std::move(p));
                    if (emitted + 1 < n_pkts) {
                        t += sig.intra_gap_mean * rng.uniform(spec.timing.intra_gap_factor_lo,
                                                              spec.timing.intra_gap_factor_hi);
                    }
                }
                ++run;
            }
            t = flow.packets.back().timestamp +
                rng.uniform(spec.timing.inter_gap_lo, spec.timing.inter_gap_hi);
        }
        trace.flows.push_back(std::move(flow));
    }

    double t_min = 0.0, t_max = 0.0;
    bool first = true;
    for (const auto& flow : trace.flows) {
        for (const auto& p : flow.packets) {
            if (first || p.timestamp < t_min) t_min = p.timestamp;
            if (first || p.timestamp > t_max) t_max = p.timestamp;
            first = false;
        }
    }
    trace.ground_truth_windows.push_back(GroundTruthWindow{
        t_min, std::max(t_max, quantize_us(t_min + 1e-6)), spec.app, spec.behavior});
    validate_trace(trace);
    return trace;
}

TrafficTrace generate_background(const ScenarioConfig& config, double duration,
                                 std::uint64_t rng_seed, const std::string& trace_id) {
    TrafficTrace trace;
    trace.trace_id = trace_id;
    if (duration <= 0.0) return trace;
    Rng rng(rng_seed);
    const BackgroundParams& bg = config.background;

    auto emit_flow = [&](const std::string& id, const std::string& domain, double t0,
                         int n_pkts, double size_scale, const std::string& uri) {
        Flow flow;
        flow.flow_id = id;
        flow.domain = domain;
        flow.app_label = "background";
        double t = t0;
        for (int k = 0; k < n_pkts; ++k) {
            Packet p;
            p.timestamp = quantize_us(t);
            p.dir = k % 2 == 0 ? Direction::Outbound : Direction::Inbound;
            p.size = static_cast<std::uint32_t>(std::max<std::int64_t>(
                1, std::llround(rng.normal(bg.size_mean * size_scale, bg.size_sd))));
            p.uri_label = uri;
            flow.packets.push_back(std::move(p));
            t += rng.uniform(0.01, 0.04);
        }
        trace.flows.push_back(std::move(flow));
    };

    int hb = 0;
    for (double base = 0.0; base < duration; base += bg.heartbeat_period, ++hb) {
        const double jitter = rng.uniform(0.0, 0.4 * bg.heartbeat_period);
        emit_flow(trace_id + "/hb" + std::to_string(hb), "push.bg.example", base + jitter,
                  static_cast<int>(rng.between(bg.pkt_min, bg.pkt_max)), 1.0,
                  "/bg/heartbeat");
    }

    const int prefetches = rng.poisson(bg.prefetch_rate * duration);
    std::vector<double> times;
    times.reserve(prefetches);
    for (int i = 0; i < prefetches; ++i) times.push_back(rng.uniform(0.0, duration));
    std::sort(times.begin(), times.end());
    for (int i = 0; i < prefetches; ++i) {
        emit_flow(trace_id + "/pf" + std::to_string(i), "ads.bg.example", times[i],
                  static_cast<int>(rng.between(bg.pkt_min + 1, bg.pkt_max + 2)), 1.5,
                  "/bg/prefetch");
    }

    std::stable_sort(trace.flows.begin(), trace.flows.end(),
                     [](const Flow& a, const Flow& b) {
                         return a.start_time() < b.start_time();
                     });
    validate_trace(trace);
    return trace;
}

TrafficTrace compose_session(const std::vector<const BehaviorSpec*>& executions,
                             const ScenarioConfig& config, std::uint64_t rng_seed,
                             const std::string& trace_id) {
    Rng rng(rng_seed);
    std::vector<TrafficTrace> parts;
    double t = rng.uniform(config.session_start_lo, config.session_start_hi);
    for (std::size_t i = 0; i < executions.size(); ++i) {
        TrafficTrace inst =
            generate_instance(*executions[i], Rng::derive(rng_seed, 100 + i), t,
                              trace_id + "/e" + std::to_string(i));
        double end = t;
        for (const auto& flow : inst.flows) end = std::max(end, flow.end_time());
        t = end + rng.uniform(config.think_gap_lo, config.think_gap_hi);
        parts.push_back(std::move(inst));
    }
    const double span = t + rng.uniform(5.0, 15.0);
    parts.push_back(generate_background(config, span, Rng::derive(rng_seed, 1),
                                        trace_id + "/bg"));
    TrafficTrace session = overlay_traces(parts, trace_id);
    validate_trace(session);
    return session;
}

nlohmann::ordered_json scenario_manifest(const ScenarioConfig& config,
                                         const std::vector<BehaviorSpec>& specs) {
    nlohmann::ordered_json j;
    j["config"] = config.to_json();
    j["notes"]["gap_model"] =
        "intra-invocation gaps are uniform [0.6,1.4] x per-URI mean with means below "
        "0.1 s; inter-invocation gaps are uniform [1.0,2.0] s; both brackets are "
        "modeling choices, chosen so a 0.5 s burst threshold recovers invocation "
        "boundaries exactly";
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& spec : specs) arr.push_back(spec.to_json());
    j["specs"] = std::move(arr);
    return j;
}

}  // namespace xprint
