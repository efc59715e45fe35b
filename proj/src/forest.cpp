#include "xprint/forest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "xprint/parallel.hpp"
#include "xprint/rng.hpp"

namespace xprint {

namespace {

struct TrainContext {
    const std::vector<std::vector<double>>* rows;
    const std::vector<int>* y;
    int n_classes;
    int dim;
    ForestHyper hyper;
};

double gini(const std::vector<double>& counts, double total) {
    if (total <= 0.0) return 0.0;
    double g = 1.0;
    for (double c : counts) {
        const double p = c / total;
        g -= p * p;
    }
    return g;
}

struct SplitChoice {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
};

/// Distinct random feature slots, returned sorted so ties between equal
/// gains resolve to the lowest slot regardless of draw order.
std::vector<int> sample_features(int dim, int k, Rng& rng) {
    std::set<int> picked;
    while (static_cast<int>(picked.size()) < k) {
        picked.insert(static_cast<int>(rng.below(static_cast<std::uint64_t>(dim))));
    }
    return {picked.begin(), picked.end()};
}

int build_node(const TrainContext& ctx, std::vector<int>& indices, int begin, int end,
               int depth, Rng& rng, std::vector<TreeNode>& nodes) {
    const auto& rows = *ctx.rows;
    const auto& y = *ctx.y;
    const int n = end - begin;

    std::vector<double> counts(ctx.n_classes, 0.0);
    for (int i = begin; i < end; ++i) counts[y[indices[i]]] += 1.0;

    auto make_leaf = [&]() {
        TreeNode leaf;
        leaf.probs.resize(ctx.n_classes);
        for (int c = 0; c < ctx.n_classes; ++c) {
            leaf.probs[c] = counts[c] / static_cast<double>(n);
        }
        nodes.push_back(std::move(leaf));
        return static_cast<int>(nodes.size() - 1);
    };

    const double parent_gini = gini(counts, static_cast<double>(n));
    if (depth >= ctx.hyper.max_depth || n < 2 * ctx.hyper.min_leaf || parent_gini == 0.0) {
        return make_leaf();
    }

    const int k = ctx.hyper.feature_subsample > 0
                      ? std::min(ctx.hyper.feature_subsample, ctx.dim)
                      : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(ctx.dim))));
    const std::vector<int> features = sample_features(ctx.dim, k, rng);

    SplitChoice best;
    std::vector<std::pair<double, int>> vals(n);
    std::vector<double> left_counts(ctx.n_classes);
    for (int feature : features) {
        for (int i = 0; i < n; ++i) {
            const int idx = indices[begin + i];
            vals[i] = {rows[idx][feature], y[idx]};
        }
        std::sort(vals.begin(), vals.end());
        if (vals.front().first == vals.back().first) continue;

        std::fill(left_counts.begin(), left_counts.end(), 0.0);
        for (int i = 0; i < n - 1; ++i) {
            left_counts[vals[i].second] += 1.0;
            if (vals[i].first == vals[i + 1].first) continue;
            const int nl = i + 1;
            const int nr = n - nl;
            if (nl < ctx.hyper.min_leaf || nr < ctx.hyper.min_leaf) continue;
            double gl = 1.0, gr = 1.0;
            for (int c = 0; c < ctx.n_classes; ++c) {
                const double pl = left_counts[c] / nl;
                const double pr = (counts[c] - left_counts[c]) / nr;
                gl -= pl * pl;
                gr -= pr * pr;
            }
            const double gain = parent_gini - (nl * gl + nr * gr) / n;
            if (gain > best.gain + 1e-12) {
                best.gain = gain;
                best.feature = feature;
                best.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
            }
        }
    }

    if (best.feature < 0) return make_leaf();

    const auto mid = std::partition(indices.begin() + begin, indices.begin() + end,
                                    [&](int idx) {
                                        return rows[idx][best.feature] < best.threshold;
                                    });
    const int split = static_cast<int>(mid - indices.begin());
    if (split == begin || split == end) return make_leaf();

    const int self = static_cast<int>(nodes.size());
    nodes.emplace_back();
    nodes[self].feature = best.feature;
    nodes[self].threshold = best.threshold;
    const int left = build_node(ctx, indices, begin, split, depth + 1, rng, nodes);
    const int right = build_node(ctx, indices, split, end, depth + 1, rng, nodes);
    nodes[self].left = left;
    nodes[self].right = right;
    return self;
}

DecisionTree build_tree(const TrainContext& ctx, std::uint64_t tree_seed) {
    Rng rng(tree_seed);
    const auto& y = *ctx.y;
    const auto n = static_cast<int>(y.size());

    std::vector<int> sample;
    if (ctx.hyper.balanced_bootstrap) {
        std::vector<std::vector<int>> by_class(ctx.n_classes);
        for (int i = 0; i < n; ++i) by_class[y[i]].push_back(i);
        const int per_class = std::max(1, (n + ctx.n_classes - 1) / ctx.n_classes);
        for (int c = 0; c < ctx.n_classes; ++c) {
            if (by_class[c].empty()) continue;
            for (int k = 0; k < per_class; ++k) {
                sample.push_back(by_class[c][rng.below(by_class[c].size())]);
            }
        }
    } else {
        sample.reserve(n);
        for (int i = 0; i < n; ++i) {
            sample.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
        }
    }

    DecisionTree tree;
    build_node(ctx, sample, 0, static_cast<int>(sample.size()), 0, rng, tree.nodes);
    return tree;
}

}  // namespace

TreeEnsembleModel TreeEnsembleModel::train(const std::vector<std::vector<double>>& rows,
                                           const std::vector<std::string>& labels,
                                           const ForestHyper& hyper, std::uint64_t seed) {
    if (rows.empty()) throw std::invalid_argument("TreeEnsembleModel::train: no rows");
    if (rows.size() != labels.size()) {
        throw std::invalid_argument("TreeEnsembleModel::train: rows/labels size mismatch");
    }
    if (hyper.n_trees < 1 || hyper.max_depth < 1 || hyper.min_leaf < 1) {
        throw std::invalid_argument("TreeEnsembleModel::train: bad hyperparameters");
    }

    TreeEnsembleModel model;
    model.hyper_ = hyper;
    model.seed_ = seed;
    model.dim_ = static_cast<int>(rows[0].size());
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != model.dim_) {
            throw std::invalid_argument("TreeEnsembleModel::train: ragged rows");
        }
    }

    std::set<std::string> class_set(labels.begin(), labels.end());
    model.classes_.assign(class_set.begin(), class_set.end());
    std::map<std::string, int> class_index;
    for (std::size_t i = 0; i < model.classes_.size(); ++i) {
        class_index[model.classes_[i]] = static_cast<int>(i);
    }
    std::vector<int> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = class_index[labels[i]];

    TrainContext ctx{&rows, &y, static_cast<int>(model.classes_.size()), model.dim_, hyper};

    model.trees_.resize(hyper.n_trees);
    par::for_index(static_cast<std::size_t>(hyper.n_trees), [&](std::size_t t) {
        model.trees_[t] = build_tree(ctx, Rng::derive(seed, t));
    });
    return model;
}

std::vector<double> TreeEnsembleModel::predict_proba(std::span<const double> row) const {
    if (static_cast<int>(row.size()) != dim_) {
        throw std::invalid_argument("TreeEnsembleModel::predict_proba: wrong dimension");
    }
    std::vector<double> acc(classes_.size(), 0.0);
    for (const auto& tree : trees_) {
        int node = 0;
        while (tree.nodes[node].feature >= 0) {
            const auto& nd = tree.nodes[node];
            node = row[nd.feature] < nd.threshold ? nd.left : nd.right;
        }
        const auto& probs = tree.nodes[node].probs;
        for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += probs[c];
    }
    for (double& v : acc) v /= static_cast<double>(trees_.size());
    return acc;
}

double TreeEnsembleModel::predict_proba_of(std::span<const double> row,
                                           const std::string& cls) const {
    const auto it = std::lower_bound(classes_.begin(), classes_.end(), cls);
    if (it == classes_.end() || *it != cls) return 0.0;
    return predict_proba(row)[it - classes_.begin()];
}

const std::string& TreeEnsembleModel::predict(std::span<const double> row) const {
    const std::vector<double> probs = predict_proba(row);
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[best]) best = c;
    }
    return classes_[best];
}

nlohmann::ordered_json TreeEnsembleModel::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = "tree_ensemble";
    j["classes"] = classes_;
    j["dim"] = dim_;
    j["seed"] = seed_;
    j["n_trees"] = hyper_.n_trees;
    j["max_depth"] = hyper_.max_depth;
    j["min_leaf"] = hyper_.min_leaf;
    j["feature_subsample"] = hyper_.feature_subsample;
    j["balanced_bootstrap"] = hyper_.balanced_bootstrap;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& tree : trees_) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const auto& nd : tree.nodes) {
            nlohmann::ordered_json n;
            n["f"] = nd.feature;
            n["t"] = nd.threshold;
            n["l"] = nd.left;
            n["r"] = nd.right;
            n["p"] = nd.probs;
            nodes.push_back(std::move(n));
        }
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j;
}

TreeEnsembleModel TreeEnsembleModel::from_json(const nlohmann::ordered_json& j) {
    if (j.at("kind").get<std::string>() != "tree_ensemble") {
        throw std::runtime_error("TreeEnsembleModel::from_json: wrong kind");
    }
    TreeEnsembleModel model;
    model.classes_ = j.at("classes").get<std::vector<std::string>>();
    model.dim_ = j.at("dim").get<int>();
    model.seed_ = j.at("seed").get<std::uint64_t>();
    model.hyper_.n_trees = j.at("n_trees").get<int>();
    model.hyper_.max_depth = j.at("max_depth").get<int>();
    model.hyper_.min_leaf = j.at("min_leaf").get<int>();
    model.hyper_.feature_subsample = j.at("feature_subsample").get<int>();
    model.hyper_.balanced_bootstrap = j.at("balanced_bootstrap").get<bool>();
    for (const auto& tree_json : j.at("trees")) {
        DecisionTree tree;
        for (const auto& n : tree_json) {
            TreeNode nd;
            nd.feature = n.at("f").get<int>();
            nd.threshold = n.at("t").get<double>();
            nd.left = n.at("l").get<int>();
            nd.right = n.at("r").get<int>();
            nd.probs = n.at("p").get<std::vector<double>>();
            tree.nodes.push_back(std::move(nd));
        }
        model.trees_.push_back(std::move(tree));
    }
    return model;
}

}  // namespace xprint
