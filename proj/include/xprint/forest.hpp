#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace xprint {

struct ForestHyper {
    int n_trees = 100;
    int max_depth = 12;
    int min_leaf = 2;
    /// Features tried per split; 0 means ceil(sqrt(dim)).
    int feature_subsample = 0;
    /// Resample every class to the same count per tree; used for URI
    /// classifiers where invocation frequencies are heavily skewed.
    bool balanced_bootstrap = false;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> probs;  // leaf class distribution
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
};

/**
 * Bagged ensemble of Gini-split decision trees over dense feature rows.
 * Training is deterministic for a fixed seed: each tree draws from its own
 * derived random stream and trees are stored by index, so the result is
 * identical whether trees are built serially or in parallel.
 */
class TreeEnsembleModel {
public:
    static TreeEnsembleModel train(const std::vector<std::vector<double>>& rows,
                                   const std::vector<std::string>& labels,
                                   const ForestHyper& hyper, std::uint64_t seed);

    /// Class distribution averaged over trees; aligned with classes().
    std::vector<double> predict_proba(std::span<const double> row) const;

    /// Probability of one named class; 0 for a class the model never saw.
    double predict_proba_of(std::span<const double> row, const std::string& cls) const;

    /// argmax class of predict_proba, ties to the lexicographically first.
    const std::string& predict(std::span<const double> row) const;

    const std::vector<std::string>& classes() const { return classes_; }
    const ForestHyper& hyper() const { return hyper_; }
    int dim() const { return dim_; }
    std::size_t tree_count() const { return trees_.size(); }

    nlohmann::ordered_json to_json() const;
    static TreeEnsembleModel from_json(const nlohmann::ordered_json& j);

private:
    std::vector<std::string> classes_;
    std::vector<DecisionTree> trees_;
    ForestHyper hyper_;
    std::uint64_t seed_ = 0;
    int dim_ = 0;
};

}  // namespace xprint
