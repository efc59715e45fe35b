#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "xprint/forest.hpp"
#include "xprint/parallel.hpp"
#include "xprint/rng.hpp"

using namespace xprint;

namespace {

/// Three well-separated Gaussian blobs in 4 dimensions.
void make_blobs(Rng& rng, int per_class, std::vector<std::vector<double>>& rows,
                std::vector<std::string>& labels) {
    const double centers[3][4] = {{0, 0, 0, 0}, {8, 8, 0, 0}, {0, 8, 8, 8}};
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < per_class; ++i) {
            std::vector<double> row(4);
            for (int d = 0; d < 4; ++d) row[d] = rng.normal(centers[c][d], 1.0);
            rows.push_back(std::move(row));
            labels.push_back("class" + std::to_string(c));
        }
    }
}

/// Plain k-nearest-neighbours vote, the oracle for blob classification.
std::string knn_predict(const std::vector<std::vector<double>>& rows,
                        const std::vector<std::string>& labels,
                        const std::vector<double>& q, int k) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double d2 = 0;
        for (std::size_t j = 0; j < q.size(); ++j) {
            const double d = rows[i][j] - q[j];
            d2 += d * d;
        }
        dist.emplace_back(d2, i);
    }
    std::sort(dist.begin(), dist.end());
    std::map<std::string, int> votes;
    for (int i = 0; i < k; ++i) ++votes[labels[dist[i].second]];
    std::string best;
    int best_n = -1;
    for (const auto& [cls, n] : votes) {
        if (n > best_n) {
            best = cls;
            best_n = n;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("memorizes a small clean training set") {
    std::vector<std::vector<double>> rows = {{0, 0}, {0, 1}, {10, 0}, {10, 1}};
    std::vector<std::string> labels = {"a", "a", "b", "b"};
    ForestHyper hyper;
    hyper.n_trees = 30;
    hyper.min_leaf = 1;
    const auto model = TreeEnsembleModel::train(rows, labels, hyper, 5);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(model.predict(rows[i]) == labels[i]);
        CHECK(model.predict_proba_of(rows[i], labels[i]) > 0.9);
    }
    CHECK(model.predict_proba_of(rows[0], "never_seen") == 0.0);
}

TEST_CASE("probabilities are a distribution over the sorted class list") {
    Rng rng(1);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    make_blobs(rng, 30, rows, labels);
    const auto model = TreeEnsembleModel::train(rows, labels, ForestHyper{}, 3);
    CHECK(model.classes() == std::vector<std::string>{"class0", "class1", "class2"});
    for (int i = 0; i < 20; ++i) {
        std::vector<double> q(4);
        for (auto& v : q) v = rng.uniform(-2.0, 10.0);
        const auto p = model.predict_proba(q);
        REQUIRE(p.size() == 3);
        double sum = 0;
        for (double v : p) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("agrees with a k-NN oracle on well-separated blobs") {
    Rng rng(2);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    make_blobs(rng, 60, rows, labels);
    const auto model = TreeEnsembleModel::train(rows, labels, ForestHyper{}, 7);

    int agree = 0, total = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> q(4);
        const int c = static_cast<int>(rng.below(3));
        const double centers[3][4] = {{0, 0, 0, 0}, {8, 8, 0, 0}, {0, 8, 8, 8}};
        for (int d = 0; d < 4; ++d) q[d] = rng.normal(centers[c][d], 1.2);
        agree += model.predict(q) == knn_predict(rows, labels, q, 5) ? 1 : 0;
        ++total;
    }
    CHECK(double(agree) / total >= 0.95);
}

TEST_CASE("training is deterministic and serial/parallel identical") {
    Rng rng(3);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    make_blobs(rng, 25, rows, labels);
    ForestHyper hyper;
    hyper.n_trees = 20;

    const bool was = par::enabled();
    par::enabled() = false;
    const auto serial = TreeEnsembleModel::train(rows, labels, hyper, 11);
    par::enabled() = true;
    const auto parallel = TreeEnsembleModel::train(rows, labels, hyper, 11);
    par::enabled() = was;
    CHECK(serial.to_json() == parallel.to_json());

    const auto again = TreeEnsembleModel::train(rows, labels, hyper, 11);
    CHECK(again.to_json().dump() == parallel.to_json().dump());
    const auto other_seed = TreeEnsembleModel::train(rows, labels, hyper, 12);
    CHECK(other_seed.to_json().dump() != parallel.to_json().dump());
}

TEST_CASE("serialization round-trips predictions exactly") {
    Rng rng(4);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    make_blobs(rng, 20, rows, labels);
    const auto model = TreeEnsembleModel::train(rows, labels, ForestHyper{}, 13);
    const auto copy = TreeEnsembleModel::from_json(model.to_json());
    CHECK(copy.classes() == model.classes());
    CHECK(copy.tree_count() == model.tree_count());
    CHECK(copy.dim() == model.dim());
    for (int i = 0; i < 50; ++i) {
        std::vector<double> q(4);
        for (auto& v : q) v = rng.uniform(-3.0, 11.0);
        CHECK(copy.predict_proba(q) == model.predict_proba(q));
    }
    CHECK(copy.to_json() == model.to_json());
}

TEST_CASE("balanced bootstrap keeps rare classes visible") {
    Rng rng(5);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    // 200 of class a, 8 of class b, far apart
    for (int i = 0; i < 200; ++i) {
        rows.push_back({rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)});
        labels.push_back("a");
    }
    for (int i = 0; i < 8; ++i) {
        rows.push_back({rng.normal(10.0, 1.0), rng.normal(10.0, 1.0)});
        labels.push_back("b");
    }
    ForestHyper hyper;
    hyper.balanced_bootstrap = true;
    const auto model = TreeEnsembleModel::train(rows, labels, hyper, 17);
    int correct = 0;
    for (int i = 0; i < 50; ++i) {
        std::vector<double> q = {rng.normal(10.0, 1.0), rng.normal(10.0, 1.0)};
        correct += model.predict(q) == "b" ? 1 : 0;
    }
    CHECK(correct >= 48);
}

TEST_CASE("rejects inconsistent input") {
    CHECK_THROWS(TreeEnsembleModel::train({}, {}, ForestHyper{}, 1));
    CHECK_THROWS(TreeEnsembleModel::train({{1.0}}, {"a", "b"}, ForestHyper{}, 1));
    std::vector<std::vector<double>> ragged = {{1.0, 2.0}, {1.0}};
    CHECK_THROWS(TreeEnsembleModel::train(ragged, {"a", "b"}, ForestHyper{}, 1));
}
