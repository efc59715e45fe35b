#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <vector>

#include "xprint/logistic.hpp"
#include "xprint/rng.hpp"

using namespace xprint;

namespace {

/// Linearly separable toy set: label 1 iff x0 + x1 - x2 > 0.5.
void make_set(Rng& rng, int n, std::vector<std::array<double, 3>>& x,
              std::vector<int>& y) {
    for (int i = 0; i < n; ++i) {
        std::array<double, 3> row = {rng.uniform(), rng.uniform(), rng.uniform()};
        x.push_back(row);
        y.push_back(row[0] + row[1] - row[2] > 0.5 ? 1 : 0);
    }
}

}  // namespace

TEST_CASE("learns a separable boundary") {
    Rng rng(1);
    std::vector<std::array<double, 3>> x;
    std::vector<int> y;
    make_set(rng, 400, x, y);
    const auto model = LogisticModel::train(x, y, LogisticHyper{});
    int correct = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        correct += (model.predict(x[i]) > 0.5) == (y[i] == 1) ? 1 : 0;
    }
    CHECK(double(correct) / double(x.size()) >= 0.97);
}

TEST_CASE("training loss never increases across epochs") {
    // train at several epoch budgets; the final loss must be monotone
    // non-increasing in the budget since each epoch backs off on failure
    Rng rng(2);
    std::vector<std::array<double, 3>> x;
    std::vector<int> y;
    make_set(rng, 200, x, y);
    double prev = LogisticModel::loss(x, y, {0, 0, 0}, 0.0, 1e-6);
    for (int epochs : {1, 5, 20, 100, 400}) {
        LogisticHyper hyper;
        hyper.epochs = epochs;
        const auto model = LogisticModel::train(x, y, hyper);
        const double l = LogisticModel::loss(x, y, model.weights(), model.bias(),
                                             hyper.l2);
        CHECK(l <= prev + 1e-12);
        prev = l;
    }
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(3);
    std::vector<std::array<double, 3>> x;
    std::vector<int> y;
    make_set(rng, 50, x, y);
    const double l2 = 1e-3;
    const double eps = 1e-6;

    for (int trial = 0; trial < 10; ++trial) {
        std::array<double, 3> w = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                                   rng.uniform(-2.0, 2.0)};
        const double b = rng.uniform(-2.0, 2.0);
        std::array<double, 3> grad_w{};
        double grad_b = 0;
        LogisticModel::gradient(x, y, w, b, l2, grad_w, grad_b);

        for (int d = 0; d < 3; ++d) {
            auto wp = w, wm = w;
            wp[d] += eps;
            wm[d] -= eps;
            const double numeric = (LogisticModel::loss(x, y, wp, b, l2) -
                                    LogisticModel::loss(x, y, wm, b, l2)) /
                                   (2 * eps);
            CHECK(std::abs(numeric - grad_w[d]) <=
                  1e-6 * std::max(1.0, std::abs(numeric)));
        }
        const double numeric_b = (LogisticModel::loss(x, y, w, b + eps, l2) -
                                  LogisticModel::loss(x, y, w, b - eps, l2)) /
                                 (2 * eps);
        CHECK(std::abs(numeric_b - grad_b) <= 1e-6 * std::max(1.0, std::abs(numeric_b)));
    }
}

TEST_CASE("prediction is a probability and monotone in the logit") {
    Rng rng(4);
    std::vector<std::array<double, 3>> x;
    std::vector<int> y;
    make_set(rng, 300, x, y);
    const auto model = LogisticModel::train(x, y, LogisticHyper{});
    double prev = -1.0;
    // walk along the learned weight direction; predict must increase
    for (int step = -5; step <= 5; ++step) {
        std::array<double, 3> q{};
        for (int d = 0; d < 3; ++d) q[d] = 0.2 * step * model.weights()[d];
        const double p = model.predict(q);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
        CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("serialization round-trips exactly") {
    Rng rng(5);
    std::vector<std::array<double, 3>> x;
    std::vector<int> y;
    make_set(rng, 100, x, y);
    const auto model = LogisticModel::train(x, y, LogisticHyper{});
    const auto copy = LogisticModel::from_json(model.to_json());
    CHECK(copy.weights() == model.weights());
    CHECK(copy.bias() == model.bias());
    CHECK(copy.to_json() == model.to_json());
}

TEST_CASE("rejects inconsistent input") {
    CHECK_THROWS(LogisticModel::train({}, {}, LogisticHyper{}));
    CHECK_THROWS(LogisticModel::train({{1, 2, 3}}, {1, 0}, LogisticHyper{}));
    CHECK_THROWS(LogisticModel::train({{1, 2, 3}}, {2}, LogisticHyper{}));
}
