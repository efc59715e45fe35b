#pragma once

#include <array>
#include <vector>

#include "json.hpp"

namespace xprint {

struct LogisticHyper {
    double learning_rate = 0.5;
    int epochs = 400;
    double l2 = 1e-6;
};

/**
 * Binary logistic regression on a fixed 3-feature input, trained by
 * full-batch gradient descent from zero weights.  Each epoch backs off the
 * step until the regularized loss does not increase, so the loss sequence
 * is non-increasing and training is deterministic.
 */
class LogisticModel {
public:
    static LogisticModel train(const std::vector<std::array<double, 3>>& x,
                               const std::vector<int>& y, const LogisticHyper& hyper);

    double predict(const std::array<double, 3>& h) const;

    /// Mean cross-entropy plus (l2/2)*||w||^2; bias unregularized.
    static double loss(const std::vector<std::array<double, 3>>& x,
                       const std::vector<int>& y, const std::array<double, 3>& w,
                       double bias, double l2);

    /// Analytic gradient of loss wrt (w, bias).
    static void gradient(const std::vector<std::array<double, 3>>& x,
                         const std::vector<int>& y, const std::array<double, 3>& w,
                         double bias, double l2, std::array<double, 3>& grad_w,
                         double& grad_b);

    const std::array<double, 3>& weights() const { return w_; }
    double bias() const { return b_; }

    nlohmann::ordered_json to_json() const;
    static LogisticModel from_json(const nlohmann::ordered_json& j);

private:
    std::array<double, 3> w_{0.0, 0.0, 0.0};
    double b_ = 0.0;
    LogisticHyper hyper_;
};

}  // namespace xprint
